"""Small-bias and k-wise sources, hash partitions, and the recursive GC0 PRG.

Sources map a seed to an n-bit output (an int, bit j = coordinate j).
A seed is a tuple of field elements of GF(2^r); `seed_length` counts bits.
Vectorised paths take a uint64 array of shape (S, words) holding S seeds.

Field arithmetic uses, for each degree r, the lexicographically smallest
irreducible polynomial (found by search, cached; see `irreducible`), so
outputs are reproducible everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .boolfun import CapacityError

FIELD_CAP = 62  # uint64 kernels


class ParameterOverflow(ValueError):
    """Requested parameters need a field wider than the kernels support."""


# ----------------------------------------------------------- GF(2)[x]
def _pdeg(a: int) -> int:
    return a.bit_length() - 1


def _pmod(a: int, f: int) -> int:
    df = _pdeg(f)
    while a and _pdeg(a) >= df:
        a ^= f << (_pdeg(a) - df)
    return a


def _pmulmod(a: int, b: int, f: int) -> int:
    a = _pmod(a, f)
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> _pdeg(f) & 1:
            a ^= f
    return res


def _pgcd(a: int, b: int) -> int:
    while b:
        a, b = b, _pmod(a, b)
    return a


def _prime_factors(r: int) -> list[int]:
    out, q = [], 2
    while q * q <= r:
        if r % q == 0:
            out.append(q)
            while r % q == 0:
                r //= q
        q += 1
    if r > 1:
        out.append(r)
    return out


def is_irreducible(f: int) -> bool:
    """Rabin's test over GF(2)."""
    r = _pdeg(f)
    if r < 1:
        return False

    def frob(e):  # x^(2^e) mod f
        x = 0b10
        for _ in range(e):
            x = _pmulmod(x, x, f)
        return x

    if frob(r) != _pmod(0b10, f):
        return False
    for q in _prime_factors(r):
        if _pgcd(f, frob(r // q) ^ 0b10) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible(r: int) -> int:
    """Smallest (as an integer) irreducible polynomial of degree r, x^r included."""
    if r < 1:
        raise ValueError("degree must be >= 1")
    for low in range(1, 1 << r, 2):
        f = (1 << r) | low
        if is_irreducible(f):
            return f
    raise AssertionError("no irreducible polynomial found")


@dataclass(frozen=True)
class Field:
    r: int

    def __post_init__(self):
        if not 1 <= self.r <= FIELD_CAP:
            raise ParameterOverflow(f"field degree {self.r} outside [1, {FIELD_CAP}]")

    @property
    def low(self) -> int:
        return irreducible(self.r) ^ (1 << self.r)

    @property
    def mask(self) -> int:
        return (1 << self.r) - 1

    def mul(self, a: int, b: int) -> int:
        return kernels.gf_mul_py(a, b, self.r, self.low)

    def mul_vec(self, a, b) -> np.ndarray:
        return kernels.gf_mul_vec(a, b, self.r, self.low)

    def pow_vec(self, x: np.ndarray, e: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint64)
        res = np.ones_like(x)
        base = x.copy()
        while e:
            if e & 1:
                res = self.mul_vec(res, base)
            e >>= 1
            if e:
                base = self.mul_vec(base, base)
        return res

    def poly_eval_vec(self, coeffs: np.ndarray, point: int) -> np.ndarray:
        """Horner over S seeds: coeffs has shape (S, deg+1), lowest first."""
        S, K = coeffs.shape
        acc = np.zeros(S, dtype=np.uint64)
        pt = np.full(S, point, dtype=np.uint64)
        for c in range(K - 1, -1, -1):
            acc = self.mul_vec(acc, pt) ^ coeffs[:, c]
        return acc


def _parity_u64(a: np.ndarray) -> np.ndarray:
    return (np.bitwise_count(a) & 1).astype(np.uint8)


def _words_to_int(bits: np.ndarray) -> np.ndarray:
    """(S, n) 0/1 array -> int64 words."""
    S, n = bits.shape
    out = np.zeros(S, dtype=np.int64)
    for j in range(n):
        out |= bits[:, j].astype(np.int64) << j
    return out


# ------------------------------------------------------------- sources
class Source:
    """n-bit generator on seeds made of `words` field elements of GF(2^r)."""

    kind = "source"
    n: int
    words: int
    field: Field

    @property
    def seed_length(self) -> int:
        return self.words * self.field.r

    def random_seeds(self, S: int, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, 1 << self.field.r, size=(S, self.words), dtype=np.uint64) \
            if self.field.r < 63 else rng.integers(0, 2 ** 63, size=(S, self.words), dtype=np.uint64)

    def all_seeds(self) -> np.ndarray:
        if self.seed_length > 26:
            raise CapacityError("seed enumeration capped at 2^26 seeds")
        idx = np.arange(1 << self.seed_length, dtype=np.uint64)
        r = np.uint64(self.field.r)
        cols = [(idx >> (r * np.uint64(i))) & np.uint64(self.field.mask) for i in range(self.words)]
        return np.stack(cols, axis=1) if cols else np.zeros((idx.size, 0), np.uint64)

    def seed_from_int(self, s: int) -> np.ndarray:
        return np.array([[(s >> (self.field.r * i)) & self.field.mask for i in range(self.words)]], dtype=np.uint64)

    def bit(self, seeds: np.ndarray, j: int) -> np.ndarray:
        raise NotImplementedError

    def generate_many(self, seeds: np.ndarray) -> np.ndarray:
        seeds = np.asarray(seeds, dtype=np.uint64)
        if seeds.ndim == 1:
            seeds = seeds.reshape(-1, self.words)
        bits = np.stack([self.bit(seeds, j) for j in range(self.n)], axis=1) if self.n else \
            np.zeros((seeds.shape[0], 0), np.uint8)
        return _words_to_int(bits)

    def generate(self, seed: int) -> int:
        return int(self.generate_many(self.seed_from_int(seed))[0])

    def histogram(self) -> np.ndarray:
        """Counts of each output over all seeds."""
        return np.bincount(self.generate_many(self.all_seeds()), minlength=1 << self.n)

    def params(self) -> dict:
        return {}


@dataclass
class EpsBiased(Source):
    """AGHP powering source: bit i = <x^i, y> over GF(2^r), r = ceil(log2(n/eps))."""

    n: int
    eps: float
    kind = "eps_biased"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        r = max(1, math.ceil(math.log2(max(self.n, 1) / self.eps))) if self.n > 1 else 1
        self.field = Field(r)
        self.words = 2

    @property
    def bias_bound(self) -> float:
        return max(self.n - 1, 0) / 2 ** self.field.r

    def bit(self, seeds, j):
        x, y = seeds[:, 0], seeds[:, 1]
        return _parity_u64(self.field.pow_vec(x, j) & y)

    def generate_many(self, seeds):
        seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, 2)
        return kernels.aghp_words(seeds[:, 0].astype(np.int64), seeds[:, 1].astype(np.int64),
                                  self.n, self.field.r, self.field.low)

    def histogram(self):
        if self.seed_length > 34:
            raise CapacityError("AGHP histogram capped at 2^34 seeds")
        return kernels.aghp_histogram(self.n, self.field.r, self.field.low)

    def params(self):
        return {"n": self.n, "eps": self.eps, "r": self.field.r}


def eps_biased(n: int, eps: float) -> EpsBiased:
    return EpsBiased(n, eps)


def eps_k_wise(n: int, k: int, eps: float) -> EpsBiased:
    """(eps, k)-wise source from an eps * 2^{-k/2}-biased one."""
    return EpsBiased(n, eps * 2 ** (-k / 2))


def dt_prg(n: int, t: int, eps: float) -> EpsBiased:
    """Fools depth-t decision trees: an (eps 2^-t, t)-wise source."""
    if t > 20:
        raise CapacityError("dt_prg needs t <= 20")
    return eps_k_wise(n, t, eps * 2 ** (-t))


@dataclass
class KWiseExact(Source):
    """Low bit of a random degree < k polynomial at the points 0..n-1."""

    n: int
    k: int
    kind = "k_wise_exact"

    def __post_init__(self):
        self.field = Field(max(1, math.ceil(math.log2(max(self.n, 2)))))
        self.words = self.k

    def bit(self, seeds, j):
        if self.k == 0:
            return np.zeros(seeds.shape[0], np.uint8)
        return (self.field.poly_eval_vec(seeds, j) & np.uint64(1)).astype(np.uint8)

    def params(self):
        return {"n": self.n, "k": self.k, "r": self.field.r}


def k_wise_exact(n: int, k: int) -> KWiseExact:
    return KWiseExact(n, k)


@dataclass
class HashPartition:
    """H: [n] -> [ell] as the low log2(ell) bits of a degree < independence
    polynomial; ell must be a power of two."""

    n: int
    ell: int
    independence: int

    def __post_init__(self):
        if self.ell < 1 or self.ell & (self.ell - 1):
            raise ValueError("ell must be a power of two")
        self.b = self.ell.bit_length() - 1
        self.field = Field(max(1, self.b, math.ceil(math.log2(max(self.n, 2)))))
        self.words = self.independence

    @property
    def seed_length(self) -> int:
        return self.words * self.field.r

    random_seeds = Source.random_seeds
    all_seeds = Source.all_seeds
    seed_from_int = Source.seed_from_int

    def values(self, seeds: np.ndarray) -> np.ndarray:
        """(S, n) bucket of each coordinate."""
        seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, self.words)
        out = np.empty((seeds.shape[0], self.n), dtype=np.int64)
        m = np.uint64(self.ell - 1)
        for j in range(self.n):
            if self.words == 0:
                out[:, j] = 0
            else:
                out[:, j] = (self.field.poly_eval_vec(seeds, j) & m).astype(np.int64)
        return out

    def indicators(self, seed: int) -> list[int]:
        """H_1..H_ell as n-bit masks."""
        h = self.values(self.seed_from_int(seed))[0]
        masks = [0] * self.ell
        for j, i in enumerate(h):
            masks[int(i)] |= 1 << j
        return masks


def kwise_hash_partition(n: int, ell: int, independence: int, seed: int) -> list[int]:
    return HashPartition(n, ell, independence).indicators(seed)


# --------------------------------------------------------------- GC0 PRG
_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive(key: np.ndarray, label) -> np.ndarray:
    """Child key for a component; label is an int or an int array."""
    with np.errstate(over="ignore"):
        return splitmix64(np.asarray(key, dtype=np.uint64) ^ splitmix64(np.asarray(label, dtype=np.uint64) + np.uint64(1)))


def derive_seed(key: np.ndarray, words: int, r: int) -> np.ndarray:
    """(S, words) field elements from keys of shape (S,)."""
    key = np.asarray(key, dtype=np.uint64)
    mask = np.uint64((1 << r) - 1)
    cols = [derive(key, 1000 + i) & mask for i in range(words)]
    return np.stack(cols, axis=-1) if cols else np.zeros(key.shape + (0,), np.uint64)


LABEL_Y, LABEL_H, LABEL_X = 1, 2, 3


@dataclass
class GC0Config:
    """Constants for the recursive PRG; None means the proved default."""

    ell: int | None = None  # logical 512 w
    t: int | None = None  # 10 log2(m/eps)
    y_k: int | None = None  # independence of the Y source (default t)
    y_eps: float | None = None  # bias parameter of the Y source (default eps/2)
    base_t: int | None = None  # depth parameter of the d = 1 dt_prg (default w)
    source: str = "eps"  # eps | exact | auto: how k-wise pieces are built


def _kwise_source(n: int, k: int, eps: float, how: str) -> Source:
    a = eps_k_wise(n, k, eps)
    if how == "eps":
        return a
    b = k_wise_exact(n, k)
    if how == "exact" or b.seed_length <= a.seed_length:
        return b
    return a


class GC0PRG:
    """Y xor (X_1 and H_1) xor ... xor (X_ell and H_ell).

    Only one X_i matters per coordinate, so output bit j is evaluated as
    Y_j xor (X_{H(j)})_j and X sources are expanded lazily.
    """

    kind = "gc0_prg"

    def __init__(self, n: int, m: int, d: int, w: int, eps: float, config: GC0Config | None = None):
        if d < 1:
            raise ValueError("d >= 1")
        cfg = config or GC0Config()
        self.n, self.m, self.d, self.w, self.eps, self.cfg = n, m, d, w, eps, cfg
        self.t = cfg.t if cfg.t is not None else math.ceil(10 * math.log2(max(m, 2) / eps))
        self.ell_logical = 512 * w
        ell = cfg.ell if cfg.ell is not None else self.ell_logical
        self.ell = 1 << max(0, (ell - 1).bit_length())
        self.hash = HashPartition(n, self.ell, 2 * self.t)
        y_k = cfg.y_k if cfg.y_k is not None else self.t
        y_eps = cfg.y_eps if cfg.y_eps is not None else eps / 2
        self.Y = _kwise_source(n, y_k, y_eps, cfg.source)
        if d == 1:
            bt = cfg.base_t if cfg.base_t is not None else w
            self.X = _kwise_source(n, bt, eps * 2 ** (-bt), cfg.source) if cfg.source != "eps" else dt_prg(n, bt, eps)
        else:
            self.X = GC0PRG(n, m, d - 1, w, eps, cfg)

    @property
    def seed_length(self) -> int:
        """Bits of independent seed the construction consumes."""
        return self.Y.seed_length + self.hash.seed_length + self.ell * self.X.seed_length

    def components(self) -> dict:
        return {
            "d": self.d,
            "t": self.t,
            "ell": self.ell,
            "ell_logical": self.ell_logical,
            "Y": {"kind": self.Y.kind, **self.Y.params(), "seed_length": self.Y.seed_length},
            "H": {"ell": self.ell, "independence": 2 * self.t, "r": self.hash.field.r,
                  "seed_length": self.hash.seed_length},
            "X": self.X.components() if isinstance(self.X, GC0PRG) else
                 {"kind": self.X.kind, **self.X.params(), "seed_length": self.X.seed_length},
            "seed_length": self.seed_length,
        }

    def bit(self, keys: np.ndarray, j: int) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.uint64)
        y = self.Y.bit(derive_seed(derive(keys, LABEL_Y), self.Y.words, self.Y.field.r), j)
        hseed = derive_seed(derive(keys, LABEL_H), self.hash.words, self.hash.field.r)
        if self.hash.words:
            h = self.hash.field.poly_eval_vec(hseed, j) & np.uint64(self.ell - 1)
        else:
            h = np.zeros(keys.shape[0], np.uint64)
        xkeys = derive(derive(keys, LABEL_X), h)
        if isinstance(self.X, GC0PRG):
            x = self.X.bit(xkeys, j)
        else:
            x = self.X.bit(derive_seed(xkeys, self.X.words, self.X.field.r), j)
        return y ^ x

    def generate_many(self, keys) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.uint64).ravel()
        bits = np.stack([self.bit(keys, j) for j in range(self.n)], axis=1)
        return _words_to_int(bits)

    def generate(self, key: int) -> int:
        return int(self.generate_many(np.array([key], dtype=np.uint64))[0])

    # full-string route, for cross-checks on small parameters
    def reference(self, key: int, x_override: dict | None = None) -> int:
        """Y xor XOR_i (X_i and H_i) with every X_i expanded in full.

        `x_override` maps i to a replacement n-bit string for X_i.
        """
        k = np.array([key], dtype=np.uint64)
        y = self.Y.generate_many(derive_seed(derive(k, LABEL_Y), self.Y.words, self.Y.field.r))[0]
        hseed = derive_seed(derive(k, LABEL_H), self.hash.words, self.hash.field.r)
        hv = self.hash.values(hseed)[0]
        masks = [0] * self.ell
        for j, i in enumerate(hv):
            masks[int(i)] |= 1 << j
        xkey = derive(k, LABEL_X)
        out = int(y)
        for i in range(self.ell):
            if x_override and i in x_override:
                xi = x_override[i]
            else:
                ki = derive(xkey, np.array([i], dtype=np.uint64))
                if isinstance(self.X, GC0PRG):
                    xi = self.X.reference(int(ki[0]))
                else:
                    xi = int(self.X.generate_many(derive_seed(ki, self.X.words, self.X.field.r))[0])
            out ^= xi & masks[i]
        return out

    def hash_masks(self, key: int) -> list[int]:
        k = np.array([key], dtype=np.uint64)
        hv = self.hash.values(derive_seed(derive(k, LABEL_H), self.hash.words, self.hash.field.r))[0]
        masks = [0] * self.ell
        for j, i in enumerate(hv):
            masks[int(i)] |= 1 << j
        return masks


def gc0_prg(n: int, m: int, d: int, w: int, eps: float, master_seed: int, config: GC0Config | None = None) -> int:
    return GC0PRG(n, m, d, w, eps, config).generate(master_seed)


def seed_length_formula(m: int, d: int, w: int, eps: float, c: float = 1.0) -> float:
    """c (w log^{d-1} m + log^2 m) log(m/eps) loglog m, logs base 2."""
    lm = math.log2(max(m, 2))
    return c * (w * lm ** (d - 1) + lm ** 2) * math.log2(m / eps) * math.log2(max(lm, 2))


def final_seed_length_formula(m: int, d: int, eps: float, c: float = 1.0) -> float:
    """c log^{d} m log(m/eps) loglog m (the headline statement's form)."""
    lm = math.log2(max(m, 2))
    return c * lm ** d * math.log2(m / eps) * math.log2(max(lm, 2))


# ----------------------------------------------------- fooling estimates
def exact_mean(values: np.ndarray) -> float:
    return float(np.mean(values))


def fooling_error_exhaustive(table: np.ndarray, source: Source) -> float:
    """|E_source[f] - E_uniform[f]| over every seed; table is f's truth table."""
    hist = source.histogram()
    total = hist.sum()
    e_src = float(np.dot(hist, table.astype(np.float64))) / total
    return abs(e_src - float(np.mean(table)))


# ------------------------------------- derandomized multi-switching
def derandomized_bound(p, t: int, r: int, k: int, m: int, w: int, eps: float) -> float:
    """4 (m 2^k)^{t/r} (64 p w)^t + (64 w m)^{t+w} (2m)^{2kt/r} eps."""
    p = float(p)
    return 4 * (m * 2 ** k) ** (t / r) * (64 * p * w) ** t + (64 * w * m) ** (t + w) * (2 * m) ** (2 * k * t / r) * eps


def derandomized_switching_experiment(fam, ell: int, independence: int, z_source: Source | None,
                                      t: int, r: int, mode: str = "mc", trials: int = 0,
                                      seed: int = 0, z_eps: float = 0.0) -> dict:
    """CPDT failure rate when Lambda = {j : H(j) = 0} for a k-wise hash H
    into ell buckets (so p = 1/ell) and z comes from `z_source` (None means
    uniform).  Exhaustive mode enumerates every hash seed and every z from
    the source (or all 2^n strings when uniform)."""
    from .switching import cpdt_fails
    from .boolfun import Restriction
    from .stats import wilson

    n = fam.n
    H = HashPartition(n, ell, independence)
    p = Fraction(1, ell)

    def lam_of(hv):
        return sum(1 << j for j in range(n) if hv[j] == 0)

    if mode == "exhaustive":
        hseeds = H.all_seeds()
        hvals = H.values(hseeds)
        if z_source is None:
            zs = np.arange(1 << n)
            zw = np.ones(zs.size, dtype=np.int64)
        else:
            hist = z_source.histogram()
            zs = np.flatnonzero(hist)
            zw = hist[zs]
        fails = 0
        for hv in hvals:
            lam = lam_of(hv)
            for z, wt in zip(zs, zw):
                rho = Restriction.from_lambda(n, lam, int(z))
                if cpdt_fails(fam, rho, int(z), r, t):
                    fails += int(wt)
        total = len(hvals) * int(zw.sum())
        est = Fraction(fails, total)
        lo = hi = est
        trials = total
    else:
        rng = np.random.default_rng(seed)
        hv_all = H.values(H.random_seeds(trials, rng))
        if z_source is None:
            zs = rng.integers(0, 1 << n, size=trials)
        else:
            zs = z_source.generate_many(z_source.random_seeds(trials, rng))
        fails = 0
        for hv, z in zip(hv_all, zs):
            rho = Restriction.from_lambda(n, lam_of(hv), int(z))
            fails += cpdt_fails(fam, rho, int(z), r, t)
        est = fails / max(trials, 1)
        lo, hi = wilson(fails, trials)
    bound = derandomized_bound(p, t, r, fam.k, len(fam), max(fam.width, 1), z_eps)
    return {
        "experiment_id": "derandomized_switching",
        "n": n, "m": len(fam), "k": fam.k, "w": max(fam.width, 1), "p": str(p), "t": t, "r": r,
        "mode": mode, "trials": trials, "failures": fails, "estimate": est,
        "ci_low": lo, "ci_high": hi, "bound": bound, "seed": seed if mode == "mc" else "",
        "independence": independence, "z_source": getattr(z_source, "kind", "uniform"),
        "vacuous": bound >= 1,
    }
