"""Truth tables, restrictions, decision trees and Walsh-Hadamard spectra.

Convention everywhere: bit i of the integer x is variable i.  The +-1 view
maps a bit b to (-1)^b, on inputs and outputs alike.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels

MAX_ARITY = 24
DT_DEPTH_CAP = 14
STAR = 2


class CapacityError(ValueError):
    pass


class DimensionError(ValueError):
    pass


# ------------------------------------------------------------------ BoolFun
@dataclass(frozen=True, eq=False)
class BoolFun:
    """Bit-packed truth table: bit x of `words` (little-endian words) is f(x)."""

    arity: int
    words: np.ndarray

    def __post_init__(self):
        if not 0 <= self.arity <= MAX_ARITY:
            raise CapacityError(f"arity {self.arity} outside [0, {MAX_ARITY}]")
        need = max(1, (1 << self.arity) // 64)
        if self.words.shape != (need,) or self.words.dtype != np.uint64:
            raise DimensionError("packed table has the wrong shape")
        self.words.setflags(write=False)

    # construction
    @classmethod
    def from_values(cls, n: int, values) -> "BoolFun":
        v = np.asarray(values).astype(np.uint8).ravel()
        if v.size != 1 << n:
            raise DimensionError(f"need {1 << n} values, got {v.size}")
        if n < 6:
            v = np.concatenate([v, np.zeros(64 - v.size, np.uint8)])
        packed = np.packbits(v & 1, bitorder="little")
        return cls(n, packed.view("<u8").astype(np.uint64))

    @classmethod
    def from_fn(cls, n: int, fn: Callable[[np.ndarray], np.ndarray]) -> "BoolFun":
        """Build from a vectorised function of the input-index array."""
        return cls.from_values(n, fn(np.arange(1 << n, dtype=np.int64)))

    @classmethod
    def constant(cls, n: int, b: int) -> "BoolFun":
        return cls.from_values(n, np.full(1 << n, b & 1, np.uint8))

    @classmethod
    def from_hex(cls, n: int, text: str) -> "BoolFun":
        x = int(text, 16)
        if x >> (1 << n):
            raise DimensionError("hex table longer than 2^n bits")
        return cls.from_int(n, x)

    @classmethod
    def from_int(cls, n: int, x: int) -> "BoolFun":
        nbytes = max(8, (1 << n) // 8)
        raw = np.frombuffer(x.to_bytes(nbytes, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[: 1 << n]
        return cls.from_values(n, bits)

    # views
    @property
    def values(self) -> np.ndarray:
        cached = self.__dict__.get("_values")
        if cached is None:
            raw = self.words.astype("<u8").view(np.uint8)
            cached = np.unpackbits(raw, bitorder="little")[: 1 << self.arity]
            cached.setflags(write=False)
            object.__setattr__(self, "_values", cached)
        return cached

    def pm(self) -> np.ndarray:
        """+-1 view as float64."""
        return 1.0 - 2.0 * self.values

    def to_int(self) -> int:
        return int.from_bytes(self.words.astype("<u8").tobytes(), "little") & ((1 << (1 << self.arity)) - 1)

    def to_hex(self) -> str:
        width = max(1, (1 << self.arity) // 4)
        return format(self.to_int(), f"0{width}x")

    def __call__(self, x: int) -> int:
        return int(self.values[x])

    def __eq__(self, other):
        return isinstance(other, BoolFun) and self.arity == other.arity and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.arity, self.words.tobytes()))

    def __repr__(self):
        return f"BoolFun(n={self.arity}, table=0x{self.to_hex()})"

    def __invert__(self) -> "BoolFun":
        return BoolFun.from_values(self.arity, 1 - self.values)

    def __xor__(self, other: "BoolFun") -> "BoolFun":
        _same_arity(self, other)
        return BoolFun.from_values(self.arity, self.values ^ other.values)

    def is_constant(self) -> bool:
        v = self.values
        return bool(v.min() == v.max())

    def relevant_vars(self) -> list[int]:
        v = self.values
        idx = np.arange(v.size)
        return [i for i in range(self.arity) if np.any(v != v[idx ^ (1 << i)])]

    def weight_profile(self) -> np.ndarray | None:
        """Value per Hamming weight if f is symmetric, else None."""
        w = popcounts(self.arity)
        prof = np.full(self.arity + 1, -1, np.int64)
        v = self.values
        for h in range(self.arity + 1):
            vals = v[w == h]
            if vals.min() != vals.max():
                return None
            prof[h] = vals[0]
        return prof


def _same_arity(f: BoolFun, g: BoolFun):
    if f.arity != g.arity:
        raise DimensionError(f"arity mismatch {f.arity} vs {g.arity}")


@lru_cache(maxsize=None)
def _popcounts(n: int) -> np.ndarray:
    a = np.bitwise_count(np.arange(1 << n, dtype=np.uint64)).astype(np.int64)
    a.setflags(write=False)
    return a


def popcounts(n: int) -> np.ndarray:
    """Hamming weight of every index in [0, 2^n)."""
    return _popcounts(n)


def parity(n: int) -> BoolFun:
    return BoolFun.from_values(n, popcounts(n) & 1)


def and_fn(n: int) -> BoolFun:
    return BoolFun.from_values(n, popcounts(n) == n)


def or_fn(n: int) -> BoolFun:
    return BoolFun.from_values(n, popcounts(n) > 0)


def majority(n: int) -> BoolFun:
    return BoolFun.from_values(n, 2 * popcounts(n) > n)


def dictator(n: int, i: int) -> BoolFun:
    return BoolFun.from_fn(n, lambda x: (x >> i) & 1)


def threshold(n: int, k: int) -> BoolFun:
    return BoolFun.from_values(n, popcounts(n) >= k)


def symmetric(n: int, profile: Sequence[int]) -> BoolFun:
    prof = np.asarray(profile, dtype=np.uint8)
    return BoolFun.from_values(n, prof[popcounts(n)])


# -------------------------------------------------------------- Restriction
@dataclass(frozen=True)
class Restriction:
    """A word over {0,1,*}: `stars` marks free cells, `values` the fixed bits."""

    n: int
    stars: int
    values: int

    def __post_init__(self):
        full = (1 << self.n) - 1
        if self.stars & ~full or self.values & ~full:
            raise DimensionError("restriction masks exceed its length")
        if self.values & self.stars:
            object.__setattr__(self, "values", self.values & ~self.stars)

    @classmethod
    def all_star(cls, n: int) -> "Restriction":
        return cls(n, (1 << n) - 1, 0)

    @classmethod
    def from_cells(cls, cells: Iterable) -> "Restriction":
        cells = list(cells)
        stars = values = 0
        for i, c in enumerate(cells):
            if c in ("*", STAR, None):
                stars |= 1 << i
            elif int(c) == 1:
                values |= 1 << i
            elif int(c) != 0:
                raise ValueError(f"bad cell {c!r}")
        return cls(len(cells), stars, values)

    @classmethod
    def from_string(cls, s: str) -> "Restriction":
        return cls.from_cells("*" if ch in "*★" else int(ch) for ch in s)

    @classmethod
    def from_lambda(cls, n: int, live: int, z: int) -> "Restriction":
        """rho(Lambda, z): free on Lambda, z elsewhere."""
        return cls(n, live & ((1 << n) - 1), z & ~live & ((1 << n) - 1))

    @classmethod
    def fixing(cls, n: int, assignment: dict[int, int]) -> "Restriction":
        stars = (1 << n) - 1
        values = 0
        for var, b in assignment.items():
            stars &= ~(1 << var)
            values |= (b & 1) << var
        return cls(n, stars, values)

    @property
    def cells(self) -> tuple:
        return tuple(STAR if self.stars >> i & 1 else self.values >> i & 1 for i in range(self.n))

    @property
    def star_count(self) -> int:
        return self.stars.bit_count()

    @property
    def fixed(self) -> int:
        return ((1 << self.n) - 1) & ~self.stars

    def live(self) -> list[int]:
        return [i for i in range(self.n) if self.stars >> i & 1]

    def apply(self, x: int) -> int:
        """rho o x for a full assignment x."""
        return (x & self.stars) | self.values

    def ternary(self) -> int:
        t = 0
        for i in reversed(range(self.n)):
            t = 3 * t + (STAR if self.stars >> i & 1 else self.values >> i & 1)
        return t

    def __str__(self):
        return "".join("*" if c == STAR else str(c) for c in self.cells)


def compose(r1: Restriction, r2: Restriction) -> Restriction:
    """Cell i is r1's cell unless that is a star, then r2's."""
    if r1.n != r2.n:
        raise DimensionError("restriction lengths differ")
    return Restriction(r1.n, r1.stars & r2.stars, r1.values | (r2.values & r1.stars))


def restrict(f: BoolFun, rho: Restriction) -> BoolFun:
    """f|rho over the same ambient arity: x -> f(rho o x)."""
    if rho.n != f.arity:
        raise DimensionError(f"restriction length {rho.n} != arity {f.arity}")
    idx = (np.arange(1 << f.arity, dtype=np.int64) & rho.stars) | rho.values
    return BoolFun.from_values(f.arity, f.values[idx])


def restrict_compact(f: BoolFun, rho: Restriction) -> BoolFun:
    """f|rho as a function of its live variables only, in increasing order."""
    if rho.n != f.arity:
        raise DimensionError(f"restriction length {rho.n} != arity {f.arity}")
    return project(f, rho.live(), rho.values)


def project(f: BoolFun, keep: Sequence[int], base: int = 0) -> BoolFun:
    """Function of the variables `keep`, other inputs taken from `base`."""
    k = len(keep)
    local = np.arange(1 << k, dtype=np.int64)
    idx = np.full(1 << k, base, dtype=np.int64)
    for j, var in enumerate(keep):
        idx &= ~(1 << var)
        idx |= ((local >> j) & 1) << var
    return BoolFun.from_values(k, f.values[idx])


def sample_rp(n: int, p, rng: np.random.Generator) -> Restriction:
    """One draw from R_p: star w.p. p, else a uniform bit."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0,1]")
    u = rng.random(n)
    bits = rng.integers(0, 2, n)
    stars = values = 0
    for i in range(n):
        if u[i] < p:
            stars |= 1 << i
        elif bits[i]:
            values |= 1 << i
    return Restriction(n, stars, values)


def rp_weight(rho: Restriction, p: Fraction) -> Fraction:
    s = rho.star_count
    return p ** s * ((1 - p) / 2) ** (rho.n - s)


# ---------------------------------------------------------- decision trees
@dataclass(frozen=True)
class DTLeaf:
    value: int


@dataclass(frozen=True)
class DTNode:
    var: int
    lo: "DecisionTree"
    hi: "DecisionTree"


DecisionTree = DTLeaf | DTNode


def tree_depth(t: DecisionTree) -> int:
    if isinstance(t, DTLeaf):
        return 0
    return 1 + max(tree_depth(t.lo), tree_depth(t.hi))


def tree_eval(t: DecisionTree, x: int) -> int:
    while isinstance(t, DTNode):
        t = t.hi if x >> t.var & 1 else t.lo
    return t.value


def tree_to_boolfun(t: DecisionTree, n: int) -> BoolFun:
    xs = np.arange(1 << n, dtype=np.int64)
    out = np.zeros(1 << n, np.uint8)

    def walk(node, mask):
        if isinstance(node, DTLeaf):
            out[mask] = node.value
            return
        bit = ((xs >> node.var) & 1).astype(bool)
        walk(node.lo, mask & ~bit)
        walk(node.hi, mask & bit)

    walk(t, np.ones(1 << n, bool))
    return BoolFun.from_values(n, out)


def tree_vars(t: DecisionTree) -> set[int]:
    if isinstance(t, DTLeaf):
        return set()
    return {t.var} | tree_vars(t.lo) | tree_vars(t.hi)


def tree_paths(t: DecisionTree, prefix=()):
    """Yield (path, leaf value); a path is a tuple of (var, bit)."""
    if isinstance(t, DTLeaf):
        yield prefix, t.value
        return
    yield from tree_paths(t.lo, prefix + ((t.var, 0),))
    yield from tree_paths(t.hi, prefix + ((t.var, 1),))


def random_tree(n: int, depth: int, rng: np.random.Generator, leaf_stop: float = 0.0) -> DecisionTree:
    """Random tree of depth <= depth with no variable repeated on a path."""

    def grow(d, used):
        if d == 0 or len(used) == n or (used and rng.random() < leaf_stop):
            return DTLeaf(int(rng.integers(0, 2)))
        free = [i for i in range(n) if i not in used]
        v = int(free[rng.integers(0, len(free))])
        return DTNode(v, grow(d - 1, used | {v}), grow(d - 1, used | {v}))

    return grow(depth, frozenset())


# ------------------------------------------------------------- DT depth
def subcube_tables(f: BoolFun) -> tuple[np.ndarray, np.ndarray]:
    """(depth, value) for every subcube of f, indexed by ternary words.

    depth[t] is DT(f|rho) for the restriction rho with ternary index t; value
    is the constant (0/1) or 2 when f|rho is not constant.
    """
    if f.arity > DT_DEPTH_CAP:
        raise CapacityError(f"subcube tables need arity <= {DT_DEPTH_CAP}")
    return kernels.subcube_tables(f.values, f.arity)


def dt_depth(f: BoolFun) -> int:
    """Exact minimal decision-tree depth.

    Irrelevant variables are dropped first, so the cap applies to the number
    of variables f actually depends on.
    """
    rel = f.relevant_vars()
    if not rel:
        return 0
    if len(rel) > DT_DEPTH_CAP:
        raise CapacityError(f"{len(rel)} relevant variables exceed cap {DT_DEPTH_CAP}")
    g = project(f, rel)
    depth, _ = kernels.subcube_tables(g.values, g.arity)
    return int(depth[-1])


def optimal_tree(f: BoolFun) -> DecisionTree:
    """A minimum-depth decision tree (ties broken by lowest variable)."""
    rel = f.relevant_vars()
    if not rel:
        return DTLeaf(int(f.values[0]))
    if len(rel) > DT_DEPTH_CAP:
        raise CapacityError(f"{len(rel)} relevant variables exceed cap {DT_DEPTH_CAP}")
    g = project(f, rel)
    k = g.arity
    depth, val = kernels.subcube_tables(g.values, k)
    pow3 = [3 ** i for i in range(k)]

    def build(t):
        if val[t] != 2:
            return DTLeaf(int(val[t]))
        best = None
        for i in range(k):
            if (t // pow3[i]) % 3 == 2:
                c = max(depth[t - 2 * pow3[i]], depth[t - pow3[i]])
                if best is None or c < best[0]:
                    best = (c, i)
        i = best[1]
        return DTNode(rel[i], build(t - 2 * pow3[i]), build(t - pow3[i]))

    return build(3 ** k - 1)


# --------------------------------------------------------------- Fourier
@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    arity: int
    coeffs: np.ndarray

    def __getitem__(self, mask: int) -> float:
        return float(self.coeffs[mask])

    def levels(self) -> np.ndarray:
        return popcounts(self.arity)

    def support(self, tol: float = 1e-9) -> list[int]:
        return [int(s) for s in np.flatnonzero(np.abs(self.coeffs) > tol)]

    def degree(self, tol: float = 1e-9) -> int:
        sup = np.abs(self.coeffs) > tol
        return int(self.levels()[sup].max()) if sup.any() else 0


def wht(f: BoolFun) -> FourierSpectrum:
    """fhat(S) = E_x[(-1)^f(x) (-1)^{|x & S|}] via the fast transform."""
    a = f.pm()
    kernels.fwht(a)
    a /= float(1 << f.arity)
    return FourierSpectrum(f.arity, a)


def wht_raw(values: np.ndarray) -> np.ndarray:
    """Unnormalised transform of a real vector (returns a new array)."""
    a = np.array(values, dtype=np.float64)
    return kernels.fwht(a)


def _check_level(s: FourierSpectrum, level):
    if not 0 <= level <= s.arity + 1:
        raise ValueError(f"level {level} outside [0, {s.arity}]")


def tail_weight(s: FourierSpectrum, level) -> float:
    """W^{>=level}: squared mass on sets of size >= level (level may be real)."""
    if level < 0 or level > s.arity + 1:
        raise ValueError(f"level {level} outside [0, {s.arity}]")
    m = s.levels() >= level
    return float(np.sum(s.coeffs[m] ** 2))


def level_weights(s: FourierSpectrum) -> np.ndarray:
    return np.bincount(s.levels(), weights=s.coeffs ** 2, minlength=s.arity + 1)


def level_l1(s: FourierSpectrum, level: int) -> float:
    _check_level(s, level)
    return float(np.sum(np.abs(s.coeffs[s.levels() == level])))


def influence_k(s: FourierSpectrum, k: int) -> float:
    """Degree-k influence: sum_T binom(|T|, k) fhat(T)^2."""
    _check_level(s, k)
    comb = np.array([math.comb(l, k) for l in range(s.arity + 1)], dtype=np.float64)
    return float(np.dot(comb, level_weights(s)))


def correlation(f: BoolFun, g: BoolFun) -> float:
    """E_x[(-1)^{f(x)+g(x)}], exact, bit-parallel."""
    _same_arity(f, g)
    diff = int(np.bitwise_count(f.words ^ g.words).sum())
    return 1.0 - 2.0 * diff / (1 << f.arity)


def correlation_exact(f: BoolFun, g: BoolFun) -> Fraction:
    _same_arity(f, g)
    diff = int(np.bitwise_count(f.words ^ g.words).sum())
    return 1 - Fraction(2 * diff, 1 << f.arity)
