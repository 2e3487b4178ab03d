"""Fourier tails of GC0(k) circuits, derived spectral properties, sparse
approximation, the Kushilevitz-Mansour learner and symmetric correlation.

Sign convention: fhat(S) = E[(-1)^{f(x)} chi_S(x)], chi_S(x) = (-1)^{|x & S|}.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from . import kernels
from .boolfun import (
    BoolFun,
    CapacityError,
    FourierSpectrum,
    correlation,
    influence_k,
    level_l1,
    level_weights,
    restrict_compact,
    sample_rp,
    tail_weight,
    wht,
)
from .circuit import And, Circuit, Or, circuit_metrics, prune, to_boolfun
from .parallel import map_chunks

ESFT_CAP = 16
TAIL_CAP = 14
KM_CAP = 16
DEGREE_TOL = 1e-9
KM_ERROR_CONSTANT = 6  # E[(f-h)^2] <= 6 eps, see km_learn


class NotSymmetricError(ValueError):
    pass


def _need(n: int, cap: int):
    if n > cap:
        raise CapacityError(f"n={n} exceeds the cap {cap}")


# ---------------------------------------------------------------- ESFT
@dataclass(frozen=True)
class EsftParams:
    """Parameters of the tail bound: depth above the bottom layer, bottom
    width, k, and effective size."""

    d: int
    w: int
    k: int
    m: int
    padded: bool  # True if a trivial AND_1 layer was added under the circuit


def esft_params(C: Circuit) -> EsftParams:
    C = prune(C)
    met = circuit_metrics(C)
    bottom = [nd for nd in C.nodes
              if not any(isinstance(c, (int, np.integer)) for c in nd.children)]
    k = max(met.max_k, 0)
    if bottom and met.depth >= 2 and all(isinstance(nd.gate, (And, Or)) for nd in bottom):
        return EsftParams(met.depth - 1, max(met.bottom_width, 1), k, met.effective_size, False)
    # AND_1 under every gate: all original gates now sit at height >= 2
    return EsftParams(max(met.depth, 1), 1, k, met.gates, True)


def esft_bound(ell: float, d: int, w: int, k: int, m: int) -> float:
    """4^d 2^{-ell/(80 w (128(k+log m))^{d-1}) + k}; d = 1 is the base case
    2 * 2^{-ell/80w + k}."""
    if d <= 1:
        return 2.0 * 2.0 ** (-ell / (80 * w) + k)
    q = max(k + math.log2(max(m, 1)), 1.0)
    return 4.0 ** d * 2.0 ** (-ell / (80 * w * (128 * q) ** (d - 1)) + k)


@dataclass(frozen=True)
class TailRow:
    ell: int
    measured: float
    bound: float
    vacuous: bool

    @property
    def ok(self) -> bool:
        return self.vacuous or self.measured <= self.bound + 1e-12


@dataclass
class TailReport:
    n: int
    params: EsftParams
    rows: list[TailRow]
    total: float  # Parseval sum, 1 up to rounding

    def violations(self) -> list[TailRow]:
        return [r for r in self.rows if not r.ok]

    def monotone(self) -> bool:
        ms = [r.measured for r in sorted(self.rows, key=lambda r: r.ell)]
        return all(a >= b - 1e-12 for a, b in zip(ms, ms[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf)
        wr.writerow(["ell", "measured", "bound", "vacuous", "d", "w", "k", "m"])
        p = self.params
        for r in self.rows:
            wr.writerow([r.ell, repr(r.measured), repr(r.bound), int(r.vacuous), p.d, p.w, p.k, p.m])
        return buf.getvalue()

    def to_dict(self) -> dict:
        p = self.params
        return {
            "n": self.n,
            "params": {"d": p.d, "w": p.w, "k": p.k, "m": p.m, "padded": p.padded},
            "bound_formula": "4**d * 2**(-ell/(80*w*(128*(k+log2(m)))**(d-1)) + k)",
            "rows": [{"ell": r.ell, "measured": r.measured, "bound": r.bound, "vacuous": r.vacuous}
                     for r in self.rows],
        }


def esft_report(C: Circuit, ell_grid=None) -> TailReport:
    _need(C.n, ESFT_CAP)
    spec = wht(to_boolfun(C))
    P = esft_params(C)
    grid = range(C.n + 2) if ell_grid is None else ell_grid
    rows = []
    for ell in grid:
        b = esft_bound(ell, P.d, P.w, P.k, P.m)
        rows.append(TailRow(int(ell), tail_weight(spec, ell), b, b >= 1.0))
    return TailReport(C.n, P, rows, float(np.sum(spec.coeffs ** 2)))


# ------------------------------------------------ restriction tail bound
def restricted_tail_exact(spec: FourierSpectrum, p: float, level: int) -> float:
    """E_{rho~R_p} W^{>=level}[f|rho] = sum_S fhat(S)^2 Pr[Bin(|S|,p) >= level]."""
    lw = level_weights(spec)
    sizes = np.arange(spec.arity + 1)
    survive = binom.sf(level - 1, sizes, p) if level > 0 else np.ones(sizes.size)
    return float(np.dot(lw, survive))


def _tail_chunk(f: BoolFun, p: float, level: int, size: int, rng):
    s = s2 = 0.0
    for _ in range(size):
        rho = sample_rp(f.arity, p, rng)
        g = restrict_compact(f, rho)
        v = tail_weight(wht(g), level) if level <= g.arity + 1 else 0.0
        s += v
        s2 += v * v
    return s, s2


def restriction_tail_check(f: BoolFun, p: float, ell: int, trials: int = 2000, seed: int = 0) -> dict:
    """W^{>=ell}[f] <= 2 E_rho W^{>=floor(ell p)}[f|rho].

    The level is floor(ell*p): with the real level ell*p the inequality fails
    (PAR_3, p = 0.4, ell = 3 gives 1 > 0.704).
    """
    _need(f.arity, TAIL_CAP)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0,1]")
    spec = wht(f)
    level = math.floor(ell * p + 1e-12)
    lhs = tail_weight(spec, ell)
    exact = restricted_tail_exact(spec, p, level)
    parts = map_chunks(_tail_chunk, (f, p, level), trials, seed)
    s = sum(a for a, _ in parts)
    s2 = sum(b for _, b in parts)
    mean = s / trials
    var = max(s2 / trials - mean * mean, 0.0)
    sigma = math.sqrt(var / trials)
    return {
        "n": f.arity, "p": p, "ell": ell, "level": level, "trials": trials, "seed": seed,
        "lhs": lhs,
        "rhs_exact": 2 * exact,
        "rhs_estimate": 2 * mean,
        "sigma": 2 * sigma,
        "ci": (2 * (mean - 3 * sigma), 2 * (mean + 3 * sigma)),
        "holds_exact": lhs <= 2 * exact + 1e-12,
        "holds": lhs <= 2 * (mean + 3 * sigma) + 1e-12,
    }


# ------------------------------------------------------ property suite
@dataclass
class SparseApprox:
    coeffs: dict[int, float]
    residual: float
    eps: float
    cut: int = 0           # sets of size < cut are eligible
    threshold: float = 0.0

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def to_json(self) -> str:
        return json.dumps({"eps": self.eps, "residual": self.residual, "cut": self.cut,
                           "threshold": self.threshold, "coefficients": sparse_list(self.coeffs)})


def sparse_list(coeffs: dict[int, float]) -> list[dict]:
    return [{"mask": int(s), "value": float(v)} for s, v in sorted(coeffs.items())]


def sparse_from_list(items) -> dict[int, float]:
    return {int(d["mask"]): float(d["value"]) for d in items}


def fmc_set(spec: FourierSpectrum, eps: float) -> SparseApprox:
    """Sets below the level where the tail drops to eps/2, with magnitude at
    least (eps/2) / (their L1 mass).  Captures >= 1 - eps by construction."""
    n = spec.arity
    cut = next(w for w in range(n + 2) if tail_weight(spec, w) <= eps / 2)
    low = spec.levels() < cut
    l1 = float(np.sum(np.abs(spec.coeffs[low])))
    thr = (eps / 2) / l1 if l1 > 0 else 0.0
    keep = np.flatnonzero(low & (np.abs(spec.coeffs) >= thr) & (np.abs(spec.coeffs) > 0))
    coeffs = {int(s): float(spec.coeffs[s]) for s in keep}
    total = float(np.sum(spec.coeffs ** 2))
    residual = total - sum(v * v for v in coeffs.values())
    return SparseApprox(coeffs, max(residual, 0.0), eps, cut, thr)


def greedy_sparse(spec: FourierSpectrum, eps: float) -> SparseApprox:
    """Fewest coefficients capturing 1 - eps (largest magnitudes first)."""
    order = np.argsort(-np.abs(spec.coeffs), kind="stable")
    sq = spec.coeffs[order] ** 2
    need = float(np.sum(spec.coeffs ** 2)) - eps
    cum = np.cumsum(sq)
    cnt = int(np.searchsorted(cum, need - 1e-12)) + 1 if need > 0 else 0
    cnt = min(cnt, order.size)
    coeffs = {int(s): float(spec.coeffs[s]) for s in order[:cnt]}
    return SparseApprox(coeffs, max(float(np.sum(sq[cnt:])), 0.0), eps)


def _degree_chunk(f: BoolFun, p: float, size: int, rng):
    hist = np.zeros(f.arity + 1, np.int64)
    for _ in range(size):
        g = restrict_compact(f, sample_rp(f.arity, p, rng))
        hist[wht(g).degree(DEGREE_TOL)] += 1
    return hist


def degree_tail(f: BoolFun, p: float, trials: int, seed: int = 0) -> np.ndarray:
    """Pr_rho[deg(f|rho) >= ell] for ell = 0..n, by Monte Carlo."""
    hist = sum(map_chunks(_degree_chunk, (f, p), trials, seed))
    return np.cumsum(hist[::-1])[::-1] / trials


def property_suite(C: Circuit, p_grid=(0.1, 0.25, 0.5), eps_grid=(0.5, 0.25, 0.1),
                   trials: int = 500, seed: int = 0) -> dict:
    """Measured curves next to the symbolic forms with unit hidden constants.

    t = (k + log2 m)^{d-1} with m the gate count and d the circuit depth.
    Nothing here is asserted against the symbolic forms: their constants
    are unknown, so the numbers are regression baselines.
    """
    _need(C.n, TAIL_CAP)
    f = to_boolfun(C)
    spec = wht(f)
    met = circuit_metrics(C)
    n, k, d = C.n, max(met.max_k, 1), max(met.depth, 1)
    t = max(k + math.log2(max(met.gates, 1)), 1.0) ** (d - 1)
    P = esft_params(C)
    levels = list(range(n + 1))

    esft = []
    for ell in levels:
        item1 = min(1.0, 4.0 ** P.d * 2.0 ** (-ell / (80 * (128 * max(P.k + math.log2(max(P.m, 1)), 1.0)) ** (P.d - 1)) + P.k))
        esft.append({"ell": ell, "measured": tail_weight(spec, ell),
                     "item1": item1, "rooted": item1 ** (1 / k)})

    slpt = []
    for i, p in enumerate(p_grid):
        tail = degree_tail(f, p, trials, seed + i)
        for ell in levels:
            slpt.append({"p": p, "ell": ell, "measured": float(tail[ell]),
                         "symbolic": min(1.0, (p * k * t) ** ell)})

    infk = [{"ell": ell, "measured": influence_k(spec, ell), "symbolic": (k * t) ** ell} for ell in levels]
    l1 = [{"ell": ell, "measured": level_l1(spec, ell), "symbolic": (k * t) ** ell} for ell in levels]

    fmc = []
    for eps in eps_grid:
        A = fmc_set(spec, eps)
        G = greedy_sparse(spec, eps)
        fmc.append({
            "eps": eps, "size": A.size, "residual": A.residual, "cut": A.cut,
            "captures": A.residual <= eps + 1e-12, "greedy_size": G.size,
            "symbolic_log2_size": (k + math.log2(1 / eps)) * t * max(math.log2(t), 1.0),
        })
    return {"n": n, "k": k, "d": d, "t": t, "esft": esft, "slpt": slpt,
            "infk": infk, "l1": l1, "fmc": fmc, "trials": trials, "seed": seed}


# ------------------------------------------------------------ KM learner
@dataclass
class KMResult:
    n: int
    coeffs: dict[int, float]
    hypothesis: BoolFun
    exhausted: bool
    theta: float
    samples: int
    queries: int
    constant: int = KM_ERROR_CONSTANT

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "coefficients": sparse_list(self.coeffs),
                           "exhausted": self.exhausted, "theta": self.theta,
                           "samples": self.samples, "queries": self.queries,
                           "error_constant": self.constant})


def _pm_table(oracle, n=None) -> tuple[int, np.ndarray]:
    if isinstance(oracle, BoolFun):
        n, vals = oracle.arity, oracle.values
    else:
        if n is None:
            raise ValueError("callable oracles need n")
        vals = np.asarray(oracle(np.arange(1 << n, dtype=np.int64))) & 1
    return n, (1 - 2 * vals.astype(np.int64))


def km_learn(oracle, budget: int, eps: float, delta: float, rng: np.random.Generator,
             n: int | None = None) -> KMResult:
    """Kushilevitz-Mansour with prefix buckets over the low variables.

    theta = eps / (2 budget) is the squared-coefficient threshold; each
    estimate uses ceil(8 ln(4 budget 2n / delta) / theta^2) samples so it is
    within theta/2 with high probability.  Buckets with estimated weight
    >= theta/2 are expanded; at most ceil(4/theta) stay alive per level (the
    rest are dropped and the result is flagged).  If f is eps/2-close to a
    budget-sparse polynomial, the kept coefficients miss at most eps of
    squared mass, estimation adds at most theta, and taking signs costs a
    factor 4, so E[(f-h)^2] <= 6 eps.
    """
    n, table = _pm_table(oracle, n)
    _need(n, KM_CAP)
    theta = eps / (2 * budget)
    N = math.ceil(8 * math.log(4 * budget * 2 * max(n, 1) / delta) / theta ** 2)
    cap = math.ceil(4 / theta)
    queries = 0
    exhausted = False
    alive = [0]  # prefixes over variables 0..j-1
    for j in range(1, n + 1):
        scored = []
        for alpha in alive:
            for bit in (0, 1):
                a = alpha | (bit << (j - 1))
                xs = rng.integers(0, 1 << (n - j), N, dtype=np.int64)
                ys = rng.integers(0, 1 << j, N, dtype=np.int64)
                zs = rng.integers(0, 1 << j, N, dtype=np.int64)
                est = kernels.bucket_weight(table, j, a, xs, ys, zs)
                queries += 2 * N
                if est >= theta / 2:
                    scored.append((est, a))
        if len(scored) > cap:
            exhausted = True
            scored.sort(key=lambda e: -e[0])
            scored = scored[:cap]
        alive = [a for _, a in scored]
    coeffs = {}
    for S in alive:
        xs = rng.integers(0, 1 << n, N, dtype=np.int64)
        chi = 1 - 2 * (np.bitwise_count(xs & S) & 1).astype(np.int64)
        coeffs[S] = float(np.mean(table[xs] * chi))
        queries += N
    hyp = sparse_sign(n, coeffs)
    return KMResult(n, coeffs, hyp, exhausted, theta, N, queries)


def sparse_eval(n: int, coeffs: dict[int, float]) -> np.ndarray:
    xs = np.arange(1 << n, dtype=np.int64)
    g = np.zeros(xs.size)
    for S, v in coeffs.items():
        g += v * (1 - 2 * (np.bitwise_count(xs & S) & 1).astype(np.int64))
    return g


def sparse_sign(n: int, coeffs: dict[int, float]) -> BoolFun:
    """Boolean h with (-1)^h = sign(g); ties go to +1 (bit 0)."""
    return BoolFun.from_values(n, (sparse_eval(n, coeffs) < 0).astype(np.uint8))


def squared_error(f: BoolFun, h: BoolFun) -> float:
    """E[(F-H)^2] for the +-1 forms: 4 Pr[f != h]."""
    return 2.0 * (1.0 - correlation(f, h))


# -------------------------------------------------- symmetric correlation
def check_symmetric(g: BoolFun) -> np.ndarray:
    prof = g.weight_profile()
    if prof is None:
        raise NotSymmetricError("g depends on more than the Hamming weight")
    return prof


def symmetric_level_check(spec: FourierSpectrum, tol: float = 1e-9) -> bool:
    """Same |ghat| across each level and |ghat(S)| <= binom(n,|S|)^{-1/2}."""
    lv = spec.levels()
    n = spec.arity
    for ell in range(n + 1):
        a = np.abs(spec.coeffs[lv == ell])
        if a.max() - a.min() > tol or a.max() > math.comb(n, ell) ** -0.5 + tol:
            return False
    return True


def symmetric_correlation(C: Circuit, g: BoolFun) -> dict:
    """Exact correlation of C with a symmetric g and the three-term bound

        |ghat(empty)| + sum_{1<=l<l'} binom(n,l)^{-1/2} L1_l(f) + sqrt(W^{>=l'}[f] W^{>=l'}[g]),

    with l' chosen to minimise it.  The high term is also reported with the
    tail of f replaced by its ESFT bound.
    """
    _need(C.n, ESFT_CAP)
    if g.arity != C.n:
        raise ValueError("g and C have different arity")
    check_symmetric(g)
    f = to_boolfun(C)
    F, Gs = wht(f), wht(g)
    n = C.n
    P = esft_params(C)
    g0 = abs(Gs[0])
    decay = [0.0] + [math.comb(n, l) ** -0.5 * level_l1(F, l) for l in range(1, n + 1)]
    best = None
    for lp in range(1, n + 2):
        low = sum(decay[1:lp])
        high = math.sqrt(tail_weight(F, lp) * tail_weight(Gs, lp))
        high_thm = math.sqrt(min(1.0, esft_bound(lp, P.d, P.w, P.k, P.m)) * tail_weight(Gs, lp))
        row = {"ell_prime": lp, "g_empty": g0, "low": low, "high": high,
               "high_theorem": high_thm, "bound": g0 + low + high,
               "bound_theorem": g0 + low + high_thm}
        if best is None or row["bound"] < best["bound"]:
            best = row
    met = circuit_metrics(C)
    q = max(met.max_k, 1) * max(met.max_k + math.log2(max(met.gates, 1)), 1.0) ** (max(met.depth, 1) - 1)
    return {
        "corr": correlation(f, g),
        "bound_terms": best,
        "symbolic": g0 + q / math.sqrt(n),
        "symbolic_formula": "|ghat(0)| + k*(k+log2 m)**(d-1)/sqrt(n)",
        "level_identity": symmetric_level_check(Gs),
    }


# --------------------------------------------------- parity correlation
def parity_correlation_bound(n: int, k: int, d: int, m: int) -> float:
    """2 * 2^{-pn/(4(2^d-1)) + k} + 2^{-pn/8}, p = 1/(40 (128(k+log m))^{d-1})."""
    q = max(k + math.log2(max(m, 1)), 1.0)
    p = 1.0 / (40 * (128 * q) ** (d - 1))
    return 2.0 * 2.0 ** (-p * n / (4 * (2 ** d - 1)) + k) + 2.0 ** (-p * n / 8)
