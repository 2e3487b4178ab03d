"""Explicit circuits: parity in G(k) form, parity trees, correlation
circuits, and a seeded random corpus for the experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .boolfun import BoolFun, CapacityError, popcounts, random_tree
from .circuit import (
    ANDLIKE,
    ORLIKE,
    TABLE_FANIN_CAP,
    And,
    Circuit,
    KAnd,
    KOr,
    Lit,
    Ltf,
    Node,
    Or,
    SymmetricG,
    TableG,
    digest,
    ltf_balance,
    prune,
    validate_gk,
    with_declared,
)

CONSTRUCTION_CAP = 20


def parity_gate(fan: int) -> SymmetricG:
    """PAR on `fan` inputs as an orlike G(fan) gate."""
    return SymmetricG(ORLIKE, fan, tuple(c % 2 for c in range(fan)), fan % 2)


def low_weight_parity_gate(k: int) -> SymmetricG:
    """Parity of the count while fewer than k inputs are one; once k are one,
    the value k mod 2 (inputs never exceed k ones in the block constructions)."""
    return SymmetricG(ORLIKE, k, tuple(c % 2 for c in range(k)), k % 2)


def truncated_parity_gate(k: int) -> SymmetricG:
    """Parity if at most k inputs are one, else 0 (a G(k+1) gate)."""
    return SymmetricG(ORLIKE, k + 1, tuple(c % 2 for c in range(k + 1)), 0)


def split_blocks(n: int, parts: int) -> list[list[int]]:
    """Split range(n) into `parts` contiguous blocks whose sizes differ by <= 1."""
    parts = max(1, min(parts, n))
    q, r = divmod(n, parts)
    out, start = [], 0
    for b in range(parts):
        size = q + (b < r)
        out.append(list(range(start, start + size)))
        start += size
    return out


def chunk(seq: Sequence, size: int) -> list[list]:
    """Consecutive chunks of at most `size` elements, sizes as even as possible."""
    parts = math.ceil(len(seq) / size)
    idx = split_blocks(len(seq), parts)
    return [[seq[i] for i in b] for b in idx]


class _Builder:
    """Accumulates nodes, reusing identical (gate, children) pairs."""

    def __init__(self, n: int):
        self.n = n
        self.nodes: list[Node] = []
        self.index: dict = {}
        self.memo: dict = {}

    def add(self, gate, children) -> int:
        key = (gate, tuple(children))
        if key not in self.index:
            self.nodes.append(Node(gate, tuple(children)))
            self.index[key] = len(self.nodes) - 1
        return self.index[key]

    def parity_terms(self, vars_: Sequence[int], target: int, top: str, fan: int) -> list:
        """Children whose OR (top='or') or AND (top='and') is [PAR(vars) == target].

        Exactly one child is true (resp. false) when the condition holds
        (fails), so the terms are unambiguous.  Blocks larger than `fan` are
        split into at most `fan` groups and handled one level down with the
        opposite top, so adjacent AND/OR layers merge.
        """
        key = (tuple(vars_), target, top, fan)
        if key in self.memo:
            return self.memo[key]
        out = []
        if len(vars_) <= fan:
            for a in product((0, 1), repeat=len(vars_)):
                odd = sum(a) % 2
                if top == "or" and odd == target:
                    lits = [Lit(v, neg=not b) for v, b in zip(vars_, a)]
                    out.append(lits[0] if len(lits) == 1 else self.add(And(), lits))
                elif top == "and" and odd != target:
                    lits = [Lit(v, neg=bool(b)) for v, b in zip(vars_, a)]
                    out.append(lits[0] if len(lits) == 1 else self.add(Or(), lits))
        else:
            groups = _regroup(vars_, fan)
            for a in product((0, 1), repeat=len(groups)):
                odd = sum(a) % 2
                if top == "or" and odd == target:
                    kids = [c for g, b in zip(groups, a) for c in self.parity_terms(g, b, "and", fan)]
                    out.append(self.add(And(), kids))
                elif top == "and" and odd != target:
                    kids = [c for g, b in zip(groups, a) for c in self.parity_terms(g, 1 - b, "or", fan)]
                    out.append(self.add(Or(), kids))
        self.memo[key] = out
        return out

    def circuit(self, out, **declared) -> Circuit:
        return with_declared(Circuit(self.n, tuple(self.nodes), out), **declared)


def _regroup(vars_: Sequence[int], fan: int) -> list[list[int]]:
    """Split into `fan` groups whose sizes are equal powers-of-fan as far as possible."""
    levels = 1
    while fan ** levels < len(vars_):
        levels += 1
    sub = fan ** (levels - 1)
    return chunk(list(vars_), sub)


def _check_cap(n: int):
    if n > CONSTRUCTION_CAP:
        raise CapacityError(f"constructions are capped at n <= {CONSTRUCTION_CAP}")


def parity_as_gk_andw(k: int, w: int) -> Circuit:
    """PAR_{kw} as a G(k) gate over the odd-weight AND_w terms of k blocks."""
    _check_cap(k * w)
    b = _Builder(k * w)
    terms = []
    for blk in range(k):
        terms += b.parity_terms(list(range(blk * w, (blk + 1) * w)), 1, "or", w)
    out = b.add(low_weight_parity_gate(k), terms)
    return b.circuit(out, construction="parity_as_gk_andw", k_blocks=k, w_block=w)


def block_parity_circuit(blocks: Sequence[Sequence[int]], n: int, top, fan: int, **declared) -> Circuit:
    b = _Builder(n)
    terms = []
    for blk in blocks:
        terms += b.parity_terms(list(blk), 1, "or", fan)
    out = b.add(top, terms)
    return b.circuit(out, **declared)


def block_fan(block_size: int, levels: int) -> int:
    """Smallest fan-in M with M^levels >= block_size."""
    M = 1
    while M ** levels < block_size:
        M += 1
    return max(M, 1)


def tight_parity_circuit(n: int, k: int, d: int) -> Circuit:
    """PAR_n as a depth-d GC0(k) circuit: k blocks, each an alternating
    DNF/CNF parity of depth d-1 whose top OR merges into the G(k) gate."""
    _check_cap(n)
    if d < 2:
        raise ValueError("need d >= 2")
    blocks = split_blocks(n, k)
    size = max(len(b) for b in blocks)
    fan = block_fan(size, d - 1)
    k_eff = len(blocks)
    return block_parity_circuit(blocks, n, low_weight_parity_gate(k_eff), fan,
                                construction="tight_parity", block_fan=fan)


def tight_parity_size_exponent(n: int, k: int, d: int) -> float:
    """(n/k)^{1/(d-1)}: log2 of the size up to the constant in the exponent."""
    return (n / k) ** (1 / (d - 1))


def remark_parity_preset(n: int, t: int) -> tuple[Circuit, dict]:
    """PAR_n over k = t log2(n/t) blocks, and the two failure bounds compared
    in the text: classical (5pn)^t vs (20pw)^t 2^k with w = ceil(n/k)."""
    k = max(1, min(n, math.ceil(t * math.log2(max(n / t, 2)))))
    blocks = split_blocks(n, k)
    w = max(len(b) for b in blocks)
    C = block_parity_circuit(blocks, n, low_weight_parity_gate(len(blocks)), w,
                             construction="remark_preset", t=t)
    info = {
        "k": len(blocks),
        "w": w,
        "classical_bound": "(5*p*n)**t",
        "general_bound": "(20*p*w)**t * 2**k",
    }
    return C, info


def parity_tree(n: int, d: int) -> Circuit:
    """Depth-d tree of PAR_b gates, b the least integer with b^d >= n.

    Uneven groups stand in for padding with constant-zero inputs.
    """
    b = block_fan(n, d)
    nodes: list[Node] = []
    level: list = [Lit(i) for i in range(n)]
    for _ in range(d):
        groups = chunk(level, b)
        nxt = []
        for g in groups:
            nodes.append(Node(parity_gate(len(g)), tuple(g)))
            nxt.append(len(nodes) - 1)
        level = nxt
    return with_declared(Circuit(n, tuple(nodes), level[0]), construction="parity_tree", arity=b)


@dataclass(frozen=True)
class CorrelationParams:
    n: int
    k: int
    d: int
    m: int
    M: int
    B: int
    c_d: float


def correlation_params(n: int, k: int, d: int, m: int, c_d: float = 1.0) -> CorrelationParams:
    M = max(k, math.ceil(c_d * math.log2(m))) if m > 1 else k
    M = max(M, 1)
    B = math.ceil(n / M ** (d - 1))
    return CorrelationParams(n, k, d, m, M, B, c_d)


def correlation_circuit(n: int, k: int, d: int, m: int, c_d: float = 1.0) -> Circuit:
    """Blocks of size M^{d-1}, each an alternating parity circuit, under the
    gate 'parity if at most k inputs are one, else 0'."""
    _check_cap(n)
    P = correlation_params(n, k, d, m, c_d)
    blocks = split_blocks(n, P.B)
    fan = block_fan(max(len(b) for b in blocks), max(d - 1, 1))
    top = truncated_parity_gate(k)
    return block_parity_circuit(blocks, n, top, fan, construction="correlation", M=P.M, B=P.B)


def correlation_closed_form(B: int, k: int) -> Fraction:
    """sum_{j<=k} P(j) + sum_{j>k} (-1)^j P(j), P(j) = C(B,j) 2^-B."""
    tot = Fraction(0)
    for j in range(B + 1):
        pj = Fraction(math.comb(B, j), 2 ** B)
        tot += pj if j <= k else (-1) ** j * pj
    return tot


def correlation_triangle_bound(B: int, k: int) -> Fraction:
    lo = sum(Fraction(math.comb(B, i), 2 ** B) for i in range(min(k, B) + 1))
    hi = sum(Fraction(math.comb(B, j), 2 ** B) for j in range(k + 1, B + 1))
    return lo - hi


# ------------------------------------------------------------ random corpus
def random_gk_gate(side: str, k: int, fan: int, rng: np.random.Generator):
    """A random gate that is constant once k ones (orlike) / zeros appear."""
    choice = int(rng.integers(0, 4))
    if choice == 0:
        return KOr(k) if side == ORLIKE else KAnd(k)
    if choice == 1 and fan <= 10:
        w = popcounts(fan)
        c = w if side == ORLIKE else fan - w
        const = int(rng.integers(0, 2))
        vals = np.where(c >= k, const, rng.integers(0, 2, 1 << fan)).astype(np.uint8)
        return TableG(side, k, BoolFun.from_values(fan, vals))
    if choice == 2 and fan <= TABLE_FANIN_CAP:
        for _ in range(20):
            wts = tuple(int(x) for x in rng.integers(1, 5, fan))
            theta = int(rng.integers(0, sum(wts) + 1)) * (1 if side == ORLIKE else -1)
            if ltf_balance(wts, theta) <= k:
                g = Ltf(wts, theta)
                if validate_gk(g, k, fan) == side:
                    return g
    low = tuple(int(x) for x in rng.integers(0, 2, k))
    return SymmetricG(side, k, low, int(rng.integers(0, 2)))


def _random_clause(n: int, w: int, rng) -> list[Lit]:
    vs = rng.choice(n, size=min(w, n), replace=False)
    return [Lit(int(v), bool(rng.integers(0, 2))) for v in vs]


def random_depth_two(n: int, m: int, k: int, w: int, rng, side: str = ORLIKE) -> Circuit:
    """G(k) o AND_w (orlike) or G(k) o OR_w (andlike) with m clauses."""
    bottom = And if side == ORLIKE else Or
    nodes = [Node(bottom(), tuple(_random_clause(n, int(rng.integers(1, w + 1)), rng))) for _ in range(m)]
    nodes.append(Node(random_gk_gate(side, k, m, rng), tuple(range(m))))
    return with_declared(Circuit(n, tuple(nodes), m), k=k, w=w)


def random_layered(n: int, d: int, width: int, fan: int, k: int, rng) -> Circuit:
    """Layered depth-d GC0(k) circuit: `width` gates per layer, one output."""
    nodes: list[Node] = []
    prev: list = [Lit(i, neg) for i in range(n) for neg in (False, True)]
    for layer in range(d):
        count = 1 if layer == d - 1 else width
        cur = []
        for _ in range(count):
            f = min(fan, len(prev))
            pick = rng.choice(len(prev), size=f, replace=False)
            side = ORLIKE if rng.integers(0, 2) else ANDLIKE
            g = random_gk_gate(side, int(rng.integers(1, k + 1)), f, rng)
            nodes.append(Node(g, tuple(prev[int(i)] for i in pick)))
            cur.append(len(nodes) - 1)
        prev = cur
    C = Circuit(n, tuple(nodes), len(nodes) - 1)
    # lower gates nobody reads are dropped
    return with_declared(prune(C), k=k)


@dataclass(frozen=True)
class GkOverTrees:
    n: int
    gate: object
    trees: tuple
    k: int
    w: int


def random_gk_over_trees(n: int, m: int, k: int, w: int, rng, side: str = ORLIKE) -> GkOverTrees:
    trees = tuple(random_tree(n, w, rng, leaf_stop=0.2) for _ in range(m))
    return GkOverTrees(n, random_gk_gate(side, k, m, rng), trees, k, w)


def random_gc0_corpus(params: dict, rng: np.random.Generator) -> list:
    """Seeded instances.  params: kind in {gk_andw, andlike_or, layered,
    gk_dt}, count, and the sizes n, m, k, w, d (width/fan for layered)."""
    kind = params.get("kind", "gk_andw")
    count = int(params.get("count", 10))
    n = int(params["n"])
    k = int(params.get("k", 2))
    w = int(params.get("w", 2))
    m = int(params.get("m", 6))
    out = []
    for _ in range(count):
        if kind == "gk_andw":
            out.append(random_depth_two(n, m, k, w, rng, ORLIKE))
        elif kind == "andlike_or":
            out.append(random_depth_two(n, m, k, w, rng, ANDLIKE))
        elif kind == "layered":
            out.append(random_layered(n, int(params.get("d", 3)), int(params.get("width", 4)),
                                      int(params.get("fan", 3)), k, rng))
        elif kind == "gk_dt":
            out.append(random_gk_over_trees(n, m, k, w, rng))
        else:
            raise ValueError(f"unknown corpus kind {kind}")
    return out


def corpus_digests(corpus: Sequence) -> list[str]:
    return [digest(C) if isinstance(C, Circuit) else repr(C) for C in corpus]
