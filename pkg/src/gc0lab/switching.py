"""Canonical decision trees, witnesses and switching experiments for G(k) o AND_w.

Everything runs on `DepthTwo`, an orlike G(k) gate over AND clauses.  An
andlike gate over OR clauses is turned into that form by De Morgan:
F = not F', where F' has negated literals and top gate y -> not G(not y).
The flag `dual` remembers the final negation.

Partial assignments are pairs of ints (stars, values) over n variables, the
same encoding as `boolfun.Restriction`.  Replies and advice strings are
stored as tuples of bits; a block of a clause is a tuple of positions
(0-based) into that clause's literal list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import boolfun as bf
from .boolfun import BoolFun, CapacityError, DimensionError, Restriction
from .circuit import (
    ANDLIKE,
    ORLIKE,
    And,
    Circuit,
    Const,
    Lit,
    Or,
    gate_apply,
    gate_k,
)
from .parallel import map_chunks
from .stats import wilson

CDT_LIVE_CAP = 26
ERROR = None


class StructureError(ValueError):
    """Circuit is not a G(k) gate over AND (or OR) clauses."""


# ------------------------------------------------------------- depth two
@dataclass(frozen=True)
class Clause:
    lits: tuple  # Lit, distinct variables

    @cached_property
    def pos(self) -> int:
        return sum(1 << l.var for l in self.lits if not l.neg)

    @cached_property
    def neg(self) -> int:
        return sum(1 << l.var for l in self.lits if l.neg)

    @cached_property
    def vars(self) -> int:
        return self.pos | self.neg

    @cached_property
    def satisfying(self) -> int:
        """Values (on self.vars) that make every literal true."""
        return self.pos

    def status(self, stars: int, values: int) -> int:
        """0 if fixed false, 1 if fixed true, 2 if still open."""
        fixed = ~stars
        if (self.pos & fixed & ~values) or (self.neg & fixed & values):
            return 0
        return 2 if self.vars & stars else 1

    def value(self, x: int) -> int:
        return int((x & self.pos) == self.pos and not (x & self.neg))

    def positions(self, mask: int) -> tuple:
        return tuple(i for i, l in enumerate(self.lits) if mask >> l.var & 1)

    def block_vars(self, block: Sequence[int]) -> list[int]:
        return [self.lits[i].var for i in block]


def _make_clause(lits) -> Clause | None:
    """Deduplicate; None for a contradictory clause (constant 0)."""
    seen: dict = {}
    for l in lits:
        if l.var in seen and seen[l.var] != l.neg:
            return None
        seen[l.var] = l.neg
    out = []
    for l in lits:
        if l.var in seen:
            out.append(Lit(l.var, seen.pop(l.var)))
    return Clause(tuple(out))


@dataclass(frozen=True, eq=False)
class DepthTwo:
    """Orlike top gate over AND clauses; output is top(clauses) xor dual.

    When `dual` is set the stored `gate` is the original andlike gate and the
    orlike top is y -> not gate(not y).  `k` is the orlike threshold.
    """

    n: int
    gate: object
    k: int
    clauses: tuple
    dual: bool = False

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def width(self) -> int:
        return max((len(c.lits) for c in self.clauses), default=0)

    def top(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=np.uint8)
        if ys.ndim == 1:
            ys = ys.reshape(self.m, -1)
        if self.dual:
            return 1 - gate_apply(self.gate, 1 - ys)
        return gate_apply(self.gate, ys)

    def top_bit(self, bits) -> int:
        return int(self.top(np.array(bits, dtype=np.uint8).reshape(self.m, 1))[0])

    @cached_property
    def saturated(self) -> int:
        """Output of the orlike top once k clauses are true (before dual)."""
        return self.top_bit([1] * self.m)

    def eval_top_form(self, x: int) -> int:
        """Orlike-form output F'(x) (equals F(x) xor dual)."""
        return self.top_bit([c.value(x) for c in self.clauses])

    def __call__(self, x: int) -> int:
        return self.eval_top_form(x) ^ self.dual

    @cached_property
    def truth_table(self) -> BoolFun:
        if self.n > bf.MAX_ARITY:
            raise CapacityError("truth table needs n <= 24")
        xs = np.arange(1 << self.n, dtype=np.int64)
        cols = np.empty((self.m, xs.size), np.uint8)
        for j, c in enumerate(self.clauses):
            if isinstance(c, _DeadClause):
                cols[j] = 0
            else:
                cols[j] = ((xs & c.pos) == c.pos) & ((xs & c.neg) == 0)
        return BoolFun.from_values(self.n, self.top(cols) ^ self.dual)

    @cached_property
    def tables(self):
        return bf.subcube_tables(self.truth_table)

    @classmethod
    def from_clauses(cls, n: int, gate, clauses: Sequence[Sequence[Lit]], k: int | None = None) -> "DepthTwo":
        """Build from an orlike gate and AND clauses given as literal lists."""
        side_k = gate_k(gate)
        if side_k is None or side_k[0] != ORLIKE:
            raise StructureError("top gate must be orlike for AND clauses")
        return cls._build(n, gate, k if k is not None else side_k[1], clauses, dual=False)

    @classmethod
    def _build(cls, n, gate, k, clause_lits, dual):
        cl = []
        for lits in clause_lits:
            lits = [~l if dual else l for l in lits]
            for l in lits:
                if not 0 <= l.var < n:
                    raise DimensionError(f"literal x{l.var} outside n={n}")
            c = _make_clause(lits)
            cl.append(c if c is not None else _DeadClause(tuple(lits)))
        return cls(n, gate, k, tuple(cl), dual)

    @classmethod
    def from_circuit(cls, C: Circuit, k: int | None = None) -> "DepthTwo":
        """View a depth-2 circuit (G(k) over AND or OR of literals) in orlike form."""
        if isinstance(C.output, (Lit, Const)):
            raise StructureError("output is not a gate")
        top = C.nodes[C.output]
        sk = gate_k(top.gate)
        if sk is None:
            raise StructureError("top gate has no natural G(k) side (normalise the LTF first)")
        side, k0 = sk
        k = k0 if k is None else k
        bottom_gate = And if side == ORLIKE else Or
        clauses = []
        for ch in top.children:
            if isinstance(ch, Lit):
                clauses.append([ch])
            elif isinstance(ch, Const):
                raise StructureError("constant child: fold the circuit first")
            else:
                node = C.nodes[ch]
                if not isinstance(node.gate, bottom_gate):
                    raise StructureError(f"bottom gate {node.gate.kind} does not match a {side} top")
                if not all(isinstance(c, Lit) for c in node.children):
                    raise StructureError("bottom gates must read literals")
                clauses.append(list(node.children))
        return cls._build(C.n, top.gate, k, clauses, dual=(side == ANDLIKE))


class _DeadClause(Clause):
    """A clause holding both x and not x: always false."""

    @cached_property
    def pos(self) -> int:
        return 0

    @cached_property
    def neg(self) -> int:
        return 0

    @cached_property
    def vars(self) -> int:
        return 0

    def status(self, stars, values):
        return 0

    def value(self, x):
        return 0


# -------------------------------------------------------- canonical tree
@dataclass(frozen=True)
class Stop:
    clause: int
    block: tuple  # positions in the clause
    replies: tuple  # bits, aligned with block
    satisfied: bool


def _query(clause: Clause, stars: int, values: int, alpha: int):
    unk = clause.vars & stars
    block = clause.positions(unk)
    replies = tuple(alpha >> clause.lits[i].var & 1 for i in block)
    return unk, block, replies, stars & ~unk, values | (alpha & unk)


def _zero_completion(F: DepthTwo, stars: int, values: int) -> int:
    return F.eval_top_form(values & ~stars)


def canonical_dt_run(F: DepthTwo, rho: Restriction, alpha: int) -> tuple[int, list[Stop]]:
    """One root-to-leaf walk of the canonical decision tree of F|rho.

    `alpha` is a full assignment read only on queried variables.  Returns
    F|rho(alpha) and the list of stops.
    """
    if rho.n != F.n:
        raise DimensionError("restriction length mismatch")
    stars, values = rho.stars, rho.values
    ctr = 0
    stops: list[Stop] = []
    for j, c in enumerate(F.clauses):
        st = c.status(stars, values)
        if st == 0:
            continue
        block, replies = (), ()
        if st == 2:
            _, block, replies, stars, values = _query(c, stars, values, alpha)
            st = c.status(stars, values)
        stops.append(Stop(j, block, replies, st == 1))
        if st == 1:
            ctr += 1
            if ctr == F.k:
                return F.saturated ^ F.dual, stops
    return _zero_completion(F, stars, values) ^ F.dual, stops


def cdt_depth(F: DepthTwo, rho: Restriction, with_path: bool = False):
    """Worst-case number of variables the canonical tree of F|rho queries.

    Explores the reply tree; a state is the partial assignment of the queried
    variables, which determines the run so far.  With `with_path`, also
    returns a depth-achieving assignment (on the queried variables).
    """
    if rho.star_count > CDT_LIVE_CAP:
        raise CapacityError(f"cdt_depth explores up to 2^{CDT_LIVE_CAP} reply paths")
    memo: dict = {}
    clauses = F.clauses

    def explore(j0, ctr, stars, values):
        key = (stars, values)
        if key in memo:
            return memo[key]
        for j in range(j0, len(clauses)):
            c = clauses[j]
            st = c.status(stars, values)
            if st == 0:
                continue
            if st == 1:
                ctr += 1
                if ctr == F.k:
                    break
                continue
            unk = c.vars & stars
            best = (-1, 0)
            sub = unk
            # every reply pattern on the block
            while True:
                d, path = explore(j, ctr, stars & ~unk, values | sub)
                if d > best[0]:
                    best = (d, path | sub)
                if sub == 0:
                    break
                sub = (sub - 1) & unk
            res = (best[0] + unk.bit_count(), best[1])
            memo[key] = res
            return res
        memo[key] = (0, 0)
        return memo[key]

    d, path = explore(0, 0, rho.stars, rho.values)
    return (d, path) if with_path else d


# ---------------------------------------------------------------- witnesses
@dataclass(frozen=True)
class PartialWitness:
    sizes: tuple
    blocks: tuple
    replies: tuple

    @property
    def r(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)


@dataclass(frozen=True)
class Witness(PartialWitness):
    ells: tuple = ()

    def partial(self) -> PartialWitness:
        return PartialWitness(self.sizes, self.blocks, self.replies)


def shape_violations(W: PartialWitness, t: int, k: int, w: int) -> list[str]:
    """Defining constraints of a (partial) t-witness, checked field by field."""
    bad = []
    r = W.r
    if not 1 <= r <= t + k:
        bad.append(f"r={r} outside [1, t+k]")
    if not (len(W.blocks) == len(W.replies) == r):
        bad.append("ragged fields")
        return bad
    s = sum(W.sizes)
    if not t <= s <= t + w - 1:
        bad.append(f"total size {s} outside [{t}, {t + w - 1}]")
    if sum(1 for x in W.sizes if x == 0) > k:
        bad.append("more than k empty blocks")
    for i in range(r):
        b = W.blocks[i]
        if len(b) != W.sizes[i] or len(W.replies[i]) != W.sizes[i]:
            bad.append(f"block {i}: size mismatch")
        if len(set(b)) != len(b) or any(not 0 <= x < w for x in b):
            bad.append(f"block {i}: not a subset of [w]")
        if any(a not in (0, 1) for a in W.replies[i]):
            bad.append(f"block {i}: replies not bits")
    if isinstance(W, Witness):
        if len(W.ells) != r:
            bad.append("ells length != r")
        if any(b <= a for a, b in zip(W.ells, W.ells[1:])):
            bad.append("ells not strictly increasing")
    return bad


def _replay(F: DepthTwo, stars: int, values: int, P: PartialWitness, ells=None):
    """Greedy reconstruction of the clause indices; None if P does not fit."""
    out = []
    j = -1
    ctr = 0
    for i in range(P.r):
        if ctr >= F.k:
            return None
        j += 1
        while j < F.m and F.clauses[j].status(stars, values) == 0:
            j += 1
        if j >= F.m:
            return None
        if ells is not None and ells[i] != j:
            return None
        c = F.clauses[j]
        unk = c.vars & stars
        if c.positions(unk) != tuple(P.blocks[i]):
            return None
        for pos, bit in zip(P.blocks[i], P.replies[i]):
            v = c.lits[pos].var
            stars &= ~(1 << v)
            values |= bit << v
        if c.status(stars, values) == 1:
            ctr += 1
        out.append(j)
    return out


def unique_completion(F: DepthTwo, rho: Restriction, P: PartialWitness):
    """The only clause list turning P into a witness for rho, or None."""
    res = _replay(F, rho.stars, rho.values, P)
    return None if res is None else tuple(res)


def is_witness(F: DepthTwo, rho: Restriction, W: Witness, t: int) -> bool:
    if shape_violations(W, t, F.k, max(F.width, 1)):
        return False
    return _replay(F, rho.stars, rho.values, W, ells=W.ells) is not None


def truncate_stops(stops: Sequence[Stop], t: int) -> Witness | None:
    total = 0
    kept = []
    for s in stops:
        kept.append(s)
        total += len(s.block)
        if total >= t:
            return Witness(
                sizes=tuple(len(s.block) for s in kept),
                blocks=tuple(s.block for s in kept),
                replies=tuple(s.replies for s in kept),
                ells=tuple(s.clause for s in kept),
            )
    return None


def extract_witness(F: DepthTwo, rho: Restriction, t: int) -> Witness | None:
    """A t-witness for rho from a deepest canonical-tree path, or None."""
    if t <= 0 or rho.star_count < t:
        return None
    d, alpha = cdt_depth(F, rho, with_path=True)
    if d < t:
        return None
    _, stops = canonical_dt_run(F, rho, alpha)
    W = truncate_stops(stops, t)
    if W is None or not is_witness(F, rho, W, t):
        raise AssertionError("extracted transcript failed witness validation")
    return W


def witness_searcher(F: DepthTwo, z: int, P: PartialWitness):
    """Scan z for satisfied clauses, overwrite each block with its replies.

    Returns (ells, Witness, final z) or ERROR (None).  The round counter here
    indexes blocks of P; it is unrelated to the satisfied-clause counter of
    the canonical tree.
    """
    j = -1
    ells = []
    for i in range(P.r):
        j += 1
        while j < F.m and not F.clauses[j].value(z):
            j += 1
        if j >= F.m:
            return ERROR
        c = F.clauses[j]
        if any(pos >= len(c.lits) for pos in P.blocks[i]):
            return ERROR
        for pos, bit in zip(P.blocks[i], P.replies[i]):
            v = c.lits[pos].var
            z = (z & ~(1 << v)) | (bit << v)
        ells.append(j)
    W = Witness(P.sizes, P.blocks, P.replies, tuple(ells))
    return tuple(ells), W, z


def witness_vars(F: DepthTwo, W: Witness) -> int:
    mask = 0
    for j, b in zip(W.ells, W.blocks):
        for v in F.clauses[j].block_vars(b):
            mask |= 1 << v
    return mask


def satisfying_advice(F: DepthTwo, rho: Restriction, W: Witness, base: int = 0) -> int:
    """An advice string on which the searcher recovers W: rho's fixed bits,
    every witness block set to satisfy its clause, `base` elsewhere."""
    z = (base & rho.stars) | rho.values
    for j, b in zip(W.ells, W.blocks):
        c = F.clauses[j]
        for v in c.block_vars(b):
            z = (z & ~(1 << v)) | ((c.pos >> v & 1) << v)
    return z


def searcher_success_fraction(F: DepthTwo, live: int, z_out: int, P: PartialWitness) -> Fraction:
    """Exact fraction of fillings z of the live set on which the searcher
    returns the unique completion of P for rho(live, z)."""
    rho = Restriction.from_lambda(F.n, live, z_out)
    target = unique_completion(F, rho, P)
    if target is None:
        raise ValueError("P is not a partial witness for this restriction")
    hits = total = 0
    sub = live
    while True:
        z = rho.values | sub
        res = witness_searcher(F, z, P)
        hits += res is not ERROR and res[0] == target
        total += 1
        if sub == 0:
            break
        sub = (sub - 1) & live
    return Fraction(hits, total)


# ------------------------------------------------------- multi-switching
class Family:
    """A list of DepthTwo circuits on the same variables, with cached DT tables."""

    def __init__(self, members: Sequence[DepthTwo]):
        if not members:
            raise ValueError("empty family")
        n = members[0].n
        if any(F.n != n for F in members):
            raise DimensionError("family members disagree on n")
        if n > bf.DT_DEPTH_CAP:
            raise CapacityError(f"family tables need n <= {bf.DT_DEPTH_CAP}")
        self.n = n
        self.members = tuple(members)
        w = np.zeros(1 << n, dtype=np.int64)
        for i in range(n):
            w[np.arange(1 << n) >> i & 1 == 1] += 3 ** i
        self._tern = w

    def __len__(self):
        return len(self.members)

    @property
    def k(self) -> int:
        return max(F.k for F in self.members)

    @property
    def width(self) -> int:
        return max(F.width for F in self.members)

    def tern(self, stars: int, values: int) -> int:
        return int(2 * self._tern[stars] + self._tern[values])

    def depth(self, i: int, stars: int, values: int) -> int:
        return int(self.members[i].tables[0][self.tern(stars, values)])

    def is_constant(self, i: int, stars: int, values: int) -> bool:
        return int(self.members[i].tables[1][self.tern(stars, values)]) != 2


@dataclass(frozen=True)
class Round:
    index: int  # family member
    touched: int  # mask I
    queries: tuple  # (clause, block) pairs, y-values drawn from z
    advice: tuple  # beta on I, ascending variable order


@dataclass(frozen=True)
class CPDTResult:
    stars: int
    values: int
    counter: int
    rounds: tuple


def _bits_on(mask: int, word: int) -> tuple:
    return tuple(word >> v & 1 for v in range(mask.bit_length()) if mask >> v & 1)


def _set_on(mask: int, bits: Sequence[int]) -> int:
    out = 0
    it = iter(bits)
    for v in range(mask.bit_length()):
        if mask >> v & 1:
            out |= next(it) << v
    return out


def _cpdt_round(fam: Family, i: int, stars: int, values: int, z: int, budget: int):
    """Simulate member i's canonical tree on x o y with y from z.

    Stops when F_i|x o y is constant or `budget` variables were queried.
    """
    F = fam.members[i]
    ys, yv = stars, values
    touched = 0
    count = 0
    queries = []
    while count < budget and not fam.is_constant(i, ys, yv):
        j = next(j for j, c in enumerate(F.clauses) if c.status(ys, yv) == 2)
        c = F.clauses[j]
        unk = c.vars & ys
        queries.append((j, c.positions(unk)))
        yv |= z & unk
        ys &= ~unk
        touched |= unk
        count += unk.bit_count()
    return touched, count, tuple(queries)


def _next_member(fam: Family, start: int, stars: int, values: int, r: int):
    for i in range(start, len(fam)):
        if fam.depth(i, stars, values) > r:
            return i
    return None


def cpdt_run(fam: Family, beta: int, z: int, r: int, t: int, rho: Restriction | None = None) -> CPDTResult:
    """Canonical partial decision tree of the family (restricted by rho).

    Member i is expanded while DT(F_i|x) > r; its canonical tree is followed
    with replies from z, and the touched set is then queried with beta.
    """
    stars = rho.stars if rho is not None else (1 << fam.n) - 1
    values = rho.values if rho is not None else 0
    counter = 0
    j = 0
    rounds = []
    while counter < t:
        i = _next_member(fam, j, stars, values, r)
        if i is None:
            break
        touched, count, queries = _cpdt_round(fam, i, stars, values, z, t - counter)
        counter += count
        values |= beta & touched
        stars &= ~touched
        rounds.append(Round(i, touched, queries, _bits_on(touched, beta)))
        j = i
    return CPDTResult(stars, values, counter, tuple(rounds))


def cpdt_failing_advice(fam: Family, rho: Restriction, z: int, r: int, t: int):
    """A beta driving the CPDT counter to t, or None if every beta stops short.

    Only beta's bits on touched sets matter, so the search branches once per
    round over the 2^|I| replies.
    """

    def search(stars, values, j, counter, beta):
        if counter >= t:
            return beta
        i = _next_member(fam, j, stars, values, r)
        if i is None:
            return None
        touched, count, _ = _cpdt_round(fam, i, stars, values, z, t - counter)
        sub = touched
        while True:
            res = search(stars & ~touched, values | sub, i, counter + count, beta | sub)
            if res is not None:
                return res
            if sub == 0:
                return None
            sub = (sub - 1) & touched

    return search(rho.stars, rho.values, 0, 0, 0)


def cpdt_fails(fam: Family, rho: Restriction, z: int, r: int, t: int) -> bool:
    return cpdt_failing_advice(fam, rho, z, r, t) is not None


def partial_depth_table(fam: Family, r: int, t: int) -> np.ndarray:
    """good[idx]: the family restricted to subcube idx has a common depth-t
    tree whose leaves leave every member with DT <= r.

    Bottom-up over t on all 3^n subcubes; exact, so it is the oracle for the
    CPDT surrogate.
    """
    n = fam.n
    N = 3 ** n
    worst = np.zeros(N, dtype=np.int8)
    for F in fam.members:
        np.maximum(worst, F.tables[0], out=worst)
    good = worst <= r
    idx = np.arange(N, dtype=np.int64)
    star_sets = []
    for i in range(n):
        sel = np.flatnonzero((idx // 3 ** i) % 3 == 2)
        star_sets.append((sel, sel - 2 * 3 ** i, sel - 3 ** i))
    for _ in range(t):
        nxt = good.copy()
        for sel, a, b in star_sets:
            nxt[sel] |= good[a] & good[b]
        if np.array_equal(nxt, good):
            break
        good = nxt
    return good


def exact_partial_dt_check(fam: Family, r: int, t: int, rho: Restriction | None = None) -> bool:
    """Does the (restricted) family have r-partial depth-t decision trees?"""
    stars = rho.stars if rho is not None else (1 << fam.n) - 1
    values = rho.values if rho is not None else 0
    return bool(partial_depth_table(fam, r, t)[fam.tern(stars, values)])


# --------------------------------------------------------- global witness
@dataclass(frozen=True)
class GlobalPartialWitness:
    L: tuple
    S: tuple
    parts: tuple  # PartialWitness per round
    advice: tuple  # beta_c, ascending variable order over the round's set

    @property
    def R(self) -> int:
        return len(self.L)


@dataclass(frozen=True)
class GlobalWitness(GlobalPartialWitness):
    witnesses: tuple = ()

    def partial(self) -> GlobalPartialWitness:
        return GlobalPartialWitness(self.L, self.S, tuple(W.partial() for W in self.witnesses), self.advice)


def global_shape_violations(G: GlobalPartialWitness, fam: Family, r: int, t: int) -> list[str]:
    bad = []
    R = G.R
    if R < 1 or R > max(1, math.ceil(t / r)):
        bad.append(f"R={R} outside [1, ceil(t/r)]")
    if any(b < a for a, b in zip(G.L, G.L[1:])):
        bad.append("L decreasing")
    if any(not 0 <= i < len(fam) for i in G.L):
        bad.append("L outside family")
    if not t <= sum(G.S) <= t + fam.width:
        bad.append(f"sum S={sum(G.S)} outside [t, t+w]")
    for c in range(R):
        if len(G.advice[c]) != G.S[c]:
            bad.append(f"round {c}: advice length != S")
        if G.parts[c].total != G.S[c]:
            bad.append(f"round {c}: witness size != S")
    return bad


def extract_global_witness(fam: Family, rho: Restriction, z: int, r: int, t: int) -> GlobalWitness | None:
    """Global witness read off a CPDT run that reaches counter t, or None."""
    beta = cpdt_failing_advice(fam, rho, z, r, t)
    if beta is None:
        return None
    res = cpdt_run(fam, beta, z, r, t, rho)
    stars, values = rho.stars, rho.values
    L, S, Ws, adv = [], [], [], []
    for rd in res.rounds:
        F = fam.members[rd.index]
        s = rd.touched.bit_count()
        rho_c = Restriction(fam.n, stars, values)
        _, stops = canonical_dt_run(F, rho_c, z)
        W = truncate_stops(stops, s)
        if W is None or witness_vars(F, W) != rd.touched or not is_witness(F, rho_c, W, s):
            raise AssertionError("CPDT round does not match the canonical tree")
        L.append(rd.index)
        S.append(s)
        Ws.append(W)
        adv.append(rd.advice)
        values |= beta & rd.touched
        stars &= ~rd.touched
    return GlobalWitness(tuple(L), tuple(S), tuple(W.partial() for W in Ws), tuple(adv), tuple(Ws))


def global_completion(fam: Family, rho: Restriction, G: GlobalPartialWitness):
    """Per-round clause lists completing G for rho (unique when they exist)."""
    stars, values = rho.stars, rho.values
    out = []
    for c in range(G.R):
        F = fam.members[G.L[c]]
        ells = unique_completion(F, Restriction(fam.n, stars, values), G.parts[c])
        if ells is None:
            return None
        W = Witness(G.parts[c].sizes, G.parts[c].blocks, G.parts[c].replies, ells)
        touched = witness_vars(F, W)
        if touched & ~stars or touched.bit_count() != G.S[c]:
            return None
        values |= _set_on(touched, G.advice[c])
        stars &= ~touched
        out.append(ells)
    return tuple(out)


def is_global_witness(fam: Family, rho: Restriction, G: GlobalWitness, r: int, t: int) -> bool:
    if global_shape_violations(G, fam, r, t):
        return False
    stars, values = rho.stars, rho.values
    for c in range(G.R):
        F = fam.members[G.L[c]]
        W = G.witnesses[c]
        rho_c = Restriction(fam.n, stars, values)
        if not is_witness(F, rho_c, W, G.S[c]):
            return False
        touched = witness_vars(F, W)
        values |= _set_on(touched, G.advice[c])
        stars &= ~touched
    return True


def global_witness_searcher(fam: Family, G: GlobalPartialWitness, z: int):
    """Run the single-circuit searcher per round, writing each round's advice
    into z before the next.  Returns a GlobalWitness or ERROR."""
    Ws = []
    for c in range(G.R):
        F = fam.members[G.L[c]]
        res = witness_searcher(F, z, G.parts[c])
        if res is ERROR:
            return ERROR
        _, W, _ = res
        touched = witness_vars(F, W)
        if touched.bit_count() != G.S[c]:
            return ERROR
        z = (z & ~touched) | _set_on(touched, G.advice[c])
        Ws.append(W)
    return GlobalWitness(G.L, G.S, G.parts, G.advice, tuple(Ws))


def global_satisfying_advice(fam: Family, rho: Restriction, G: GlobalWitness, base: int = 0) -> int:
    z = (base & rho.stars) | rho.values
    for c in range(G.R):
        F = fam.members[G.L[c]]
        for j, b in zip(G.witnesses[c].ells, G.witnesses[c].blocks):
            cl = F.clauses[j]
            for v in cl.block_vars(b):
                z = (z & ~(1 << v)) | ((cl.pos >> v & 1) << v)
    return z


def global_success_fraction(fam: Family, live: int, z_out: int, G: GlobalPartialWitness) -> Fraction:
    rho = Restriction.from_lambda(fam.n, live, z_out)
    target = global_completion(fam, rho, G)
    if target is None:
        raise ValueError("G is not a global partial witness for this restriction")
    hits = total = 0
    sub = live
    while True:
        res = global_witness_searcher(fam, G, rho.values | sub)
        hits += res is not ERROR and tuple(W.ells for W in res.witnesses) == target
        total += 1
        if sub == 0:
            break
        sub = (sub - 1) & live
    return Fraction(hits, total)


# ----------------------------------------------------------------- bounds
def switching_bound(p, t: int, k: int, w: int):
    """(20 p w)^t 2^k, exact when p is a Fraction."""
    return (20 * p * w) ** t * 2 ** k


def multiswitching_bound(p, t: int, r: int, k: int, m: int, w: int) -> float:
    """4 (64 (2^k m)^{1/r} p w)^t."""
    return 4 * (64 * (2 ** k * m) ** (1 / r) * float(p) * w) ** t


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, str):
        return Fraction(p)
    return Fraction(p).limit_denominator(1 << 40)


def _star_counts(n: int) -> np.ndarray:
    idx = np.arange(3 ** n, dtype=np.int64)
    cnt = np.zeros(3 ** n, dtype=np.int64)
    for _ in range(n):
        cnt += idx % 3 == 2
        idx //= 3
    return cnt


def _failure_by_stars(depth: np.ndarray, n: int, failing: np.ndarray) -> list[int]:
    return np.bincount(_star_counts(n)[failing], minlength=n + 1).tolist()


def exact_rp_probability(n: int, fail_counts: Sequence[int], p: Fraction) -> Fraction:
    q = (1 - p) / 2
    return sum((Fraction(c) * p ** s * q ** (n - s) for s, c in enumerate(fail_counts)), Fraction(0))


def _mc_dt_chunk(depth, n, p, t, size, rng):
    u = rng.random((size, n))
    bits = rng.integers(0, 2, (size, n))
    digits = np.where(u < p, 2, bits)
    tern = digits @ (3 ** np.arange(n, dtype=np.int64))
    return int(np.count_nonzero(depth[tern] >= t))


def _row(**kw) -> dict:
    keys = ("experiment_id", "n", "m", "k", "w", "p", "t", "r", "mode", "trials",
            "failures", "estimate", "ci_low", "ci_high", "bound", "seed")
    return {k: kw.get(k, "") for k in keys}


def switching_experiment(F: DepthTwo, p, t: int, mode: str = "exhaustive", trials: int = 0,
                         seed: int = 0, k: int | None = None, w: int | None = None,
                         experiment_id: str = "switching") -> dict:
    """Pr_{rho ~ R_p}[DT(F|rho) >= t] against (20pw)^t 2^k.

    Exhaustive mode sums exact R_p weights over all 3^n restrictions and
    returns a Fraction; MC mode uses independent chunked substreams.
    """
    k = F.k if k is None else k
    w = max(F.width, 1) if w is None else w
    depth, _ = F.tables
    n = F.n
    if mode == "exhaustive":
        pf = _as_fraction(p)
        counts = _failure_by_stars(depth, n, depth >= t)
        est = exact_rp_probability(n, counts, pf)
        bound = switching_bound(pf, t, k, w)
        return _row(experiment_id=experiment_id, n=n, m=F.m, k=k, w=w, p=str(pf), t=t, r="",
                    mode=mode, trials=3 ** n, failures=sum(counts), estimate=est,
                    ci_low=est, ci_high=est, bound=bound, seed="")
    if mode != "mc":
        raise ValueError(f"unknown mode {mode}")
    fails = sum(map_chunks(_mc_dt_chunk, (depth, n, float(p), t), trials, seed))
    lo, hi = wilson(fails, trials)
    return _row(experiment_id=experiment_id, n=n, m=F.m, k=k, w=w, p=float(p), t=t, r="",
                mode=mode, trials=trials, failures=fails, estimate=fails / max(trials, 1),
                ci_low=lo, ci_high=hi, bound=switching_bound(float(p), t, k, w), seed=seed)


def _mc_multi_chunk(fam, p, r, t, exact_table, size, rng):
    fails = exact_fails = disagree = 0
    for _ in range(size):
        rho = bf.sample_rp(fam.n, p, rng)
        z = int(rng.integers(0, 1 << fam.n))
        f = cpdt_fails(fam, rho, z, r, t)
        fails += f
        if exact_table is not None:
            e = not exact_table[fam.tern(rho.stars, rho.values)]
            exact_fails += e
            disagree += e and not f
    return fails, exact_fails, disagree


def multiswitching_experiment(fam: Family, p, r: int, t: int, mode: str = "mc", trials: int = 0,
                              seed: int = 0, with_exact: bool = True,
                              experiment_id: str = "multiswitching") -> dict:
    """Family failure rate against 4(64(2^k m)^{1/r} p w)^t.

    MC mode counts CPDT failures (counter reaches t for some advice); when
    `with_exact` is set it also counts exact failures and any restriction
    where the exact checker fails but the CPDT does not (which would break
    the proof's implication).  Exhaustive mode is exact over all 3^n.
    """
    k, m, w = fam.k, len(fam), max(fam.width, 1)
    n = fam.n
    table = partial_depth_table(fam, r, t) if (with_exact or mode == "exhaustive") else None
    if mode == "exhaustive":
        pf = _as_fraction(p)
        counts = np.bincount(_star_counts(n)[~table], minlength=n + 1).tolist()
        est = exact_rp_probability(n, counts, pf)
        row = _row(experiment_id=experiment_id, n=n, m=m, k=k, w=w, p=str(pf), t=t, r=r, mode=mode,
                   trials=3 ** n, failures=sum(counts), estimate=est, ci_low=est, ci_high=est,
                   bound=multiswitching_bound(pf, t, r, k, m, w), seed="")
        return row
    parts = map_chunks(_mc_multi_chunk, (fam, float(p), r, t, table), trials, seed)
    fails = sum(x[0] for x in parts)
    lo, hi = wilson(fails, trials)
    row = _row(experiment_id=experiment_id, n=n, m=m, k=k, w=w, p=float(p), t=t, r=r, mode=mode,
               trials=trials, failures=fails, estimate=fails / max(trials, 1), ci_low=lo, ci_high=hi,
               bound=multiswitching_bound(p, t, r, k, m, w), seed=seed)
    if table is not None:
        row["exact_failures"] = sum(x[1] for x in parts)
        row["exact_without_cpdt"] = sum(x[2] for x in parts)
    return row
