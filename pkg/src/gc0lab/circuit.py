"""GC0(k) circuits: gate semantics, G(k) validation, LTF balance, evaluation,
restriction with constant folding, metrics and the JSON file format.

A child reference is one of
  * `Lit(var, neg)`  an input literal,
  * `Const(value)`   a constant (only transient during folding),
  * an int           the index of an earlier node.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .boolfun import BoolFun, CapacityError, DimensionError, Restriction, popcounts

ORLIKE = "orlike"
ANDLIKE = "andlike"
TABLE_FANIN_CAP = 16
FORMAT_VERSION = 1


# ------------------------------------------------------------------ refs
@dataclass(frozen=True)
class Lit:
    var: int
    neg: bool = False

    def __invert__(self):
        return Lit(self.var, not self.neg)


@dataclass(frozen=True)
class Const:
    value: int


Ref = Union[int, Lit, Const]


# ----------------------------------------------------------------- gates
@dataclass(frozen=True)
class And:
    kind = "and"


@dataclass(frozen=True)
class Or:
    kind = "or"


@dataclass(frozen=True)
class Not:
    kind = "not"


@dataclass(frozen=True)
class KOr:
    k: int
    kind = "kor"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("KOr needs k >= 1")


@dataclass(frozen=True)
class KAnd:
    k: int
    kind = "kand"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("KAnd needs k >= 1")


@dataclass(frozen=True)
class SymmetricG:
    """Constant `const` once the count (ones if orlike, zeros if andlike)
    reaches k; below that, `low_values[count]`."""

    side: str
    k: int
    low_values: tuple
    const: int
    kind = "symmetric"

    def __post_init__(self):
        object.__setattr__(self, "low_values", tuple(int(v) for v in self.low_values))
        if len(self.low_values) != self.k:
            raise ValueError("low_values must have exactly k entries")
        if self.side not in (ORLIKE, ANDLIKE):
            raise ValueError(f"bad side {self.side}")


@dataclass(frozen=True)
class TableG:
    side: str
    k: int
    table: BoolFun
    kind = "table"

    def __post_init__(self):
        if self.table.arity > TABLE_FANIN_CAP:
            raise CapacityError(f"TableG fan-in capped at {TABLE_FANIN_CAP}")
        if validate_gk(self, self.k) != self.side:
            raise ValueError("TableG does not satisfy its declared G(k) side")


@dataclass(frozen=True)
class Ltf:
    """Output 1 iff sum_i w_i (-1)^{x_i} - theta <= 0."""

    weights: tuple
    theta: int
    kind = "ltf"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))


@dataclass(frozen=True)
class Collapsed:
    """The top gate produced by collapsing G(k) over decision trees.

    orlike:  `sat` if at least k children are 1, else `inner` applied to the
             OR of each group.  andlike is the dual (zeros, AND of groups).
    `groups[i]` is the inner input fed by child i; -1 marks a child that
    only counts towards the threshold.  The inner gate has `ngroups` inputs;
    a group without members reads as 0 (orlike) or 1 (andlike).
    """

    side: str
    k: int
    sat: int
    inner: object
    groups: tuple
    ngroups: int
    kind = "collapsed"

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))


Gate = Union[And, Or, Not, KOr, KAnd, SymmetricG, TableG, Ltf, Collapsed]


def _counts(cols: np.ndarray) -> np.ndarray:
    return cols.sum(axis=0, dtype=np.int64)


def gate_apply(g: Gate, cols: np.ndarray) -> np.ndarray:
    """Evaluate g column-wise: cols has shape (fan_in, N) of 0/1."""
    cols = np.asarray(cols, dtype=np.uint8)
    fan, N = cols.shape
    if isinstance(g, And):
        return cols.all(axis=0).astype(np.uint8) if fan else np.ones(N, np.uint8)
    if isinstance(g, Or):
        return cols.any(axis=0).astype(np.uint8) if fan else np.zeros(N, np.uint8)
    if isinstance(g, Not):
        if fan != 1:
            raise DimensionError("NOT has fan-in 1")
        return 1 - cols[0]
    if isinstance(g, KOr):
        return (_counts(cols) >= g.k).astype(np.uint8)
    if isinstance(g, KAnd):
        return (fan - _counts(cols) < g.k).astype(np.uint8)
    if isinstance(g, SymmetricG):
        c = _counts(cols) if g.side == ORLIKE else fan - _counts(cols)
        if g.k == 0:
            return np.full(N, g.const, np.uint8)
        low = np.array(g.low_values, dtype=np.uint8)
        return np.where(c >= g.k, g.const, low[np.minimum(c, g.k - 1)]).astype(np.uint8)
    if isinstance(g, TableG):
        if fan != g.table.arity:
            raise DimensionError(f"TableG expects fan-in {g.table.arity}, got {fan}")
        idx = np.zeros(N, dtype=np.int64)
        for i in range(fan):
            idx |= cols[i].astype(np.int64) << i
        return g.table.values[idx]
    if isinstance(g, Ltf):
        if fan != len(g.weights):
            raise DimensionError("LTF fan-in mismatch")
        w = np.array(g.weights, dtype=np.int64)
        s = w @ (1 - 2 * cols.astype(np.int64)) - g.theta
        return (s <= 0).astype(np.uint8)
    if isinstance(g, Collapsed):
        if fan != len(g.groups):
            raise DimensionError("collapsed gate fan-in mismatch")
        groups = np.array(g.groups)
        ngroups = _inner_fanin(g)
        orlike = g.side == ORLIKE
        c = _counts(cols) if orlike else fan - _counts(cols)
        gv = np.empty((ngroups, N), np.uint8)
        for j in range(ngroups):
            member = cols[groups == j]
            if orlike:
                gv[j] = member.any(axis=0) if len(member) else 0
            else:
                gv[j] = member.all(axis=0) if len(member) else 1
        inner = gate_apply(g.inner, gv)
        return np.where(c >= g.k, g.sat, inner).astype(np.uint8)
    raise TypeError(f"unknown gate {g!r}")


def _inner_fanin(g: Collapsed) -> int:
    return g.ngroups


def gate_fanin(g: Gate) -> int | None:
    """Fan-in fixed by the gate itself, if any."""
    if isinstance(g, TableG):
        return g.table.arity
    if isinstance(g, Ltf):
        return len(g.weights)
    if isinstance(g, Not):
        return 1
    if isinstance(g, Collapsed):
        return len(g.groups)
    return None


def eval_gate(g: Gate, bits: Sequence[int]) -> int:
    cols = np.asarray(bits, dtype=np.uint8).reshape(-1, 1)
    if len(bits) == 0:
        cols = np.zeros((0, 1), np.uint8)
    return int(gate_apply(g, cols)[0])


def gate_table(g: Gate, fan_in: int) -> BoolFun:
    if fan_in > TABLE_FANIN_CAP:
        raise CapacityError(f"gate table needs fan-in <= {TABLE_FANIN_CAP}")
    xs = np.arange(1 << fan_in, dtype=np.int64)
    cols = np.array([(xs >> i) & 1 for i in range(fan_in)], dtype=np.uint8).reshape(fan_in, xs.size)
    return BoolFun.from_values(fan_in, gate_apply(g, cols))


# ------------------------------------------------------------ G(k) checks
@dataclass(frozen=True)
class GkFailure:
    """Counterexamples: per side, two inputs in the constant region that differ.

    An entry is (x, y) as input words, or (weight_x, weight_y) for symbolic
    gates whose fan-in is unknown.
    """

    k: int
    pairs: dict = field(default_factory=dict)

    def __bool__(self):
        return False


def _scan_table(values: np.ndarray, fan: int, k: int, side: str):
    w = popcounts(fan)
    region = w >= k if side == ORLIKE else (fan - w) >= k
    idx = np.flatnonzero(region)
    if idx.size == 0:
        return None
    v = values[idx]
    bad = np.flatnonzero(v != v[0])
    if bad.size == 0:
        return None
    return int(idx[0]), int(idx[bad[0]])


def validate_gk(g: Gate, k: int, fan_in: int | None = None) -> str | GkFailure:
    """'orlike' / 'andlike' if g is constant once k ones / zeros appear."""
    fi = gate_fanin(g)
    if fi is None:
        fi = fan_in
    if isinstance(g, (TableG, Ltf)) or (isinstance(g, Collapsed) and g.k > k):
        if fi is None or fi > TABLE_FANIN_CAP:
            return GkFailure(k, {"capacity": (fi, TABLE_FANIN_CAP)})
        vals = g.table.values if isinstance(g, TableG) else gate_table(g, fi).values
        pairs = {}
        prefer = [g.side] if isinstance(g, TableG) else []
        for side in prefer + [s for s in (ORLIKE, ANDLIKE) if s not in prefer]:
            bad = _scan_table(vals, fi, k, side)
            if bad is None:
                return side
            pairs[side] = bad
        return GkFailure(k, pairs)
    if isinstance(g, Or):
        return ORLIKE if k >= 1 else GkFailure(k, {ORLIKE: (0, 1)})
    if isinstance(g, And):
        return ANDLIKE if k >= 1 else GkFailure(k, {ANDLIKE: (1, 0)})
    if isinstance(g, Not):
        return ORLIKE if k >= 1 else GkFailure(k, {ORLIKE: (0, 1)})
    if isinstance(g, KOr):
        if g.k <= k or (fi is not None and fi < g.k):
            return ORLIKE
        return GkFailure(k, {ORLIKE: (k, g.k)})
    if isinstance(g, KAnd):
        if g.k <= k or (fi is not None and fi < g.k):
            return ANDLIKE
        return GkFailure(k, {ANDLIKE: (k, g.k)})
    if isinstance(g, SymmetricG):
        for c in range(k, g.k):
            if g.low_values[c] != g.const:
                return GkFailure(k, {g.side: (c, g.k)})
        return g.side
    if isinstance(g, Collapsed):
        return g.side
    raise TypeError(f"unknown gate {g!r}")


def gate_k(g: Gate) -> tuple[str, int] | None:
    """Natural (side, k) of a gate, or None for an LTF needing negations."""
    if isinstance(g, Or) or isinstance(g, Not):
        return ORLIKE, 1
    if isinstance(g, And):
        return ANDLIKE, 1
    if isinstance(g, KOr):
        return ORLIKE, g.k
    if isinstance(g, KAnd):
        return ANDLIKE, g.k
    if isinstance(g, (SymmetricG, TableG, Collapsed)):
        return g.side, g.k
    if isinstance(g, Ltf):
        if min(g.weights, default=0) < 0:
            return None
        return (ORLIKE if g.theta >= 0 else ANDLIKE), ltf_balance(g.weights, g.theta)
    raise TypeError(f"unknown gate {g!r}")


# ------------------------------------------------------------------- LTFs
def ltf_balance(weights: Sequence[int], theta: int) -> int:
    """Smallest j with -sum_{i<=j}|w| + sum_{i>j}|w| < |theta| (|w| ascending).

    Returns 0 for a gate that is constant (including all-zero weights).
    """
    if len(weights) == 0:
        raise ValueError("weights must be nonempty")
    a = sorted(abs(int(w)) for w in weights)
    total = sum(a)
    if total == 0:
        return 0
    head = 0
    for j in range(len(a) + 1):
        if -head + (total - head) < abs(theta):
            return j
        if j < len(a):
            head += a[j]
    return len(a)


@dataclass(frozen=True)
class LtfCertificate:
    negation_mask: frozenset
    gate: TableG
    balance: int
    tight_k: int


def ltf_to_gk(weights: Sequence[int], theta: int) -> LtfCertificate:
    """Negate negative-weight inputs and certify the result is G(balance).

    `tight_k` is the least k at which the negated gate still validates.
    """
    fan = len(weights)
    if fan > TABLE_FANIN_CAP:
        raise CapacityError(f"exhaustive LTF certification needs fan-in <= {TABLE_FANIN_CAP}")
    mask = frozenset(i for i, w in enumerate(weights) if w < 0)
    flipped = Ltf(tuple(abs(int(w)) for w in weights), int(theta))
    bal = ltf_balance(weights, theta)
    table = gate_table(flipped, fan)
    side = ORLIKE if theta >= 0 else ANDLIKE
    if _scan_table(table.values, fan, bal, side) is not None:
        raise AssertionError(f"balance-{bal} LTF {weights}, {theta} is not G({bal}) after negation")
    tight = min(
        kk for kk in range(bal + 1)
        if _scan_table(table.values, fan, kk, ORLIKE) is None
        or _scan_table(table.values, fan, kk, ANDLIKE) is None
    )
    return LtfCertificate(mask, TableG(side, bal, table), bal, tight)


# --------------------------------------------------------------- circuits
@dataclass(frozen=True)
class Node:
    gate: Gate
    children: tuple


@dataclass(frozen=True, eq=False)
class Circuit:
    n: int
    nodes: tuple
    output: Ref
    declared: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        for i, node in enumerate(self.nodes):
            fi = gate_fanin(node.gate)
            if fi is not None and fi != len(node.children):
                raise DimensionError(f"node {i}: fan-in {len(node.children)} != {fi}")
            for c in node.children:
                self._check_ref(c, i)
        self._check_ref(self.output, len(self.nodes))

    def _check_ref(self, c, bound):
        if isinstance(c, Lit):
            if not 0 <= c.var < self.n:
                raise DimensionError(f"literal x{c.var} outside n={self.n}")
        elif isinstance(c, Const):
            pass
        elif isinstance(c, (int, np.integer)):
            if not 0 <= c < bound:
                raise DimensionError(f"dangling or forward reference {c}")
        else:
            raise TypeError(f"bad reference {c!r}")

    def __eq__(self, other):
        return isinstance(other, Circuit) and to_dict(self) == to_dict(other)

    def __hash__(self):
        return hash(digest(self))


def literal_column(xs: np.ndarray, lit: Lit) -> np.ndarray:
    col = ((xs >> lit.var) & 1).astype(np.uint8)
    return col ^ 1 if lit.neg else col


def eval_many(C: Circuit, xs) -> np.ndarray:
    """Circuit output on each input word in xs."""
    xs = np.asarray(xs, dtype=np.int64).ravel()
    vals: list = []
    lits: dict = {}

    def col(ref):
        if isinstance(ref, Lit):
            if ref not in lits:
                lits[ref] = literal_column(xs, ref)
            return lits[ref]
        if isinstance(ref, Const):
            return np.full(xs.size, ref.value, np.uint8)
        return vals[ref]

    for node in C.nodes:
        cols = np.array([col(c) for c in node.children], dtype=np.uint8).reshape(len(node.children), xs.size)
        vals.append(gate_apply(node.gate, cols))
    return col(C.output)


def eval_circuit(C: Circuit, x: int) -> int:
    return int(eval_many(C, [x])[0])


def to_boolfun(C: Circuit) -> BoolFun:
    if C.n > 24:
        raise CapacityError("to_boolfun needs n <= 24")
    return BoolFun.from_values(C.n, eval_many(C, np.arange(1 << C.n)))


# --------------------------------------------------------------- folding
def fold_gate(g: Gate, children: Sequence) -> Const | tuple[Gate, list]:
    """Absorb Const children into g.

    Returns a Const when the gate is now constant, else (new gate, live
    children in their original order).
    """
    fixed = [(i, c.value) for i, c in enumerate(children) if isinstance(c, Const)]
    if not fixed:
        return g, list(children)
    live_idx = [i for i, c in enumerate(children) if not isinstance(c, Const)]
    live = [children[i] for i in live_idx]
    ones = sum(v for _, v in fixed)
    zeros = len(fixed) - ones
    nl = len(live)

    if not live and not isinstance(g, Collapsed):
        return Const(eval_gate(g, [c.value for c in children]))
    if isinstance(g, And):
        return Const(0) if zeros else (g, live)
    if isinstance(g, Or):
        return Const(1) if ones else (g, live)
    if isinstance(g, Not):
        return Const(1 - fixed[0][1])
    if isinstance(g, KOr):
        k = g.k - ones
        if k <= 0:
            return Const(1)
        return Const(0) if nl < k else (KOr(k), live)
    if isinstance(g, KAnd):
        k = g.k - zeros
        if k <= 0:
            return Const(0)
        return Const(1) if nl < k else (KAnd(k), live)
    if isinstance(g, SymmetricG):
        shift = ones if g.side == ORLIKE else zeros
        k = g.k - shift
        if k <= 0:
            return Const(g.const)
        low = g.low_values[shift:]
        reach = set(low[: min(nl, k - 1) + 1])
        if nl >= k:
            reach.add(g.const)
        if len(reach) == 1:
            return Const(reach.pop())
        return SymmetricG(g.side, k, low, g.const), live
    if isinstance(g, TableG):
        base = sum(v << i for i, v in fixed)
        loc = np.arange(1 << nl, dtype=np.int64)
        idx = np.full(1 << nl, base, dtype=np.int64)
        for j, i in enumerate(live_idx):
            idx |= ((loc >> j) & 1) << i
        t = BoolFun.from_values(nl, g.table.values[idx])
        if t.is_constant():
            return Const(int(t.values[0]))
        shift = ones if g.side == ORLIKE else zeros
        return TableG(g.side, max(g.k - shift, 0), t), live
    if isinstance(g, Ltf):
        w = g.weights
        theta = g.theta - sum(w[i] * (1 - 2 * v) for i, v in fixed)
        lw = tuple(w[i] for i in live_idx)
        tot = sum(abs(x) for x in lw)
        if theta >= tot:
            return Const(1)
        if theta < -tot:
            return Const(0)
        return Ltf(lw, theta), live
    if isinstance(g, Collapsed):
        return _fold_collapsed(g, children, fixed, live_idx)
    raise TypeError(f"unknown gate {g!r}")


def _fold_collapsed(g: Collapsed, children, fixed, live_idx):
    orlike = g.side == ORLIKE
    hit = 1 if orlike else 0  # the value that counts and decides a group
    k = g.k - sum(1 for _, v in fixed if v == hit)
    if k <= 0:
        return Const(g.sat)
    ng = _inner_fanin(g)
    decided = {}
    for i, v in fixed:
        if v == hit and g.groups[i] >= 0:
            decided[g.groups[i]] = hit
    has_live = {g.groups[i] for i in live_idx}
    for j in range(ng):
        if j not in decided and j not in has_live:
            decided[j] = 1 - hit
    inner_children = [Const(decided[j]) if j in decided else j for j in range(ng)]
    folded = fold_gate(g.inner, inner_children)
    live = [children[i] for i in live_idx]
    if isinstance(folded, Const):
        v = folded.value
        if v == g.sat or len(live) < k:
            return Const(v)
        return SymmetricG(g.side, k, (v,) * k, g.sat), live
    inner, kept = folded
    pos = {j: t for t, j in enumerate(kept)}
    groups = tuple(pos.get(g.groups[i], -1) if g.groups[i] >= 0 else -1 for i in live_idx)
    return Collapsed(g.side, k, g.sat, inner, groups, len(kept)), live


def restrict_circuit(C: Circuit, rho: Restriction) -> Circuit:
    """C|rho with constants propagated and dead nodes dropped."""
    if rho.n != C.n:
        raise DimensionError(f"restriction length {rho.n} != n {C.n}")
    new_nodes: list[Node] = []
    remap: list[Ref] = []

    def sub(ref):
        if isinstance(ref, Lit):
            if rho.stars >> ref.var & 1:
                return ref
            return Const((rho.values >> ref.var & 1) ^ int(ref.neg))
        if isinstance(ref, Const):
            return ref
        return remap[ref]

    for node in C.nodes:
        folded = fold_gate(node.gate, [sub(c) for c in node.children])
        if isinstance(folded, Const):
            remap.append(folded)
        else:
            gate, kids = folded
            new_nodes.append(Node(gate, tuple(kids)))
            remap.append(len(new_nodes) - 1)
    return prune(Circuit(C.n, new_nodes, sub(C.output), C.declared))


def prune(C: Circuit) -> Circuit:
    """Drop nodes unreachable from the output, keeping topological order."""
    keep = set()
    stack = [C.output]
    while stack:
        r = stack.pop()
        if isinstance(r, (int, np.integer)) and r not in keep:
            keep.add(int(r))
            stack.extend(C.nodes[r].children)
    order = sorted(keep)
    pos = {old: new for new, old in enumerate(order)}

    def m(r):
        return pos[int(r)] if isinstance(r, (int, np.integer)) else r

    nodes = [Node(C.nodes[i].gate, tuple(m(c) for c in C.nodes[i].children)) for i in order]
    return Circuit(C.n, nodes, m(C.output), C.declared)


# --------------------------------------------------------------- metrics
@dataclass(frozen=True)
class CircuitMetrics:
    size: int            # wires, input wires included
    gates: int
    effective_size: int  # gates at height >= 2
    depth: int
    bottom_width: int
    max_k: int


def heights(C: Circuit) -> list[int]:
    hs: list[int] = []
    for node in C.nodes:
        h = 0
        for c in node.children:
            if isinstance(c, (int, np.integer)):
                h = max(h, hs[c])
        hs.append(h + 1)
    return hs


def circuit_metrics(C: Circuit) -> CircuitMetrics:
    C = prune(C)
    hs = heights(C)
    size = sum(len(nd.children) for nd in C.nodes)
    bottom = [len(nd.children) for nd in C.nodes
              if not any(isinstance(c, (int, np.integer)) for c in nd.children)]
    ks = []
    for nd in C.nodes:
        gk = gate_k(nd.gate)
        ks.append(gk[1] if gk else ltf_balance(nd.gate.weights, nd.gate.theta))
    depth = hs[C.output] if isinstance(C.output, (int, np.integer)) else 0
    return CircuitMetrics(
        size=size,
        gates=len(C.nodes),
        effective_size=sum(1 for h in hs if h >= 2),
        depth=depth,
        bottom_width=max(bottom, default=0),
        max_k=max(ks, default=0),
    )


def check_declared(C: Circuit) -> bool:
    """Declared depth must match; declared k and w are upper bounds."""
    if not C.declared:
        return True
    m = circuit_metrics(C)
    d = C.declared
    return (d.get("depth", m.depth) == m.depth
            and d.get("k", m.max_k) >= m.max_k
            and d.get("w", m.bottom_width) >= m.bottom_width)


def with_declared(C: Circuit, **extra) -> Circuit:
    m = circuit_metrics(C)
    decl = {"depth": m.depth, "k": m.max_k, "w": m.bottom_width}
    decl.update(extra)
    return Circuit(C.n, C.nodes, C.output, decl)


# ------------------------------------------------------------ file format
def gate_to_dict(g: Gate) -> dict:
    d: dict = {"kind": g.kind}
    if isinstance(g, (KOr, KAnd)):
        d["k"] = g.k
    elif isinstance(g, SymmetricG):
        d.update(side=g.side, k=g.k, low_values=list(g.low_values), const=g.const)
    elif isinstance(g, TableG):
        d.update(side=g.side, k=g.k, arity=g.table.arity, table_hex=g.table.to_hex())
    elif isinstance(g, Ltf):
        d.update(weights=list(g.weights), theta=g.theta)
    elif isinstance(g, Collapsed):
        d.update(side=g.side, k=g.k, const=g.sat, inner=gate_to_dict(g.inner),
                 groups=list(g.groups), ngroups=g.ngroups)
    return d


def gate_from_dict(d: dict) -> Gate:
    kind = d["kind"]
    if kind == "and":
        return And()
    if kind == "or":
        return Or()
    if kind == "not":
        return Not()
    if kind == "kor":
        return KOr(int(d["k"]))
    if kind == "kand":
        return KAnd(int(d["k"]))
    if kind == "symmetric":
        return SymmetricG(d["side"], int(d["k"]), tuple(d["low_values"]), int(d["const"]))
    if kind == "table":
        return TableG(d["side"], int(d["k"]), BoolFun.from_hex(int(d["arity"]), d["table_hex"]))
    if kind == "ltf":
        return Ltf(tuple(d["weights"]), int(d["theta"]))
    if kind == "collapsed":
        return Collapsed(d["side"], int(d["k"]), int(d["const"]), gate_from_dict(d["inner"]),
                         tuple(d["groups"]), int(d["ngroups"]))
    raise ValueError(f"unknown gate kind {kind!r}")


def _ref_out(r):
    # literals are signed 1-based variable numbers; nodes are "g<index>"
    if isinstance(r, Lit):
        return -(r.var + 1) if r.neg else r.var + 1
    if isinstance(r, Const):
        return {"const": r.value}
    return f"g{int(r)}"


def _ref_in(r, ids: dict):
    if isinstance(r, bool):
        raise ValueError("bad reference")
    if isinstance(r, int):
        if r == 0:
            raise ValueError("literal 0 is not a variable")
        return Lit(abs(r) - 1, r < 0)
    if isinstance(r, dict):
        return Const(int(r["const"]))
    if r not in ids:
        raise DimensionError(f"dangling reference {r!r}")
    return ids[r]


def to_dict(C: Circuit) -> dict:
    d = {
        "version": FORMAT_VERSION,
        "n": C.n,
        "nodes": [
            {"id": f"g{i}", "gate": gate_to_dict(nd.gate), "children": [_ref_out(c) for c in nd.children]}
            for i, nd in enumerate(C.nodes)
        ],
        "output": _ref_out(C.output),
    }
    if C.declared:
        d["declared"] = dict(sorted(C.declared.items()))
    return d


def from_dict(d: dict) -> Circuit:
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported circuit format version {d.get('version')!r}")
    ids: dict = {}
    nodes = []
    for i, nd in enumerate(d["nodes"]):
        kids = tuple(_ref_in(c, ids) for c in nd["children"])
        nodes.append(Node(gate_from_dict(nd["gate"]), kids))
        ids[nd["id"]] = i
    return Circuit(int(d["n"]), nodes, _ref_in(d["output"], ids), d.get("declared"))


def dumps(C: Circuit) -> str:
    return json.dumps(to_dict(C), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> Circuit:
    return from_dict(json.loads(text))


def save(C: Circuit, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(C), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load(path) -> Circuit:
    with open(path) as fh:
        return from_dict(json.load(fh))


def digest(C: Circuit) -> str:
    return hashlib.sha256(dumps(C).encode()).hexdigest()[:16]
