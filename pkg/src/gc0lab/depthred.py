"""Collapsing G(k) over decision trees, and the stage-by-stage simplification
of a GC0_d(k) circuit into a shallow decision tree under random restrictions."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import boolfun as bf
from .boolfun import (
    CapacityError,
    DTLeaf,
    DTNode,
    Restriction,
    dt_depth,
    optimal_tree,
    tree_depth,
    tree_to_boolfun,
)
from .circuit import (
    ANDLIKE,
    ORLIKE,
    TABLE_FANIN_CAP,
    And,
    Circuit,
    Collapsed,
    Const,
    KAnd,
    KOr,
    Lit,
    Ltf,
    Node,
    Not,
    Or,
    SymmetricG,
    TableG,
    digest,
    eval_gate,
    gate_k,
    gate_table,
    heights,
    ltf_to_gk,
    prune,
    to_boolfun,
)
from .switching import DepthTwo

DNF_DEPTH_CAP = 20
UNAMBIGUITY_CHECK_CAP = 14


# ------------------------------------------------------------ 1-path DNFs
@dataclass(frozen=True)
class UnambiguousDnf:
    """Root-to-leaf paths of a tree ending at `leaf_value`; each path is a
    tuple of (var, bit) and reads as an AND term (or, for 0-paths, the OR
    clause falsified exactly on that path)."""

    paths: tuple
    leaf_value: int = 1

    def term_literals(self, path) -> list[Lit]:
        # literal true on the path for 1-paths, false on the path for 0-paths
        if self.leaf_value == 1:
            return [Lit(v, neg=(b == 0)) for v, b in path]
        return [Lit(v, neg=(b == 1)) for v, b in path]

    def satisfied_counts(self, n: int) -> np.ndarray:
        """How many paths each input follows."""
        xs = np.arange(1 << n, dtype=np.int64)
        cnt = np.zeros(xs.size, dtype=np.int64)
        for path in self.paths:
            ok = np.ones(xs.size, dtype=bool)
            for v, b in path:
                ok &= ((xs >> v) & 1) == b
            cnt += ok
        return cnt

    def is_unambiguous(self, n: int) -> bool:
        return bool(self.satisfied_counts(n).max(initial=0) <= 1)


def dt_to_unambiguous_dnf(T, leaf_value: int = 1, n: int | None = None) -> UnambiguousDnf:
    if tree_depth(T) > DNF_DEPTH_CAP:
        raise CapacityError(f"tree depth above {DNF_DEPTH_CAP}")
    paths = tuple(p for p, v in bf.tree_paths(T) if v == leaf_value)
    dnf = UnambiguousDnf(paths, leaf_value)
    if n is not None and n <= UNAMBIGUITY_CHECK_CAP and not dnf.is_unambiguous(n):
        raise AssertionError("tree paths overlap")
    return dnf


# -------------------------------------------------------------- collapse
def negate_tree(T):
    if isinstance(T, DTLeaf):
        return DTLeaf(1 - T.value)
    return DTNode(T.var, negate_tree(T.lo), negate_tree(T.hi))


def _normalise(gate, trees):
    """Negative-weight LTF inputs: negate the tree, use the certified gate."""
    if isinstance(gate, Ltf) and min(gate.weights, default=0) < 0:
        cert = ltf_to_gk(gate.weights, gate.theta)
        trees = [negate_tree(T) if i in cert.negation_mask else T for i, T in enumerate(trees)]
        return cert.gate, trees
    return gate, list(trees)


def count_profile(gate, fan: int, side: str) -> list[int] | None:
    """gate's value with c ones (orlike) / c zeros (andlike) for c = 0..fan,
    or None when the gate is not symmetric."""
    if isinstance(gate, (And, Or, Not, KOr, KAnd, SymmetricG)):
        sym = True
    elif isinstance(gate, (TableG, Ltf)) and fan <= TABLE_FANIN_CAP:
        sym = gate_table(gate, fan).weight_profile() is not None
    else:
        sym = False
    if not sym:
        return None
    out = []
    for c in range(fan + 1):
        bits = [1] * c + [0] * (fan - c)
        if side == ANDLIKE:
            bits = [1 - b for b in bits]
        out.append(eval_gate(gate, bits))
    return out


def collapse_gk_over_dts(n: int, gate, trees: Sequence, w: int | None = None) -> Circuit:
    """G(k) over depth-w trees -> a G(k) gate over AND_w (OR_w if andlike) clauses.

    Orlike: one AND term per 1-path; andlike: one OR clause per 0-path.  The
    new top reads the saturated value once k clauses (k falsified clauses)
    fire, else the old gate on the per-tree OR (AND) of its clauses.
    """
    gate, trees = _normalise(gate, trees)
    sk = gate_k(gate)
    if sk is None:
        raise ValueError("top gate is not G(k)")
    side, k = sk
    m = len(trees)
    if w is not None and any(tree_depth(T) > w for T in trees):
        raise ValueError("a tree is deeper than w")
    leaf = 1 if side == ORLIKE else 0
    bottom = And if side == ORLIKE else Or
    nodes: list[Node] = []
    groups: list[int] = []
    for j, T in enumerate(trees):
        dnf = dt_to_unambiguous_dnf(T, leaf)
        for path in dnf.paths:
            nodes.append(Node(bottom(), tuple(dnf.term_literals(path))))
            groups.append(j)
    fan = len(nodes)
    if w is not None and fan > m * 2 ** w:
        raise AssertionError("collapse produced more than m 2^w clauses")
    sat = eval_gate(gate, [leaf] * m)
    profile = count_profile(gate, m, side)
    if profile is not None:
        low = [profile[c] if c <= m else sat for c in range(k)]
        top = SymmetricG(side, k, tuple(low), sat)
    else:
        top = Collapsed(side, k, sat, gate, tuple(groups), m)
        if fan <= TABLE_FANIN_CAP:
            top = TableG(side, k, gate_table(top, fan))
    nodes.append(Node(top, tuple(range(fan))))
    return Circuit(n, tuple(nodes), len(nodes) - 1)


# ------------------------------------------------------------ layering
@dataclass
class Layered:
    """Circuit as a bottom frontier of depth-2 pieces plus gate layers above.

    `upper[i]` is a list of (gate, child indices into the layer below); the
    layer below upper[0] is the frontier.  The output is the single gate of
    the last layer (or the single frontier piece if there are no layers).
    """

    n: int
    frontier: list
    upper: list

    @property
    def depth(self) -> int:
        return 1 + len(self.upper)

    def to_circuit(self) -> Circuit:
        nodes: list[Node] = []
        below = []
        for F in self.frontier:
            kids = []
            for c in F.clauses:
                lits = tuple(~l if F.dual else l for l in c.lits)
                nodes.append(Node(Or() if F.dual else And(), lits))
                kids.append(len(nodes) - 1)
            nodes.append(Node(F.gate, tuple(kids)))
            below.append(len(nodes) - 1)
        for layer in self.upper:
            cur = []
            for g, ch in layer:
                nodes.append(Node(g, tuple(below[c] for c in ch)))
                cur.append(len(nodes) - 1)
            below = cur
        return Circuit(self.n, tuple(nodes), below[0])


def _over_literals(n: int, gate, lits: Sequence[Lit]) -> DepthTwo:
    if isinstance(gate, Ltf) and min(gate.weights, default=0) < 0:
        cert = ltf_to_gk(gate.weights, gate.theta)
        lits = [~l if i in cert.negation_mask else l for i, l in enumerate(lits)]
        gate = cert.gate
    side, k = gate_k(gate)
    return DepthTwo._build(n, gate, k, [[l] for l in lits], dual=(side == ANDLIKE))


def layerize(C: Circuit) -> Layered:
    """Layer a circuit, padding skipped levels with identity OR_1 gates."""
    C = prune(C)
    if not isinstance(C.output, (int, np.integer)):
        raise ValueError("output is a literal or constant; nothing to simplify")
    hs = heights(C)
    d = hs[C.output]
    for node in C.nodes:
        if any(isinstance(c, Const) for c in node.children):
            raise ValueError("fold constants before layering")
    layers: list[list] = [[] for _ in range(d + 1)]  # layers[h]: (gate, children refs)
    index: dict = {}

    def place(ref, h):
        """Index in layer h of a node computing `ref`."""
        key = (ref, h)
        if key in index:
            return index[key]
        if isinstance(ref, Lit):
            if h == 0:
                return ref
            child = place(ref, h - 1)
            gate = Or()
        elif hs[ref] == h:
            node = C.nodes[ref]
            layers[h].append((node.gate, [place(c, h - 1) for c in node.children]))
            index[key] = len(layers[h]) - 1
            return index[key]
        else:
            child = place(ref, h - 1)
            gate = Or()
        layers[h].append((gate, [child]))
        index[key] = len(layers[h]) - 1
        return index[key]

    place(int(C.output), d)
    frontier = [_over_literals(C.n, g, ch) for g, ch in layers[1]]
    return Layered(C.n, frontier, [layers[h] for h in range(2, d + 1)])


# -------------------------------------------------------------- pipeline
def stage_probabilities(d: int, m: int, k: int, w: int) -> list[float]:
    base = (m * 2 ** k) ** (1 / w)
    return [1 / (128 * base)] + [1 / (128 * w * base)] * (d - 1)


def stage_budgets(d: int, t: int) -> list[int]:
    return [2 ** i * t for i in range(d)]


def final_depth_bound(d: int, t: int) -> int:
    return (2 ** d - 1) * t


def corollary_bound(d: int, t: int, k: int) -> float:
    """Failure bound of the corollary: 2 * 2^{-t/(2^d - 1) + k}."""
    return 2 * 2 ** (-t / (2 ** d - 1) + k)


def stage_failure_bound(d: int, t: int) -> float:
    return 4 * d * 2 ** (-t)


def _restricted_dt(F: DepthTwo, stars: int, values: int, cache: dict) -> int:
    key = (id(F), stars, values)
    if key not in cache:
        f = bf.restrict_compact(F.truth_table, Restriction(F.n, stars, values))
        cache[key] = dt_depth(f)
    return cache[key]


class StageFailure(Exception):
    pass


def _common_tree(L: Layered, stars: int, values: int, w: int, budget: int, cache: dict):
    """Canonical common partial tree: expand the first piece with DT > w by
    querying the next clause of its canonical tree.  Leaves carry the
    (stars, values) reached.  Raises StageFailure past `budget` queries."""
    for F in L.frontier:
        if _restricted_dt(F, stars, values, cache) > w:
            break
    else:
        return ("leaf", stars, values)
    clause = next(c for c in F.clauses if c.status(stars, values) == 2)
    unk = clause.vars & stars
    q = unk.bit_count()
    if q > budget:
        raise StageFailure
    qvars = [v for v in range(L.n) if unk >> v & 1]

    def branch(i, s, v):
        if i == len(qvars):
            return _common_tree(L, s, v, w, budget - q, cache)
        x = qvars[i]
        s2 = s & ~(1 << x)
        return DTNode(x, branch(i + 1, s2, v), branch(i + 1, s2, v | (1 << x)))

    return branch(0, stars, values)


def _collapse_at(L: Layered, stars: int, values: int, w: int) -> Layered:
    """Replace the frontier by depth-w trees and collapse them into the next layer."""
    rho = Restriction(L.n, stars, values)
    trees = [optimal_tree(bf.restrict(F.truth_table, rho)) for F in L.frontier]
    if any(tree_depth(T) > w for T in trees):
        raise AssertionError("leaf of the common tree left a deep piece")
    new_frontier = []
    for gate, ch in L.upper[0]:
        C2 = collapse_gk_over_dts(L.n, gate, [trees[c] for c in ch], w)
        new_frontier.append(DepthTwo.from_circuit(C2))
    return Layered(L.n, new_frontier, L.upper[1:])


def _prune_tree(T, rho: Restriction):
    """Apply a restriction to a partial tree: fixed variables pick a branch."""
    if isinstance(T, DTNode):
        if not rho.stars >> T.var & 1:
            return _prune_tree(T.hi if rho.values >> T.var & 1 else T.lo, rho)
        return DTNode(T.var, _prune_tree(T.lo, rho), _prune_tree(T.hi, rho))
    return T


def _map_leaves(T, fn, stars, values):
    if isinstance(T, DTNode):
        s = stars & ~(1 << T.var)
        return DTNode(T.var, _map_leaves(T.lo, fn, s, values), _map_leaves(T.hi, fn, s, values | (1 << T.var)))
    return fn(T, stars, values)


def _leaves(T):
    if isinstance(T, DTNode):
        yield from _leaves(T.lo)
        yield from _leaves(T.hi)
    else:
        yield T


def _partial_depth(T) -> int:
    if isinstance(T, DTNode):
        return 1 + max(_partial_depth(T.lo), _partial_depth(T.hi))
    return 0


@dataclass
class PipelineConfig:
    w: int
    t: int
    m: int | None = None  # size parameter in the stage probabilities; default circuit size
    probabilities: list | None = None
    budgets: list | None = None


@dataclass
class PipelineResult:
    succeeded: bool
    trace: list
    final: object  # DecisionTree or None
    rho: Restriction
    depth_bound: int
    verified: bool | None = None

    def to_json(self) -> dict:
        return {
            "succeeded": self.succeeded,
            "rho": str(self.rho),
            "final_depth": tree_depth(self.final) if self.final is not None else None,
            "depth_bound": self.depth_bound,
            "verified": self.verified,
            "stages": self.trace,
        }


def _tree_digest(T) -> str:
    parts = []
    for leaf in _leaves(T):
        if isinstance(leaf, _LeafState):
            parts.append(digest(leaf.layered.to_circuit()))
        elif isinstance(leaf, DTLeaf):
            parts.append(str(leaf.value))
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


@dataclass
class _LeafState:
    layered: Layered


def simplify_pipeline(C: Circuit, cfg: PipelineConfig, rng: np.random.Generator, verify: bool = True) -> PipelineResult:
    """Restrict and collapse stage by stage until one decision tree remains.

    Stage i samples rho_i from R_{p_i}, restricts the current tree, then at
    every leaf either builds a canonical common partial tree of depth <= t_i
    and collapses (non-final stages) or replaces the remaining depth-2 piece
    by an optimal tree of depth <= t_i (final stage).  A stage that cannot
    meet its budget ends the run with succeeded = False.
    """
    if C.n > bf.DT_DEPTH_CAP:
        raise CapacityError(f"pipeline needs n <= {bf.DT_DEPTH_CAP}")
    L0 = layerize(C)
    d = L0.depth
    size = sum(len(nd.children) for nd in prune(C).nodes)
    k = max(gate_k(F.gate)[1] for F in L0.frontier)
    for layer in L0.upper:
        for g, _ in layer:
            gk = gate_k(g)
            k = max(k, gk[1] if gk else ltf_to_gk(g.weights, g.theta).balance)
    m = cfg.m if cfg.m is not None else size
    ps = cfg.probabilities or stage_probabilities(d, m, k, cfg.w)
    ts = cfg.budgets or stage_budgets(d, cfg.t)
    n = C.n
    tree = _LeafState(L0)
    rho = Restriction.all_star(n)
    trace = []
    for i in range(d):
        rho_i = bf.sample_rp(n, ps[i], rng)
        rho = bf.compose(rho, rho_i)
        tree = _prune_tree(tree, rho)
        last = i == d - 1
        cache: dict = {}

        def step(leaf, stars, values):
            L = leaf.layered
            if last:
                f = bf.restrict(L.frontier[0].truth_table, Restriction(n, stars, values))
                if dt_depth(f) > ts[i]:
                    raise StageFailure
                return optimal_tree(f)
            sub = _common_tree(L, stars, values, cfg.w, ts[i], cache)
            return _map_leaves(sub, lambda lf, s, v: _LeafState(_collapse_at(L, s, v, cfg.w)), stars, values)

        try:
            tree = _map_leaves(tree, step, rho.stars, rho.values)
            ok = True
        except StageFailure:
            ok = False
        entry = {
            "stage": i,
            "p": ps[i],
            "t": ts[i],
            "live": rho.star_count,
            "succeeded": ok,
            "resulting_depth": _partial_depth(tree) if ok else None,
            "max_k": _max_k(tree) if ok and not last else None,
            "circuit_digest": _tree_digest(tree) if ok else None,
        }
        trace.append(entry)
        if not ok:
            return PipelineResult(False, trace, None, rho, final_depth_bound(d, cfg.t))
    res = PipelineResult(True, trace, tree, rho, final_depth_bound(d, cfg.t))
    if tree_depth(tree) > sum(ts):
        raise AssertionError("final tree deeper than the stage budgets allow")
    if verify:
        res.verified = tree_to_boolfun(tree, n) == bf.restrict(to_boolfun(C), rho)
    return res


def _max_k(T) -> int:
    ks = [0]
    for leaf in _leaves(T):
        if isinstance(leaf, _LeafState):
            ks += [F.k for F in leaf.layered.frontier]
    return max(ks)
