import numpy as np
import pytest

from gc0lab import depthred as dr
from gc0lab.boolfun import DTLeaf, DTNode, random_tree, tree_depth, tree_eval, tree_to_boolfun
from gc0lab.circuit import Circuit, KOr, Or, circuit_metrics, eval_gate, to_boolfun
from gc0lab.constructions import random_gk_over_trees, random_layered


def par2_tree(a, b):
    return DTNode(a, DTNode(b, DTLeaf(0), DTLeaf(1)), DTNode(b, DTLeaf(1), DTLeaf(0)))


def gk_over_trees_table(n, gate, trees):
    xs = range(1 << n)
    return [eval_gate(gate, [tree_eval(T, x) for T in trees]) for x in xs]


# ------------------------------------------------------------ DNFs
def test_dnf_examples():
    assert dr.dt_to_unambiguous_dnf(DTLeaf(1)).paths == ((),)
    dnf = dr.dt_to_unambiguous_dnf(DTNode(0, DTLeaf(0), DTLeaf(1)))
    assert dnf.paths == (((0, 1),),)
    dnf = dr.dt_to_unambiguous_dnf(par2_tree(0, 1), n=2)
    assert sorted(dnf.paths) == [((0, 0), (1, 1)), ((0, 1), (1, 0))]
    assert list(dnf.satisfied_counts(2)) == [0, 1, 1, 0]


def test_zero_paths_read_as_clauses():
    dnf = dr.dt_to_unambiguous_dnf(par2_tree(0, 1), leaf_value=0)
    lits = [dnf.term_literals(p) for p in dnf.paths]
    # each OR clause is falsified exactly on its path
    for path, clause in zip(dnf.paths, lits):
        x = sum(b << v for v, b in path)
        assert not any(((x >> l.var) & 1) ^ l.neg for l in clause)


def test_unambiguity_random_trees():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 15))
        T = random_tree(n, int(rng.integers(0, min(n, 6) + 1)), rng, leaf_stop=0.2)
        for leaf in (0, 1):
            dnf = dr.dt_to_unambiguous_dnf(T, leaf)
            cnt = dnf.satisfied_counts(n)
            assert cnt.max(initial=0) <= 1
            f = tree_to_boolfun(T, n)
            assert np.array_equal(cnt, f.values if leaf else 1 - f.values)


# ------------------------------------------------------------ collapse
def test_collapse_or_of_depth_one_trees():
    trees = [DTNode(i, DTLeaf(0), DTLeaf(1)) for i in range(3)]
    C = dr.collapse_gk_over_dts(3, Or(), trees, w=1)
    assert to_boolfun(C).values.tolist() == gk_over_trees_table(3, Or(), trees)
    assert circuit_metrics(C).depth == 2


def test_collapse_two_or_over_parity_trees():
    trees = [par2_tree(0, 1), par2_tree(2, 3)]
    C = dr.collapse_gk_over_dts(4, KOr(2), trees, w=2)
    assert to_boolfun(C).values.tolist() == gk_over_trees_table(4, KOr(2), trees)
    m = circuit_metrics(C)
    assert m.bottom_width <= 2 and m.depth == 2


@pytest.mark.parametrize("side", ["orlike", "andlike"])
def test_collapse_soundness_and_size(side):
    rng = np.random.default_rng(1 if side == "orlike" else 2)
    for _ in range(30):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(1, 6))
        inst = random_gk_over_trees(n, m, int(rng.integers(1, 4)), int(rng.integers(1, 4)), rng, side)
        C = dr.collapse_gk_over_dts(n, inst.gate, inst.trees, inst.w)
        assert to_boolfun(C).values.tolist() == gk_over_trees_table(n, inst.gate, inst.trees)
        bottom = len(C.nodes) - 1
        assert bottom <= m * 2 ** inst.w
        assert circuit_metrics(C).bottom_width <= inst.w


def test_satisfied_clause_count_identity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(3, 10))
        inst = random_gk_over_trees(n, 4, 2, 3, rng)
        C = dr.collapse_gk_over_dts(n, inst.gate, inst.trees, inst.w)
        tree_ones = sum(tree_to_boolfun(T, n).values.astype(int) for T in inst.trees)
        clause_ones = sum(to_boolfun(Circuit(n, C.nodes[: i + 1], i)).values.astype(int)
                          for i in range(len(C.nodes) - 1))
        assert np.array_equal(tree_ones, clause_ones)


def test_collapse_rejects_deep_trees():
    with pytest.raises(ValueError):
        dr.collapse_gk_over_dts(4, KOr(1), [par2_tree(0, 1)], w=1)


# ------------------------------------------------------------ layering
def test_layerize_preserves_function():
    rng = np.random.default_rng(4)
    for _ in range(20):
        C = random_layered(9, int(rng.integers(2, 5)), 4, 3, 2, rng)
        L = dr.layerize(C)
        assert L.depth == circuit_metrics(C).depth
        assert to_boolfun(L.to_circuit()) == to_boolfun(C)


# ------------------------------------------------------------ pipeline
def test_formula_helpers():
    assert dr.stage_budgets(3, 6) == [6, 12, 24]
    assert dr.final_depth_bound(3, 6) == 42
    assert dr.stage_failure_bound(3, 6) == pytest.approx(12 / 64)
    assert dr.corollary_bound(1, 4, 0) == pytest.approx(2 * 2 ** -4)
    p = dr.stage_probabilities(2, 4, 1, 2)
    assert p[0] == pytest.approx(1 / (128 * 8 ** 0.5))
    assert p[1] == pytest.approx(p[0] / 2)


def test_depth_one_single_stage():
    C = random_layered(8, 1, 1, 4, 2, np.random.default_rng(5))
    res = dr.simplify_pipeline(C, dr.PipelineConfig(w=1, t=4, probabilities=[0.5]), np.random.default_rng(0))
    assert len(res.trace) == 1
    if res.succeeded:
        assert res.verified
        assert tree_depth(res.final) <= 4


def test_pipeline_runs_with_large_probabilities():
    rng = np.random.default_rng(6)
    corpus = [random_layered(12, 3, 4, 3, 2, rng) for _ in range(6)]
    seen_success = False
    for i in range(30):
        C = corpus[i % 6]
        cfg = dr.PipelineConfig(w=2, t=3, probabilities=[0.4, 0.4, 0.4])
        res = dr.simplify_pipeline(C, cfg, np.random.default_rng([7, i]))
        k = circuit_metrics(C).max_k
        for e in res.trace:
            if e["max_k"] is not None:
                assert e["max_k"] <= k
        if res.succeeded:
            seen_success = True
            assert res.verified
            assert tree_depth(res.final) <= dr.final_depth_bound(3, 3)
    assert seen_success


def test_pipeline_deterministic():
    C = random_layered(10, 3, 4, 3, 2, np.random.default_rng(8))
    cfg = dr.PipelineConfig(w=2, t=3, probabilities=[0.3, 0.3, 0.3])
    a = dr.simplify_pipeline(C, cfg, np.random.default_rng(1)).to_json()
    b = dr.simplify_pipeline(C, cfg, np.random.default_rng(1)).to_json()
    assert a == b
