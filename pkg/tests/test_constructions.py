import math
from fractions import Fraction

import numpy as np
import pytest

from gc0lab import constructions as cs
from gc0lab.boolfun import correlation_exact, parity
from gc0lab.circuit import SymmetricG, circuit_metrics, to_boolfun, validate_gk, gate_k
from gc0lab.switching import DepthTwo


def test_parity_as_gk_andw_small_cases():
    assert to_boolfun(cs.parity_as_gk_andw(1, 1)) == parity(1)
    assert to_boolfun(cs.parity_as_gk_andw(2, 2)) == parity(4)


@pytest.mark.parametrize("k,w", [(1, 3), (2, 3), (3, 2), (4, 3), (3, 4), (2, 5)])
def test_parity_as_gk_andw_equals_parity(k, w):
    C = cs.parity_as_gk_andw(k, w)
    assert to_boolfun(C) == parity(k * w)
    m = circuit_metrics(C)
    assert m.depth == 2 and m.bottom_width == w and m.max_k == k
    assert m.gates == k * 2 ** (w - 1) + 1


def test_parity_as_gk_andw_blocks_unambiguous():
    k, w = 3, 3
    F = DepthTwo.from_circuit(cs.parity_as_gk_andw(k, w))
    xs = np.arange(1 << (k * w))
    sat = np.stack([np.array([c.value(int(x)) for x in xs]) for c in F.clauses])
    per_block = sat.reshape(k, 2 ** (w - 1), -1).sum(axis=1)
    assert per_block.max() <= 1
    assert sat.sum(axis=0).max() <= k


@pytest.mark.parametrize("n,k,d", [(8, 2, 3), (12, 3, 3), (16, 2, 3), (9, 3, 2), (16, 4, 4), (10, 1, 3)])
def test_tight_parity_circuit(n, k, d):
    C = cs.tight_parity_circuit(n, k, d)
    assert to_boolfun(C) == parity(n)
    # small blocks may need fewer alternations than d - 1
    assert circuit_metrics(C).depth <= d
    assert circuit_metrics(C).max_k <= k


def test_tight_parity_degenerate_single_gate():
    C = cs.tight_parity_circuit(5, 5, 2)
    assert len(C.nodes) == 1 and isinstance(C.nodes[0].gate, SymmetricG)
    assert to_boolfun(C) == parity(5)


def test_tight_parity_size_grows_with_exponent():
    sizes = [circuit_metrics(cs.tight_parity_circuit(n, 2, 3)).size for n in (8, 12, 16)]
    assert sizes == sorted(sizes)
    assert cs.tight_parity_size_exponent(16, 4, 3) == pytest.approx(2.0)


@pytest.mark.parametrize("n,d", [(8, 3), (4, 2), (9, 2), (16, 2), (16, 4), (10, 3), (13, 2), (1, 1)])
def test_parity_tree(n, d):
    C = cs.parity_tree(n, d)
    assert to_boolfun(C) == parity(n)
    assert circuit_metrics(C).depth == d


def test_parity_tree_gate_count():
    for n, d in [(8, 3), (16, 2), (16, 4), (27, 3)]:
        b = round(n ** (1 / d))
        m = circuit_metrics(cs.parity_tree(n, d))
        assert m.gates == sum(n // b ** i for i in range(1, d + 1))


def test_parity_tree_n4_d2_shape():
    C = cs.parity_tree(4, 2)
    assert len(C.nodes) == 3
    assert all(len(nd.children) == 2 for nd in C.nodes)


def test_correlation_params_desk():
    P = cs.correlation_params(12, 2, 2, 8)
    assert (P.M, P.B) == (3, 4)


def test_correlation_single_block_is_parity():
    C = cs.correlation_circuit(8, 2, 2, 256)
    assert cs.correlation_params(8, 2, 2, 256).B == 1
    assert to_boolfun(C) == parity(8)
    assert cs.correlation_closed_form(1, 2) == 1


@pytest.mark.parametrize("k", [1, 2])
def test_correlation_matches_closed_form(k):
    C = cs.correlation_circuit(12, k, 2, 8)
    exact = correlation_exact(to_boolfun(C), parity(12))
    assert exact == cs.correlation_closed_form(4, k)
    assert exact >= cs.correlation_triangle_bound(4, k)


def test_closed_form_values():
    # B = 4: P = (1, 4, 6, 4, 1)/16
    assert cs.correlation_closed_form(4, 1) == Fraction(1 + 4 + 6 - 4 + 1, 16)
    assert cs.correlation_closed_form(4, 2) == Fraction(1 + 4 + 6 - 4 + 1, 16)
    assert cs.correlation_closed_form(4, 3) == Fraction(1 + 4 + 6 + 4 + 1, 16)
    assert cs.correlation_triangle_bound(4, 1) == Fraction(5 - 11, 16)


def test_remark_preset():
    C, info = cs.remark_parity_preset(12, 2)
    assert to_boolfun(C) == parity(12)
    assert info["k"] == math.ceil(2 * math.log2(6))
    assert info["w"] == math.ceil(12 / info["k"])


def test_corpus_digests_deterministic():
    params = {"kind": "gk_andw", "n": 10, "m": 6, "k": 2, "w": 3, "count": 12}
    a = cs.corpus_digests(cs.random_gc0_corpus(params, np.random.default_rng(1)))
    b = cs.corpus_digests(cs.random_gc0_corpus(params, np.random.default_rng(1)))
    c = cs.corpus_digests(cs.random_gc0_corpus(params, np.random.default_rng(2)))
    assert a == b and a != c


@pytest.mark.parametrize("kind", ["gk_andw", "andlike_or", "layered"])
def test_corpus_gates_validate(kind):
    corpus = cs.random_gc0_corpus({"kind": kind, "n": 10, "k": 3, "count": 20}, np.random.default_rng(3))
    for C in corpus:
        m = circuit_metrics(C)
        assert C.declared["depth"] == m.depth
        assert m.max_k <= 3
        for nd in C.nodes:
            side, k = gate_k(nd.gate)
            assert validate_gk(nd.gate, k, len(nd.children)) == side


def test_random_gk_gate_is_valid():
    rng = np.random.default_rng(4)
    for _ in range(200):
        side = "orlike" if rng.integers(0, 2) else "andlike"
        k = int(rng.integers(1, 4))
        fan = int(rng.integers(1, 8))
        g = cs.random_gk_gate(side, k, fan, rng)
        assert validate_gk(g, k, fan)
        cols = np.array([[(x >> i) & 1 for x in range(1 << fan)] for i in range(fan)], dtype=np.uint8)
        assert cols.shape == (fan, 1 << fan)


def test_cap():
    with pytest.raises(Exception):
        cs.parity_as_gk_andw(7, 3)
