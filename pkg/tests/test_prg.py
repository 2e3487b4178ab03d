import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gc0lab import kernels
from gc0lab import prg
from gc0lab.boolfun import DTLeaf, DTNode, random_tree, tree_to_boolfun, wht_raw
from gc0lab.switching import DepthTwo, Family
from gc0lab.constructions import random_depth_two

POLYS = {1: 0b11, 2: 0b111, 3: 0b1011, 4: 0b10011, 5: 0b100101, 6: 0b1000011,
         7: 0b10000011, 8: 0x11B, 62: 0x4000000000000069}


# ------------------------------------------------------------ fields
@pytest.mark.parametrize("r,poly", sorted(POLYS.items()))
def test_irreducible_table(r, poly):
    assert prg.irreducible(r) == poly
    assert prg.is_irreducible(poly)


def test_reducible_rejected():
    assert not prg.is_irreducible(0b101)  # (x+1)^2
    assert not prg.is_irreducible(0b10001)


@given(st.integers(1, 12), st.data())
def test_field_mul_inverse_free_checks(r, data):
    F = prg.Field(r)
    a = data.draw(st.integers(0, F.mask))
    b = data.draw(st.integers(0, F.mask))
    c = data.draw(st.integers(0, F.mask))
    assert F.mul(a, b) == F.mul(b, a)
    assert F.mul(a, b ^ c) == F.mul(a, b) ^ F.mul(a, c)
    assert F.mul(a, 1) == a


def test_field_has_no_zero_divisors():
    F = prg.Field(5)
    for a in range(1, 32):
        assert sorted(F.mul(a, b) for b in range(32)) == list(range(32))


# ------------------------------------------------------------ small bias
def _max_bias(hist: np.ndarray) -> float:
    spec = wht_raw(hist.astype(np.float64)) / hist.sum()
    return float(np.abs(spec[1:]).max())


def test_eps_biased_n16_all_parity_tests():
    src = prg.eps_biased(16, 1 / 8)
    assert src.seed_length == 14
    assert _max_bias(src.histogram()) <= 1 / 8
    assert src.bias_bound <= 1 / 8


def test_eps_biased_histogram_matches_generation():
    src = prg.eps_biased(10, 1 / 4)
    out = src.generate_many(src.all_seeds())
    assert np.array_equal(np.bincount(out, minlength=1 << 10), src.histogram())


def test_eps_biased_deterministic_and_vacuous():
    src = prg.eps_biased(12, 0.25)
    assert src.generate(12345) == src.generate(12345)
    vac = prg.eps_biased(4, 4.0)
    assert vac.field.r == 1 and len(vac.histogram()) == 16


def test_aghp_backends_agree():
    F = prg.Field(9)
    rng = np.random.default_rng(0)
    xs = rng.integers(0, 512, 500)
    ys = rng.integers(0, 512, 500)
    a = kernels.aghp_words_np(xs, ys, 20, 9, F.low)
    b = kernels.aghp_words_nb(xs, ys, 20, 9, F.low)
    assert np.array_equal(a, b)
    assert np.array_equal(kernels.aghp_histogram_np(8, 5, prg.Field(5).low),
                          kernels.aghp_histogram_nb(8, 5, prg.Field(5).low))


def test_aghp_matches_bitwise_definition():
    src = prg.eps_biased(9, 1 / 8)
    seeds = src.all_seeds()[::37]
    out = src.generate_many(seeds)
    for (x, y), word in zip(seeds, out):
        for i in range(9):
            xi = 1
            for _ in range(i):
                xi = src.field.mul(xi, int(x))
            assert (int(word) >> i) & 1 == bin(xi & int(y)).count("1") % 2


# ------------------------------------------------------------ k-wise
def _marginals(hist, n, positions):
    xs = np.arange(hist.size)
    key = sum(((xs >> p) & 1) << j for j, p in enumerate(positions))
    return np.bincount(key, weights=hist, minlength=1 << len(positions)) / hist.sum()


@pytest.mark.parametrize("n,k", [(6, 1), (8, 2), (10, 3), (9, 3)])
def test_k_wise_exact_uniform(n, k):
    src = prg.k_wise_exact(n, k)
    hist = src.histogram()
    for pos in itertools.combinations(range(n), k):
        m = _marginals(hist, n, pos) * hist.sum()
        assert np.all(m == hist.sum() // 2 ** k)


@pytest.mark.parametrize("n,k,eps", [(8, 2, 0.1), (10, 3, 0.1), (10, 3, 0.25)])
def test_eps_k_wise_close(n, k, eps):
    hist = prg.eps_k_wise(n, k, eps).histogram()
    for pos in itertools.combinations(range(n), k):
        assert np.abs(_marginals(hist, n, pos) - 2 ** -k).max() < eps


def test_k_zero_any_distribution():
    src = prg.k_wise_exact(5, 0)
    assert src.seed_length == 0
    assert src.histogram().sum() == 1


# ------------------------------------------------------------ hash partition
@given(st.integers(1, 12), st.sampled_from([1, 2, 4, 8]), st.integers(1, 3), st.integers(0, 2 ** 20))
def test_partition_total_and_disjoint(n, ell, ind, seed):
    H = prg.HashPartition(n, ell, ind)
    masks = H.indicators(seed % (1 << H.seed_length))
    assert len(masks) == ell
    union = 0
    for m in masks:
        assert union & m == 0
        union |= m
    assert union == (1 << n) - 1


@pytest.mark.parametrize("n,ell", [(6, 2), (8, 4), (7, 8)])
def test_pairwise_collision_probability(n, ell):
    H = prg.HashPartition(n, ell, 2)
    vals = H.values(H.all_seeds())
    S = vals.shape[0]
    for j1, j2 in itertools.combinations(range(n), 2):
        for i in range(ell):
            hits = np.count_nonzero((vals[:, j1] == i) & (vals[:, j2] == i))
            assert hits * ell * ell == S


def test_full_independence_is_uniform():
    n, ell = 4, 2
    H = prg.HashPartition(n, ell, n)
    vals = H.values(H.all_seeds())
    codes = (vals * (ell ** np.arange(n))).sum(axis=1)
    counts = np.bincount(codes, minlength=ell ** n)
    assert counts.min() == counts.max()


def test_hash_requires_power_of_two():
    with pytest.raises(ValueError):
        prg.HashPartition(5, 3, 2)


# ------------------------------------------------------------ dt prg
def test_dt_prg_constant_and_single_var():
    src = prg.dt_prg(10, 1, 1 / 8)
    assert prg.fooling_error_exhaustive(np.zeros(1 << 10, np.uint8), src) == 0
    T = DTNode(3, DTLeaf(0), DTLeaf(1))
    assert prg.fooling_error_exhaustive(tree_to_boolfun(T, 10).values, src) <= 1 / 8


def test_dt_prg_fools_depth_three_trees():
    src = prg.dt_prg(12, 3, 1 / 8)
    hist = src.histogram().astype(np.float64)
    hist /= hist.sum()
    rng = np.random.default_rng(1)
    for _ in range(25):
        f = tree_to_boolfun(random_tree(12, 3, rng), 12).values
        assert abs(hist @ f - f.mean()) <= 1 / 8


# ------------------------------------------------------------ gc0 prg
def small_gc0(source="exact"):
    return prg.GC0PRG(10, 8, 2, 2, 0.25, prg.GC0Config(ell=4, t=3, source=source))


def test_gc0_deterministic_and_reference_agrees():
    G = small_gc0()
    keys = np.arange(40, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    a = G.generate_many(keys)
    b = G.generate_many(keys)
    assert np.array_equal(a, b)
    for key, word in zip(keys[:10], a[:10]):
        assert G.reference(int(key)) == int(word)
    assert prg.gc0_prg(10, 8, 2, 2, 0.25, 7, G.cfg) == G.generate(7)


def test_gc0_hybrid_locality():
    G = small_gc0()
    rng = np.random.default_rng(2)
    for key in rng.integers(0, 2 ** 63, 10):
        key = int(key)
        masks = G.hash_masks(key)
        base = G.reference(key)
        for i in range(G.ell):
            fresh = int(rng.integers(0, 1 << 10))
            # X_i replaced by fresh bits everywhere H_i is off, kept on H_i
            own = G.reference(key, {i: _x_i(G, key, i) & masks[i] | fresh & ~masks[i]})
            assert own == base


def _x_i(G, key, i):
    k = prg.derive(np.array([key], dtype=np.uint64), prg.LABEL_X)
    ki = prg.derive(k, np.array([i], dtype=np.uint64))
    if isinstance(G.X, prg.GC0PRG):
        return G.X.reference(int(ki[0]))
    return int(G.X.generate_many(prg.derive_seed(ki, G.X.words, G.X.field.r))[0])


def test_gc0_depth_one_uses_dt_prg():
    G = prg.GC0PRG(12, 8, 1, 2, 0.1, prg.GC0Config(ell=4, t=3))
    assert G.X.kind == "eps_biased"
    assert G.components()["X"]["kind"] == "eps_biased"


def test_field_degree_overflow():
    with pytest.raises(prg.ParameterOverflow):
        prg.eps_biased(16, 2.0 ** -60)


def test_gc0_default_constants_dwarf_output_length():
    G = prg.GC0PRG(14, 24, 2, 2, 0.1)
    assert G.t == math.ceil(10 * math.log2(24 / 0.1))
    assert G.ell == 1024
    assert G.seed_length > 2 ** 20


def test_seed_length_formulas():
    m, d, w, eps = 16, 2, 2, 0.1
    lm = 4
    expect = (w * lm + lm * lm) * math.log2(m / eps) * math.log2(lm)
    assert prg.seed_length_formula(m, d, w, eps) == pytest.approx(expect)
    assert prg.final_seed_length_formula(m, d, eps) == pytest.approx(lm ** 2 * math.log2(m / eps) * 2)
    G = small_gc0("eps")
    comp = G.components()
    assert comp["seed_length"] == G.seed_length
    assert G.seed_length == comp["Y"]["seed_length"] + comp["H"]["seed_length"] + G.ell * comp["X"]["seed_length"]


# ------------------------------------------------------------ derandomized switching
def _fam(seed):
    rng = np.random.default_rng(seed)
    return Family([DepthTwo.from_circuit(random_depth_two(6, 3, 2, 2, rng)) for _ in range(2)])


def test_derandomized_vacuous_bound_flagged():
    row = prg.derandomized_switching_experiment(_fam(0), 4, 2, None, 2, 1, mode="mc", trials=50, seed=1, z_eps=1.0)
    assert row["vacuous"] and row["bound"] > 1


def test_derandomized_exhaustive_uniform_z():
    fam = _fam(1)
    row = prg.derandomized_switching_experiment(fam, 4, 2, None, 2, 1, mode="exhaustive")
    assert 0 <= row["estimate"] <= 1
    assert row["trials"] == (1 << prg.HashPartition(6, 4, 2).seed_length) * 64
    if not row["vacuous"]:
        assert row["estimate"] <= row["bound"]


def test_derandomized_with_kwise_z_matches_uniform_when_exact():
    fam = _fam(2)
    uni = prg.derandomized_switching_experiment(fam, 4, 2, None, 2, 1, mode="exhaustive")
    full = prg.derandomized_switching_experiment(fam, 4, 2, prg.k_wise_exact(6, 6), 2, 1, mode="exhaustive")
    assert uni["estimate"] == full["estimate"]
