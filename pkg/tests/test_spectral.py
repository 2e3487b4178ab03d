import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gc0lab import spectral as sp
from gc0lab.boolfun import (
    BoolFun,
    Restriction,
    majority,
    parity,
    random_tree,
    restrict_compact,
    symmetric,
    tail_weight,
    wht,
)
from gc0lab.circuit import Or, to_boolfun
from gc0lab.constructions import parity_tree, random_depth_two, random_gc0_corpus

from conftest import boolfuns


def tree_circuit(T, n):
    """A depth-t tree as OR of its 1-path ANDs."""
    from gc0lab.depthred import collapse_gk_over_dts

    return collapse_gk_over_dts(n, Or(), [T])


# ------------------------------------------------------------ ESFT
def test_esft_bound_formula():
    assert sp.esft_bound(80, 1, 1, 0, 1) == pytest.approx(1.0)
    q = 2 + math.log2(8)
    assert sp.esft_bound(10, 2, 2, 2, 8) == pytest.approx(16 * 2 ** (-10 / (160 * 128 * q) + 2))


def test_esft_params_depth_two():
    C = random_depth_two(8, 5, 2, 3, np.random.default_rng(0))
    P = sp.esft_params(C)
    assert (P.d, P.w, P.k, P.m, P.padded) == (1, 3, 2, 1, False)


def test_esft_params_padded_for_symmetric_bottoms():
    P = sp.esft_params(parity_tree(8, 3))
    assert P.padded and P.d == 3 and P.w == 1 and P.m == 7


def test_esft_parity_tree():
    rep = sp.esft_report(parity_tree(8, 3))
    assert rep.violations() == []
    assert rep.monotone()
    for r in rep.rows:
        assert r.measured == pytest.approx(1.0 if r.ell <= 8 else 0.0, abs=1e-12)
        assert r.vacuous or r.measured <= r.bound


def test_esft_tree_has_no_high_mass():
    rng = np.random.default_rng(1)
    for _ in range(10):
        T = random_tree(9, 3, rng)
        rep = sp.esft_report(tree_circuit(T, 9))
        assert all(r.measured <= 1e-12 for r in rep.rows if r.ell >= 4)


def test_esft_corpus_non_vacuous_cells():
    rng = np.random.default_rng(2)
    corpus = random_gc0_corpus({"kind": "gk_andw", "n": 10, "m": 6, "k": 2, "w": 2, "count": 15}, rng)
    non_vacuous = 0
    for C in corpus:
        rep = sp.esft_report(C, ell_grid=range(0, 11))
        assert abs(rep.total - 1) <= 1e-9
        assert rep.monotone()
        assert rep.violations() == []
        non_vacuous += sum(not r.vacuous for r in rep.rows)
    # all cells are vacuous at n = 10 with these constants; recorded, not hidden
    assert non_vacuous == 0


def test_tail_report_serialisation():
    rep = sp.esft_report(parity_tree(4, 2))
    assert rep.to_csv().splitlines()[0] == "ell,measured,bound,vacuous,d,w,k,m"
    d = rep.to_dict()
    assert len(d["rows"]) == 6 and "bound_formula" in d
    json.dumps(d)


# ------------------------------------------------------------ restriction tails
@given(boolfuns(max_n=7), st.floats(0, 1), st.integers(0, 8))
def test_restricted_tail_exact_matches_enumeration(f, p, level):
    # E_rho W^{>=level}[f|rho] by summing over all 3^n restrictions
    n = f.arity
    total = 0.0
    for code in range(3 ** n):
        stars = values = 0
        prob = 1.0
        c = code
        for i in range(n):
            digit = c % 3
            c //= 3
            if digit == 2:
                stars |= 1 << i
                prob *= p
            else:
                values |= digit << i
                prob *= (1 - p) / 2
        if prob == 0:
            continue
        g = restrict_compact(f, Restriction(n, stars, values))
        if level <= g.arity:
            total += prob * tail_weight(wht(g), level)
    assert sp.restricted_tail_exact(wht(f), p, level) == pytest.approx(total, abs=1e-9)


def test_floor_level_needed():
    # the real-valued level ell*p would give 1 > 0.704 here
    res = sp.restriction_tail_check(parity(3), 0.4, 3, trials=500, seed=1)
    assert res["level"] == 1
    assert res["holds_exact"] and res["holds"]
    real_level = math.ceil(3 * 0.4)
    assert 2 * sp.restricted_tail_exact(wht(parity(3)), 0.4, real_level) < 1.0


def test_tail_check_degenerate_cases():
    res = sp.restriction_tail_check(majority(5), 1.0, 3, trials=64)
    assert res["rhs_estimate"] == pytest.approx(2 * res["lhs"])
    res = sp.restriction_tail_check(BoolFun.constant(5, 1), 0.5, 2, trials=64)
    assert res["lhs"] == 0 and res["rhs_exact"] == 0 and res["holds"]


def test_tail_check_parity_concentrates():
    res = sp.restriction_tail_check(parity(8), 0.5, 6, trials=1000, seed=3)
    assert res["holds"] and res["holds_exact"]
    assert abs(res["rhs_estimate"] - res["rhs_exact"]) <= 5 * res["sigma"] + 1e-9


# ------------------------------------------------------------ sparse sets
@given(boolfuns(min_n=1, max_n=8), st.sampled_from([0.5, 0.25, 0.1, 0.05]))
def test_fmc_set_captures_mass(f, eps):
    A = sp.fmc_set(wht(f), eps)
    assert A.residual <= eps + 1e-12
    G = sp.greedy_sparse(wht(f), eps)
    assert G.residual <= eps + 1e-12
    assert G.size <= A.size


def test_sparse_roundtrip():
    A = sp.fmc_set(wht(majority(3)), 0.1)
    d = json.loads(A.to_json())
    assert sp.sparse_from_list(d["coefficients"]) == A.coeffs


# ------------------------------------------------------------ property suite
def test_property_suite_parity_tree():
    out = sp.property_suite(parity_tree(8, 3), trials=100)
    n = 8
    for row in out["infk"]:
        assert row["measured"] == pytest.approx(math.comb(n, row["ell"]))
    assert out["l1"][0]["measured"] <= 1
    assert all(r["measured"] <= 1 for r in out["slpt"])
    assert all(r["captures"] for r in out["fmc"])
    # deg(C|rho) <= n always, so the tail past n is empty
    assert all(r["measured"] <= 1.0 for r in out["slpt"] if r["ell"] == n)


def test_degree_tail_nonincreasing():
    C = random_depth_two(9, 6, 2, 3, np.random.default_rng(4))
    tail = sp.degree_tail(to_boolfun(C), 0.3, 300, seed=1)
    assert tail[0] == 1.0
    assert np.all(np.diff(tail) <= 0)


# ------------------------------------------------------------ KM learner
@given(st.integers(1, 10), st.data())
def test_km_recovers_characters(n, data):
    S = data.draw(st.integers(0, (1 << n) - 1))
    f = BoolFun.from_fn(n, lambda x: np.bitwise_count(x & S) & 1)
    res = sp.km_learn(f, budget=1, eps=0.2, delta=0.01, rng=np.random.default_rng(S))
    assert res.hypothesis == f
    assert sp.squared_error(f, res.hypothesis) == 0


def test_km_majority():
    f = majority(3)
    res = sp.km_learn(f, budget=4, eps=0.05, delta=0.01, rng=np.random.default_rng(5))
    assert set(res.coeffs) == {1, 2, 4, 7}
    for S, v in res.coeffs.items():
        assert v == pytest.approx(wht(f).coeffs[S], abs=0.05)
    assert sp.squared_error(f, res.hypothesis) <= 0.05
    assert not res.exhausted


def test_km_constant_target():
    res = sp.km_learn(BoolFun.constant(6, 1), 2, 0.2, 0.01, np.random.default_rng(0))
    assert res.hypothesis.is_constant()
    assert res.hypothesis == BoolFun.constant(6, 1)


def test_km_callable_oracle_and_json():
    res = sp.km_learn(lambda xs: (xs >> 2) & 1, 1, 0.2, 0.01, np.random.default_rng(1), n=5)
    assert set(res.coeffs) == {4}
    d = json.loads(res.to_json())
    assert d["error_constant"] == sp.KM_ERROR_CONSTANT


def test_km_flags_exhaustion():
    # a random function spreads mass over every bucket
    f = BoolFun.from_values(8, np.random.default_rng(2).integers(0, 2, 256))
    res = sp.km_learn(f, budget=1, eps=1.0, delta=0.5, rng=np.random.default_rng(3))
    assert res.exhausted or len(res.coeffs) <= math.ceil(4 / res.theta)


def test_sparse_sign_ties_go_to_zero():
    h = sp.sparse_sign(2, {})
    assert h == BoolFun.constant(2, 0)
    assert sp.sparse_sign(2, {3: 1.0}) == parity(2)


# ------------------------------------------------------------ symmetric correlation
def test_symmetric_checks():
    with pytest.raises(sp.NotSymmetricError):
        sp.check_symmetric(BoolFun.from_fn(3, lambda x: x & 1))
    assert wht(majority(7)).coeffs[0] == 0


@given(st.integers(1, 10), st.data())
def test_symmetric_level_identity(n, data):
    prof = data.draw(st.lists(st.integers(0, 1), min_size=n + 1, max_size=n + 1))
    assert sp.symmetric_level_check(wht(symmetric(n, prof)))


def test_symmetric_correlation_bound_holds():
    rng = np.random.default_rng(6)
    corpus = random_gc0_corpus({"kind": "gk_andw", "n": 10, "m": 6, "k": 2, "w": 2, "count": 10}, rng)
    for C in corpus:
        g = symmetric(10, rng.integers(0, 2, 11).tolist())
        out = sp.symmetric_correlation(C, g)
        assert out["level_identity"]
        b = out["bound_terms"]["bound"]
        assert abs(out["corr"]) <= b + 1e-9
        # the proved tail dominates the measured one at the chosen l'
        assert b <= out["bound_terms"]["bound_theorem"] + 1e-9


def test_parity_correlation_bound_formula():
    q = 2 + math.log2(16)
    p = 1 / (40 * 128 * q)
    expect = 2 * 2 ** (-p * 12 / 12 + 2) + 2 ** (-p * 12 / 8)
    assert sp.parity_correlation_bound(12, 2, 2, 16) == pytest.approx(expect)
