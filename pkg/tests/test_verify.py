from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmlab import verify
from pmlab.errors import FamilyTooLarge
from pmlab.gapped import ParamsGpi, build_dictionary
from pmlab.model import NEGATIVE, Doc2P, Pattern2P, WciPattern, eval_query
from pmlab.twopattern import Instance2P, Params2P, expected_query_output
from pmlab.wildcard import ParamsWciSpace


def brute_sharing(X, ell):
    best = 0
    for cols in combinations(range(X.shape[1]), ell):
        best = max(best, int(X[:, list(cols)].all(axis=1).sum()))
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 4), st.integers(3, 9), st.integers(3, 25))
def test_group_sharing_matches_brute(seed, ell, cols, rows):
    rng = np.random.default_rng(seed)
    X = rng.random((rows, cols)) < 0.5
    size, docs, picked = verify.max_group_sharing(X, ell)
    assert size == brute_sharing(X, ell)
    if size:
        assert len(set(picked)) >= ell
        assert X[np.ix_(list(docs), list(picked[:ell]))].all()


def test_identical_docs_share_everything():
    prm = Params2P(3, 1, 5, ell=3, beta=9)
    doc = Doc2P(("000", "001", "010", "011", "100", "101", "110"))
    inst = Instance2P(prm, (doc,) * 5, "2p", 0)
    assert verify.max_docs_sharing_patterns(inst, 3).max_shared == 5
    rep = verify.max_docs_sharing_patterns(inst, 3, stop_at=2)
    assert rep.max_shared >= 2 and not rep.exhaustive


def test_sharing_rejects_small_ell(small_2p):
    with pytest.raises(ValueError):
        verify.max_docs_sharing_patterns(small_2p, 1)


def test_min_output_matches_brute(small_2p):
    res = verify.min_query_output(small_2p)
    assert res.exhaustive
    assert len(eval_query(small_2p, res.query)) == res.value
    fam = small_2p.queries
    brute = min(len(eval_query(small_2p, fam[r])) for r in range(0, len(fam)))
    assert res.value == brute


def test_min_output_empty_instance():
    inst = Instance2P(Params2P(3, 1, 0), (), "2p", 0)
    assert verify.min_query_output(inst).value == 0


def test_min_output_gpi():
    d = build_dictionary(ParamsGpi(2, 1, 3, 3))
    assert verify.min_query_output(d).value == 2
    d = build_dictionary(ParamsGpi(2, 1, 4, 3))
    assert verify.min_query_output(d).value == 3


def test_min_output_gpi_too_large():
    d = build_dictionary(ParamsGpi(6, 1, 8, 20))
    with pytest.raises(FamilyTooLarge):
        verify.min_query_output(d)
    res = verify.min_query_output(d, sample=50, seed=1)
    assert not res.exhaustive


def test_eq_int_examples():
    ok, lhs = verify.check_eq_int(6, 3, 8, 6, 4096)
    assert ok and lhs == pytest.approx(-6.85, abs=0.01)
    ok, lhs = verify.check_eq_int(6, 3, 3, 6, 4096)
    assert not ok and lhs > 30
    assert verify.check_eq_int(3, 2, 7, 0, 10) == (False, 35)
    with pytest.raises(ValueError):
        verify.check_eq_int(-1, 2, 3, 4, 5)


@given(st.integers(1, 8), st.integers(1, 4), st.integers(2, 10), st.integers(1, 10), st.integers(1, 10 ** 6))
def test_eq_int_monotone_in_D_and_ell(sigma, p, ell, beta, D):
    _, a = verify.check_eq_int(sigma, p, ell, beta, D)
    _, b = verify.check_eq_int(sigma, p, ell, beta, 2 * D)
    assert b > a
    _, c = verify.check_eq_int(sigma, p, ell + 1, beta, D)
    # extra pattern costs p+sigma bits but saves p*beta
    assert c - a == pytest.approx(p + sigma - p * beta)


def test_analytic_rates():
    prm = Params2P(3, 2, 10)
    pos = Pattern2P(1, "10")
    assert verify.analytic_rate_2p(prm, [pos]) == Fraction(1, 4)
    assert verify.analytic_rate_2p(prm, [pos, Pattern2P(2, "01")]) == Fraction(1, 16)
    assert verify.analytic_rate_2p(prm, [pos, Pattern2P(1, "11")]) == 0
    assert verify.analytic_rate_2p(prm, [pos, Pattern2P(1, "1")]) == Fraction(1, 4)
    m = 6  # round(8 * 3/4)
    neg = Pattern2P(9, "", NEGATIVE, 0)
    assert verify.analytic_rate_2p(prm, [neg]) == Fraction(8 - m, 8)


@pytest.mark.parametrize("target,family", [
    (Pattern2P(1, "10"), "2p"),
    ((Pattern2P(1, "10"), Pattern2P(3, "0")), "2p"),
    (Pattern2P(9, "", NEGATIVE, 0), "fp"),
])
def test_mc_rate_small(target, family):
    rep = verify.mc_match_rate(family, Params2P(3, 2, 1), target, trials=20_000, seed=4)
    assert abs(rep.z_score) <= 4
    assert rep.hits == round(rep.estimate * rep.trials)


def test_mc_deterministic_and_sharded():
    prm = Params2P(3, 2, 1)
    a = verify.mc_match_rate("2p", prm, Pattern2P(1, "1"), trials=5000, seed=2)
    b = verify.mc_match_rate("2p", prm, Pattern2P(1, "1"), trials=5000, seed=2, workers=3)
    assert a == b
    with pytest.raises(ValueError):
        verify.mc_match_rate("2p", prm, Pattern2P(1, "1"), trials=10)


def test_mc_wci_space():
    prm = ParamsWciSpace(4, 4, 1, 0)
    rep = verify.mc_match_rate("wci-space", prm, WciPattern("01*3"), trials=20_000, seed=1)
    assert rep.analytic == 4 ** -3
    assert abs(rep.z_score) <= 4


def test_measure_2p_examples(small_2p):
    inst = small_2p
    m = verify.intersection_measure(inst, [0])
    # one doc matches one trailing string per char: C(7, 2) queries
    assert m == Fraction(21, len(inst.queries))
    assert verify.intersection_measure(inst, [0, 0]) == m
    assert verify.intersection_measure(inst, [0, 1]) <= m
    with pytest.raises(ValueError):
        verify.intersection_measure(inst, [])


def test_measure_matches_query_count(small_2p):
    inst = small_2p
    ids = [3, 40]
    hit = sum(1 for q in inst.queries if {3, 40} <= eval_query(inst, q))
    assert verify.intersection_measure(inst, ids) == Fraction(hit, len(inst.queries))


def test_measure_gpi():
    prm = ParamsGpi(2, 1, 3, 3)
    d = build_dictionary(prm)
    assert verify.intersection_measure(d, [0]) == Fraction(2, 4)


def test_expected_output_formula():
    assert expected_query_output(Params2P(6, 3, 4096), "2p") == 64
    assert expected_query_output(Params2P(3, 2, 512), "2p") == 32


def test_sampled_subsets():
    subs = verify.sampled_subsets(20, 4, 10, seed=1)
    assert subs == verify.sampled_subsets(20, 4, 10, seed=1)
    assert all(len(set(s)) == 4 and list(s) == sorted(s) for s in subs)


def test_generation_accepts_only_verified(small_2p):
    prm = small_2p.params
    rep = verify.max_docs_sharing_patterns(small_2p, prm.ell)
    assert rep.bound_ok and rep.exhaustive
    assert verify.min_query_output(small_2p).value >= expected_query_output(prm, "2p") / 2
