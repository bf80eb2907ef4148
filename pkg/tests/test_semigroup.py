from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from pmlab.errors import FormatError, SearchCapExceeded
from pmlab.model import eval_query
from pmlab.semigroup import (
    ADD,
    MAX,
    StoredSum,
    SumAnswer,
    SumScheme,
    answer_with_sums,
    audit_crowded,
    check_count_inequalities,
    emit_scheme,
    least_doc_count,
    parse_scheme,
    semigroup_params,
    usable_query_count,
)


def test_faithfulness_probe():
    assert ADD.probe_axioms(range(-3, 4)) and MAX.probe_axioms(range(5))
    assert ADD.faithful and not MAX.faithful
    # max cannot tell {a} from {a, a}
    assert MAX.combine([3]) == MAX.combine([3, 3])
    assert ADD.combine([3]) != ADD.combine([3, 3])
    assert not MAX.has_inverse(3, range(10))


def test_exact_cover_example():
    scheme = SumScheme.of({"a": [1, 2], "b": [3], "c": [2, 3], "d": [1]})
    ans = answer_with_sums(scheme, None, {1, 2, 3})
    assert ans is not None
    assert ans.index_multiset(scheme) == {1: 1, 2: 1, 3: 1}
    assert ans.evaluate(scheme, ADD) == 3


def test_no_subtraction():
    # {1,2,3} minus {3} would give the target but is not allowed
    scheme = SumScheme.of({"big": [1, 2, 3], "x": [3]})
    assert answer_with_sums(scheme, None, {1, 2}) is None


def test_require_forces_a_sum():
    scheme = SumScheme.singletons(range(4), {"pair": [0, 1]})
    ans = answer_with_sums(scheme, None, {0, 1, 2}, require=["pair"])
    assert "pair" in ans.sum_ids
    assert answer_with_sums(scheme, None, {1, 2}, require=["pair"]) is None


def test_cap_is_reported():
    scheme = SumScheme.singletons(range(6))
    with pytest.raises(SearchCapExceeded):
        answer_with_sums(scheme, None, set(range(6)), cap=3)
    assert len(answer_with_sums(scheme, None, set(range(6)), cap=6).sum_ids) == 6


@settings(max_examples=60)
@given(st.sets(st.integers(0, 30), max_size=20), st.sets(st.integers(0, 30), min_size=1, max_size=25))
def test_singletons_always_answer(target, universe):
    scheme = SumScheme.singletons(universe | target)
    ans = answer_with_sums(scheme, None, target)
    assert ans is not None
    assert set(ans.index_multiset(scheme)) == target


def test_weights_and_values():
    scheme = SumScheme.of({"a": [1, 2]}, weight={1: 5, 2: 7})
    assert scheme.value("a", ADD) == 12 and scheme.value("a", MAX) == 7
    with pytest.raises(KeyError):
        scheme.by_id("zz")


def test_stored_sum_validation():
    with pytest.raises(ValueError):
        StoredSum("e", frozenset())
    with pytest.raises(ValueError):
        StoredSum("c", frozenset({1}), {1: 0})
    with pytest.raises(ValueError):
        SumScheme.of({"a": [1]}).__class__((StoredSum("a", frozenset({1})),) * 2)


def test_answer_on_instance(small_2p):
    q = small_2p.queries[10]
    target = eval_query(small_2p, q)
    scheme = SumScheme.singletons(range(len(small_2p.docs)))
    ans = answer_with_sums(scheme, small_2p, q)
    assert set(ans.index_multiset(scheme)) == target


def test_usable_count_matches_enumeration(small_2p):
    docs = [5, 9]
    want = sum(1 for q in small_2p.queries if set(docs) <= eval_query(small_2p, q))
    assert usable_query_count(small_2p, docs) == want


def test_audit_small(small_2p):
    prm = small_2p.params
    crowded = list(range(prm.beta))
    scheme = SumScheme.singletons(range(20), {"crowd": crowded})
    audit = audit_crowded(scheme, small_2p, prm.beta, prm.ell)
    assert audit.certified and "generation" in audit.precondition
    assert [u.sum_id for u in audit.usage] == ["crowd"]
    assert audit.max_usable <= prm.ell ** 2 and audit.flagged == ()
    assert audit.to_csv().splitlines()[0] == "sum,size,usable_queries,flag"


def test_audit_flags_popular_sum(small_2p):
    # a single doc is usable by C(7, 2) = 21 queries, more than 2^2
    scheme = SumScheme.of({"one": [0]})
    audit = audit_crowded(scheme, small_2p, 1, 2, verify_precondition=False)
    assert audit.flagged == ("one",)
    assert not audit.certified


def test_count_inequalities_examples():
    chk = check_count_inequalities(6, 3, 4, 8, 4096, 1)
    assert chk.eq_count_ok and chk.sigma_cap == 6
    assert chk.q_time_cap == Fraction(4096, 2 * 64 * 4) and chk.eq_count2_ok
    assert not check_count_inequalities(7, 3, 4, 8, 4096, 1).eq_count_ok
    assert not check_count_inequalities(6, 3, 4, 8, 4096, 8).eq_count2_ok
    with pytest.raises(ValueError):
        check_count_inequalities(0, 3, 4, 8, 4096, 1)


@given(st.fractions(min_value=0, max_value=1000), st.integers(1, 5), st.integers(1, 10))
def test_least_doc_count_is_least(q, p, beta):
    D = least_doc_count(q, p, beta)
    assert check_count_inequalities(1, p, beta, 1, D, q).eq_count2_ok
    if D > 1:
        assert not check_count_inequalities(1, p, beta, 1, D - 1, q).eq_count2_ok


def test_semigroup_params_consistent():
    prm = semigroup_params(2 ** 20, 4)
    chk = check_count_inequalities(prm["sigma"], prm["p"], prm["beta"], prm["ell"], prm["D"], 4)
    assert chk.eq_count_ok and chk.eq_count2_ok


def test_scheme_round_trip():
    scheme = SumScheme.of({"a": [3, 1], "b": [2]}, weight={1: 4})
    again = parse_scheme(emit_scheme(scheme))
    assert again == scheme and again.weight == {1: 4}
    with pytest.raises(FormatError):
        parse_scheme("sum a docs 1\nsum a docs 2\n")
    with pytest.raises(FormatError):
        parse_scheme("total a 1\n")
    with pytest.raises(FormatError):
        parse_scheme("sum a docs x\n")


def test_sum_answer_multiset():
    scheme = SumScheme.of({"a": [1, 2], "b": [2]})
    ans = SumAnswer(("a", "b"), {"a": 1, "b": 2})
    assert ans.index_multiset(scheme) == {1: 1, 2: 3}
    assert ans.evaluate(scheme, ADD) == 4
