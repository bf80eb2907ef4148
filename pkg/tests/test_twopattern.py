from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmlab.errors import GenerationFailure
from pmlab.instfile import emit_instance
from pmlab.model import eval_query, set_intersection
from pmlab.twopattern import (
    Params2P,
    QueryFamily2P,
    describe_params,
    expected_query_output,
    generate_2fp,
    generate_2p,
    generate_fp,
    negative_subset_size,
    query_count,
    reduce_to_si,
    suggest_params_2p,
)
from pmlab import verify


def test_shape_sigma2():
    inst = generate_2p(Params2P(2, 1, 4, seed=11), check=False)
    assert len(inst.docs) == 4
    for d in inst.docs:
        assert len(d.payloads) == 3
        assert all(len(b) == 2 for b in d.payloads)


@pytest.mark.parametrize("kw", [
    dict(sigma_bits=0, trailing_bits=0, doc_count=1),
    dict(sigma_bits=2, trailing_bits=3, doc_count=1),
    dict(sigma_bits=2, trailing_bits=1, doc_count=1, beta=0),
    dict(sigma_bits=2, trailing_bits=1, doc_count=1, ell=1),
])
def test_param_validation(kw):
    with pytest.raises(ValueError):
        Params2P(**kw)


def test_negative_subset_size():
    assert negative_subset_size(3, 1) == 4
    assert negative_subset_size(3, 0) == 0
    assert negative_subset_size(5, 2) == 24


def test_p_zero_negative_matches_everything():
    inst = generate_fp(Params2P(3, 0, 20, seed=2), check=False)
    assert inst.m_neg == 0
    q = inst.queries[5]
    assert eval_query(inst, q) == frozenset(range(20))


def test_query_counts():
    assert query_count("2p", 6, 3) == comb(63, 2) * 64
    assert query_count("fp", 3, 1) == 7 * 2 * 8
    assert query_count("2fp", 3, 2) == 64
    with pytest.raises(ValueError):
        query_count("3p", 3, 1)


@pytest.mark.parametrize("family", ["2p", "fp", "2fp"])
def test_query_family_bijective(family):
    fam = QueryFamily2P(family, 3, 2)
    seen = set()
    for r in range(len(fam)):
        q = fam[r]
        assert fam.rank(q) == r
        assert q.family == family
        seen.add(q)
    assert len(seen) == len(fam)
    with pytest.raises(IndexError):
        fam[len(fam)]


def test_describe_params():
    d = describe_params(Params2P(6, 3, 4096))
    assert d["n"] == 4096 * 64
    assert d["queries"] == comb(63, 2) * 64


def test_suggest_params_shape():
    prm = suggest_params_2p(2 ** 20, 16)
    assert prm.doc_count == 16 << (2 * prm.trailing_bits)
    assert prm.trailing_bits <= prm.sigma_bits


def test_accepted_small_instances(small_2p, small_fp, small_2fp):
    for inst in (small_2p, small_fp, small_2fp):
        need = expected_query_output(inst.params, inst.family) / 2
        assert verify.min_query_output(inst).value >= need
        rep = verify.max_docs_sharing_patterns(inst, inst.params.ell)
        assert rep.max_shared < inst.params.beta
        assert inst.sharing is not None and inst.sharing.max_shared == rep.max_shared


def test_second_parts(small_fp, small_2fp):
    m = negative_subset_size(3, 2)
    for d in small_fp.docs:
        assert len(d.neg_parts) == 1 and len(d.neg_parts[0]) == m
        assert all(8 <= c < 16 for c in d.neg_parts[0])
    for d in small_2fp.docs:
        assert not d.payloads and len(d.neg_parts) == 2


def test_eq_int_failure_is_immediate():
    with pytest.raises(GenerationFailure) as exc:
        generate_2p(Params2P(6, 3, 4096, ell=3, beta=6))
    assert exc.value.check == "eq-int"
    assert exc.value.attempts == 0


def test_exhausted_attempts_name_the_check():
    # D=64 at p=2 gives expected output 4, so some query falls below 2
    with pytest.raises(GenerationFailure) as exc:
        generate_2p(Params2P(3, 2, 64, ell=7, beta=3, max_attempts=2))
    assert exc.value.check in ("min-output", "max-shared", "eq-int")


@pytest.mark.parametrize("gen", [generate_2p, generate_fp, generate_2fp])
def test_deterministic_by_seed(gen):
    prm = Params2P(3, 2, 64, seed=99)
    a = emit_instance(gen(prm, check=False), False)
    b = emit_instance(gen(prm, check=False), False)
    assert a == b
    c = emit_instance(gen(Params2P(3, 2, 64, seed=100), check=False), False)
    assert a != c


def test_si_reduction_sigma2():
    inst = generate_2p(Params2P(2, 1, 8, seed=4), check=False)
    red = reduce_to_si(inst)
    assert len(red.si.sets) == 6
    assert red.si.total_size == 8 * 3
    for q in inst.queries:
        i, j = red.image(q)
        assert set_intersection(red.si, i, j) == eval_query(inst, q)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(1, 40))
def test_si_reduction_property(seed, sigma, D):
    p = min(sigma, 2)
    inst = generate_2p(Params2P(sigma, p, D, seed=seed), check=False)
    red = reduce_to_si(inst)
    # for each character the sets over trailing strings partition the docs
    per_char = 1 << p
    for c in range(inst.params.chars):
        group = red.si.sets[c * per_char:(c + 1) * per_char]
        assert sum(len(s) for s in group) == D
        assert frozenset().union(*group) == frozenset(range(D))
    for r in range(0, len(inst.queries), 7):
        q = inst.queries[r]
        assert set_intersection(red.si, *red.image(q)) == eval_query(inst, q)


def test_si_reduction_rejects_fp(small_fp):
    with pytest.raises(ValueError):
        reduce_to_si(small_fp)


def test_prefix_matrix_agrees_with_payloads(small_2p):
    pm = small_2p.prefix_matrix
    for d in (0, 17, 300):
        assert [int(b[:2], 2) for b in small_2p.docs[d].payloads] == list(pm[d])
    assert pm.dtype == np.int64
