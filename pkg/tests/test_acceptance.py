"""Acceptance criteria, one test each. Every test prints a single
``criterion N PASS|FAIL`` line (also collected in the terminal summary)."""

import time
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from pmlab import verify
from pmlab.errors import GenerationFailure
from pmlab.gapped import (
    OUTPUT_BAND,
    ParamsGpi,
    build_dictionary,
    count_matches_exact,
    enumerate_texts,
    output_scale,
    common_match_bound,
    sample_texts,
    texts_matching_all,
)
from pmlab.instfile import emit_instance
from pmlab.model import NEGATIVE, Pattern2P, Query2P, WciPattern, eval_query, match_gapped, match_wildcard, set_intersection
from pmlab.pointer import chazelle_exact, check_partition, partition_marked_tree, random_binary_tree, relative_error
from pmlab.semigroup import SumScheme, answer_with_sums, audit_crowded
from pmlab.structures import build_structure, run_benchmark
from pmlab.twopattern import (
    Params2P,
    generate_2fp,
    generate_2p,
    generate_fp,
    negative_subset_size,
    reduce_to_si,
)
from pmlab.wildcard import (
    ParamsWciQuery,
    ParamsWciSpace,
    generate_wci_query_hard,
    generate_wci_space_hard,
    support_mask,
)

from conftest import DEFAULT


class Clock:
    def __init__(self, budget):
        self.budget = budget
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    @property
    def ok(self):
        return self.elapsed < self.budget

    def __str__(self):
        return f"{self.elapsed:.1f}s/{self.budget}s"


def test_c01_gpi_oracle_equivalence(criterion):
    clock = Clock(10)
    mismatches, checked = 0, 0
    for p in (1, 2, 3):
        for kappa in (0, 1, 2):
            for blocks in range(1, 6):
                try:
                    prm = ParamsGpi(p, kappa, 0, blocks)
                except ValueError:
                    continue
                # gaps past the text length all behave alike; D + 1 covers them
                for gamma in range(prm.D + 2):
                    prm = ParamsGpi(p, kappa, gamma, blocks)
                    d = list(build_dictionary(prm))
                    for text in enumerate_texts(prm):
                        brute = sum(1 for pat in d if match_gapped(text, pat))
                        mismatches += brute != count_matches_exact(text, prm)
                        checked += 1
    ok = mismatches == 0 and clock.ok
    criterion(1, "GPI counting oracle", ok, f"texts={checked} mismatches={mismatches} {clock}")
    assert ok


def test_c02_gpi_output_band(criterion):
    clock = Clock(30)
    prm = ParamsGpi(4, 1, 8, 6)
    assert prm.dense_regime
    d = list(build_dictionary(prm))
    scale = output_scale(prm)
    lo, hi = OUTPUT_BAND
    per_seed = []
    inside = True
    for seed in range(5):
        ratios = []
        for text in sample_texts(prm, 50, seed):
            count = count_matches_exact(text, prm)
            assert count == sum(1 for pat in d if match_gapped(text, pat))
            ratios.append(count / scale)
        inside &= all(lo <= r <= hi for r in ratios)
        per_seed.append((min(ratios), max(ratios)))
    stable = len(set(per_seed)) == 1
    ok = inside and stable and clock.ok
    criterion(2, "GPI output band", ok,
              f"c1={lo} c2={hi} observed={per_seed[0][0]:.4f}..{per_seed[0][1]:.4f} stable={stable} {clock}")
    assert ok


def test_c03_gpi_common_match_cap(criterion):
    clock = Clock(10)
    prm = ParamsGpi(2, 1, 3, 3)
    d = list(build_dictionary(prm))
    bad, subsets = 0, 0
    for beta in range(1, 5):
        bound = common_match_bound(prm, beta)
        for subset in combinations(d, beta):
            hit = texts_matching_all(prm, subset)
            bad += hit > bound
            subsets += 1
    ok = bad == 0 and clock.ok
    criterion(3, "GPI common-match cap", ok, f"subsets={subsets} violations={bad} {clock}")
    assert ok


def test_c04_two_pattern_probabilities(criterion):
    clock = Clock(60)
    sigma, p, ell = 6, 3, 3
    prm = Params2P(sigma, p, 1, ell=ell)
    pos = [Pattern2P(c, "000") for c in range(1, ell + 1)]
    m = negative_subset_size(sigma, p)
    neg = Pattern2P(1 << sigma, "", NEGATIVE, 0)
    cases = [
        ("2^-p", "2p", pos[0], Fraction(1, 2 ** p)),
        ("2^-2p", "2p", Query2P(pos[0], pos[1]), Fraction(1, 2 ** (2 * p))),
        ("2^-p*ell", "2p", tuple(pos), Fraction(1, 2 ** (p * ell))),
        ("2^-p(1-m/|S2|)", "fp", Query2P(pos[0], neg), Fraction(1, 2 ** p) * (1 - Fraction(m, 1 << sigma))),
    ]
    details, ok = [], True
    for k, (name, fam, target, stated) in enumerate(cases):
        assert verify.analytic_rate_2p(prm, verify._as_patterns(target)) == stated
        rep = verify.mc_match_rate(fam, prm, target, trials=100_000, seed=100 + k, workers=4)
        ok &= abs(rep.z_score) <= 4 and rep.analytic == float(stated)
        details.append(f"{name}:z={rep.z_score:+.2f}")
    ok &= clock.ok
    criterion(4, "2P match probabilities", ok, " ".join(details) + f" {clock}")
    assert ok


def _accept_2p(prm, clock):
    holds, lhs = verify.check_eq_int(prm.sigma_bits, prm.trailing_bits, prm.ell, prm.beta, prm.doc_count)
    notes = [f"eq_int={int(holds)} log2_lhs={lhs:.2f}"]
    if not holds:
        return False, notes, None
    try:
        inst = generate_2p(prm)
    except GenerationFailure as exc:
        notes.append(f"generation failed: {exc}")
        return False, notes, None
    low = verify.min_query_output(inst)
    rep = verify.max_docs_sharing_patterns(inst, prm.ell)
    need = prm.doc_count * 2.0 ** (-2 * prm.trailing_bits) / 2
    ok = (inst.attempts <= 16 and low.exhaustive and low.value >= need
          and rep.exhaustive and rep.max_shared < prm.beta and clock.ok)
    notes.append(f"attempts={inst.attempts} min_output={low.value}>={need:g} max_shared={rep.max_shared}<{prm.beta}")
    return ok, notes, inst


def test_c05_two_pattern_instance(criterion):
    clock = Clock(300)
    prm = Params2P(6, 3, 4096, ell=3, beta=6, seed=1)
    ok, notes, _ = _accept_2p(prm, clock)
    if not ok:
        # show the sharing failure the inequality predicts, on raw documents
        raw = generate_2p(prm, check=False)
        rep = verify.max_docs_sharing_patterns(raw, prm.ell, stop_at=prm.beta)
        notes.append(f"raw max_shared>={rep.max_shared}")
    criterion(5, "2P instance at ell=3", ok, " ".join(notes) + f" {clock}")
    assert ok


def test_c05b_two_pattern_instance_ell8(criterion):
    clock = Clock(300)
    prm = Params2P(**DEFAULT)
    ok, notes, _ = _accept_2p(prm, clock)
    criterion("5b", "2P instance at ell=8", ok, " ".join(notes) + f" {clock}")
    assert ok


def test_c06_si_reduction(criterion):
    clock = Clock(5)
    inst = generate_2p(Params2P(2, 1, 8, seed=6), check=False)
    red = reduce_to_si(inst)
    bad = sum(set_intersection(red.si, *red.image(q)) != eval_query(inst, q) for q in inst.queries)
    ok = bad == 0 and clock.ok
    criterion(6, "SI reduction", ok, f"queries={len(inst.queries)} mismatches={bad} {clock}")
    assert ok


def test_c07_wci_query_side(criterion):
    clock = Clock(300)
    prm = ParamsWciQuery(14, 6, c=2.5, seed=0)
    assert (prm.r, prm.ell, prm.ell_prime) == (4, 3, 1)
    inst = generate_wci_query_hard(prm)
    load, window = verify.max_window_load(inst, 4)
    counts = verify.wci_incidence(inst).sum(axis=0)
    cap = comb(prm.m - prm.ell - prm.ell_prime, prm.kappa - prm.ell - prm.ell_prime)
    over = 0
    subsets = verify.sampled_subsets(len(inst.docs), prm.beta, 500, seed=1)
    for ids in subsets:
        union = 0
        for i in ids:
            union |= support_mask(inst.docs[i])
        u = bin(union).count("1")
        # every kappa-set of wild cards containing the union matches them all
        all_patterns = comb(prm.m - u, prm.kappa - u) if u <= prm.kappa else 0
        surviving = sum(1 for q in inst.patterns if all(match_wildcard(inst.docs[i], q) for i in ids))
        over += max(all_patterns, surviving) > cap
    ok = load < prm.beta and counts.min() >= 3 and over == 0 and clock.ok
    criterion(7, "WCI query-side instance", ok,
              f"beta={prm.beta} docs={len(inst.docs)} window_load={load} min_matches={counts.min()} "
              f"cap={cap} cap_violations={over}/{len(subsets)} {clock}")
    assert ok


def test_c08_wci_space_side(criterion):
    clock = Clock(60)
    prm = ParamsWciSpace(4, 4, 1, 50, beta=2, seed=0)
    inst = generate_wci_space_hard(prm)
    sets = [frozenset(i for i, d in enumerate(inst.docs) if match_wildcard(d, q)) for q in inst.iter_queries()]
    worst = max((len(a & b) for a, b in combinations(sets, 2)), default=0)
    rep = verify.mc_match_rate("wci-space", prm, WciPattern("1*30"), trials=100_000, seed=8)
    ok = worst <= 1 and abs(rep.z_score) <= 4 and rep.analytic == 4.0 ** (1 - 4) and clock.ok
    criterion(8, "WCI space-side instance", ok,
              f"queries={len(sets)} max_pair_shared={worst} mc_z={rep.z_score:+.2f} {clock}")
    assert ok


def test_c09_tree_partition(criterion):
    clock = Clock(60)
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(100):
        n = int(rng.integers(1, 10_001))
        tree = random_binary_tree(n, float(rng.random()), rng)
        beta = int(rng.choice([2, 4, 8]))
        failures += bool(check_partition(tree, partition_marked_tree(tree, beta), beta))
    ok = failures == 0 and clock.ok
    criterion(9, "marked-tree partition", ok, f"trees=100 failures={failures} {clock}")
    assert ok


def test_c10_bound_consistency(criterion, default_2p):
    clock = Clock(60)
    inst = default_2p
    products, certs = {}, []
    for kind in ("naive-scan", "inverted-lists"):
        res = run_benchmark(build_structure(kind, inst), inst, seed=3)
        products[kind] = res.product
        certs += res.certificates
    cert = certs[0]
    exact = chazelle_exact(cert)
    err = max(relative_error(c.value, chazelle_exact(c)) for c in certs)
    again = cert.recompute()
    ok = (all(v >= cert.value for v in products.values()) and err <= 1e-9
          and again.value == cert.value and clock.ok)
    criterion(10, "bound-calculator consistency", ok,
              f"cert={float(exact):.4g} naive={products['naive-scan']} inverted={products['inverted-lists']} "
              f"rel_err={err:.1e} {clock}")
    assert ok


def test_c11_semigroup_audit(criterion, default_2p):
    clock = Clock(60)
    inst = default_2p
    prm = inst.params
    # the crowded sum covers beta docs that some query reports together
    seed_q = inst.queries[0]
    crowd = sorted(eval_query(inst, seed_q))[:prm.beta]
    scheme = SumScheme.singletons(range(len(inst.docs)), {"crowd": crowd})
    audit = audit_crowded(scheme, inst, prm.beta, prm.ell)
    # keep the first pattern and pick the second to report as many crowded
    # documents as possible short of all of them
    pm = inst.prefix_matrix[crowd]
    p = prm.trailing_bits
    best, miss_q = -1, None
    for c in range(1, prm.chars + 1):
        if c == seed_q.first.initial:
            continue
        for b in range(1 << p):
            k = int((pm[:, c - 1] == b).sum())
            if best < k < prm.beta:
                best, miss_q = k, Query2P(seed_q.first, Pattern2P(c, format(b, f"0{p}b")))
    forced = answer_with_sums(scheme, inst, miss_q, require=["crowd"])
    plain = answer_with_sums(scheme, inst, miss_q)
    ok = (audit.certified and audit.max_usable <= prm.ell ** 2 and not audit.flagged
          and forced is None and plain is not None and "crowd" not in plain.sum_ids and clock.ok)
    criterion(11, "semi-group crowded-sum audit", ok,
              f"usable={audit.max_usable}<={prm.ell ** 2} flagged={len(audit.flagged)} "
              f"probe_shares={best}/{prm.beta} crowd_answer={'none' if forced is None else 'found'} {clock}")
    assert ok


def test_c12_determinism(criterion):
    clock = Clock(10)
    small = Params2P(3, 2, 512, ell=7, beta=6, seed=3)
    makers = {
        "2p": lambda: generate_2p(small),
        "fp": lambda: generate_fp(small),
        "2fp": lambda: generate_2fp(small),
        "wci-query": lambda: generate_wci_query_hard(ParamsWciQuery(14, 6, c=2.5, seed=4)),
        "wci-space": lambda: generate_wci_space_hard(ParamsWciSpace(4, 4, 1, 50, seed=4)),
        "gpi": lambda: build_dictionary(ParamsGpi(4, 1, 8, 6)),
    }
    differ = [name for name, make in makers.items() if emit_instance(make()) != emit_instance(make())]
    ok = not differ and clock.ok
    criterion(12, "generator determinism", ok, f"generators={len(makers)} differing={differ or 'none'} {clock}")
    assert ok
