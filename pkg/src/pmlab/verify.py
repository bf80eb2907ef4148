"""Exact and Monte-Carlo checks of the construction properties.

Exact checks are exhaustive unless a result is explicitly labelled
``exhaustive=False``; such results never feed acceptance gates.
Asymptotic O()/Theta() constants are taken as 1 and recorded where used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .errors import FamilyTooLarge
from .gapped import GpiDictionary, count_matches_exact, enumerate_texts
from .model import (
    NEGATIVE,
    POSITIVE,
    Pattern2P,
    Query2P,
    WciDoc,
    bits,
    match_gapped,
    match_pattern,
    match_wildcard,
)
from .twopattern import Instance2P, Params2P, draw_docs, negative_subset_size, query_count
from .wildcard import SYMBOLS, WciInstance, support_mask

EXHAUSTIVE_LIMIT = 200_000
# number of char tuples below which 2P sharing is computed by grouping
# documents on their joint prefixes instead of the anchored search
TUPLE_ENUM_LIMIT = 250_000


# -- Monte Carlo --------------------------------------------------------------

@dataclass(frozen=True)
class McReport:
    estimate: float
    trials: int
    stderr: float
    analytic: float
    z_score: float
    hits: int = 0

    def line(self, name: str) -> str:
        return f"check={name} mode=mc value={self.estimate:.6g} bound={self.analytic:.6g} z={self.z_score:.3f}"


def _negative_avoid_prob(size: int, m: int, k: int) -> Fraction:
    """P(a uniform m-subset of a size-``size`` set misses k given symbols)."""
    if k > size:
        return Fraction(0)
    return Fraction(math.comb(size - k, m), math.comb(size, m))


def analytic_rate_2p(params: Params2P, patterns: Sequence[Pattern2P]) -> Fraction:
    """Exact probability that a fresh random document matches every pattern."""
    m = negative_subset_size(params.sigma_bits, params.trailing_bits)
    size = 1 << params.sigma_bits
    prob = Fraction(1)
    by_char = {}
    negs = {}
    for pat in patterns:
        if pat.polarity == POSITIVE:
            by_char.setdefault(pat.initial, []).append(pat.trailing)
        else:
            negs.setdefault(pat.part, set()).add(pat.initial)
    for trails in by_char.values():
        longest = max(trails, key=len)
        if not all(longest.startswith(t) for t in trails):
            return Fraction(0)
        prob *= Fraction(1, 1 << len(longest))
    for chars in negs.values():
        prob *= _negative_avoid_prob(size, m, len(chars))
    return prob


def _as_patterns(target) -> List[Pattern2P]:
    if isinstance(target, Pattern2P):
        return [target]
    if isinstance(target, Query2P):
        return [target.first, target.second]
    return list(target)


def _shards(trials: int, shards: int):
    base, extra = divmod(trials, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def mc_match_rate(family: str, params, target, trials: int = 100_000, seed: int = 0,
                  shards: int = 4, workers: int = 1, chunk: int = 5_000) -> McReport:
    """Estimate how often freshly sampled documents match ``target``.

    ``family`` is one of 2p/fp/2fp (target: pattern, query or pattern tuple,
    ``params`` a Params2P) or wci-space (target: WciPattern, ``params`` a
    ParamsWciSpace). Shards draw from independent derived seeds and their
    hit counts are summed.
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    seqs = np.random.SeedSequence(seed).spawn(shards)
    sizes = _shards(trials, shards)

    if family == "wci-space":
        pat = target
        analytic = Fraction(1, params.sigma_w ** (params.m - pat.wildcard_count))

        def run(seq, n):
            rng = np.random.default_rng(seq)
            hits = 0
            for s in range(0, n, chunk):
                raw = rng.integers(0, params.sigma_w, size=(min(chunk, n - s), params.m))
                for row in raw:
                    doc = WciDoc("".join(SYMBOLS[v] for v in row))
                    hits += match_wildcard(doc, pat)
            return hits
    else:
        pats = _as_patterns(target)
        analytic = analytic_rate_2p(params, pats)

        def run(seq, n):
            rng = np.random.default_rng(seq)
            hits = 0
            for s in range(0, n, chunk):
                prm = Params2P(params.sigma_bits, params.trailing_bits, min(chunk, n - s),
                               params.ell, params.beta)
                docs, _ = draw_docs(prm, family, rng)
                hits += sum(all(match_pattern(d, pt) for pt in pats) for d in docs)
            return hits

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(run, seqs, sizes))
    else:
        hits = sum(run(q, n) for q, n in zip(seqs, sizes))
    est = hits / trials
    a = float(analytic)
    se = math.sqrt(est * (1 - est) / trials)
    if se == 0:
        # all-or-nothing sample; fall back to the analytic spread
        se = math.sqrt(max(a * (1 - a), 1e-300) / trials)
    return McReport(est, trials, se, a, (est - a) / se, hits)


# -- minimum query output -----------------------------------------------------

class MinOutput(NamedTuple):
    value: int
    query: object
    exhaustive: bool = True


def _one_hot(inst: Instance2P) -> np.ndarray:
    pm = inst.prefix_matrix
    D, C = pm.shape
    width = 1 << inst.params.trailing_bits
    X = np.zeros((D, C * width), dtype=np.float32)
    if D and C:
        cols = np.arange(C)[None, :] * width + pm
        X[np.arange(D)[:, None], cols] = 1
    return X


def _pos_pattern(inst: Instance2P, col: int) -> Pattern2P:
    p = inst.params.trailing_bits
    c, b = divmod(col, 1 << p)
    return Pattern2P(int(c) + 1, bits(int(b), p))


def _neg_pattern(inst: Instance2P, col: int, part: int = 0) -> Pattern2P:
    return Pattern2P((1 << inst.params.sigma_bits) + int(col), polarity=NEGATIVE, part=part)


def _min_2p(inst: Instance2P) -> MinOutput:
    fam = inst.queries
    if not inst.docs:
        return MinOutput(0, fam[0] if len(fam) else None)
    width = 1 << inst.params.trailing_bits
    if inst.family == "2p":
        X = _one_hot(inst)
        M = X.T @ X
        C = inst.params.chars
        block = np.kron(np.eye(C, dtype=bool), np.ones((width, width), dtype=bool))
        M[block] = np.inf
        M[np.tril_indices_from(M)] = np.inf
        a, b = np.unravel_index(int(np.argmin(M)), M.shape)
        q = Query2P(_pos_pattern(inst, a), _pos_pattern(inst, b))
    elif inst.family == "fp":
        X = _one_hot(inst)
        N = (~inst.neg_matrix(0)).astype(np.float32)
        M = X.T @ N
        a, b = np.unravel_index(int(np.argmin(M)), M.shape)
        q = Query2P(_pos_pattern(inst, a), _neg_pattern(inst, b))
    else:
        N0 = (~inst.neg_matrix(0)).astype(np.float32)
        N1 = (~inst.neg_matrix(1)).astype(np.float32)
        M = N0.T @ N1
        a, b = np.unravel_index(int(np.argmin(M)), M.shape)
        q = Query2P(_neg_pattern(inst, a, 0), _neg_pattern(inst, b, 1))
    return MinOutput(int(M[a, b]), q)


def _sampled_min(count_fn, family, sample: int, seed: int) -> MinOutput:
    rng = np.random.default_rng(seed)
    ranks = rng.choice(len(family), size=min(sample, len(family)), replace=False)
    best = None
    for r in sorted(int(x) for x in ranks):
        q = family[r]
        v = count_fn(q)
        if best is None or v < best.value:
            best = MinOutput(v, q, False)
    return best


def min_query_output(instance, sample: int = None, seed: int = 0,
                     limit: int = EXHAUSTIVE_LIMIT) -> MinOutput:
    """Smallest output size over the instance's whole query family.

    Families larger than ``limit`` that need explicit enumeration raise
    FamilyTooLarge unless ``sample`` is given, in which case the result is
    marked non-exhaustive.
    """
    if isinstance(instance, Instance2P):
        return _min_2p(instance)
    if isinstance(instance, GpiDictionary):
        texts = enumerate_texts(instance.params)
        count = lambda t: count_matches_exact(t, instance.params)  # noqa: E731
        if len(texts) > limit:
            if sample is None:
                raise FamilyTooLarge(len(texts), limit)
            return _sampled_min(count, texts, sample, seed)
        best = None
        for t in texts:
            v = count(t)
            if best is None or v < best.value:
                best = MinOutput(v, t)
        return best
    if isinstance(instance, WciInstance):
        return _min_wci(instance, limit)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _min_wci(inst: WciInstance, limit: int) -> MinOutput:
    if inst.kind == "wci-query":
        counts = _wci_pattern_counts(inst)
        if not len(counts):
            return MinOutput(0, None)
        k = int(np.argmin(counts))
        return MinOutput(int(counts[k]), inst.patterns[k])
    matched = {p.cells for p in inst.patterns}
    if inst.query_family_size() > len(inst.patterns):
        # some surviving query matches nothing; find the first one
        for q in inst.iter_queries():
            if q.cells not in matched:
                return MinOutput(0, q)
    best = None
    for q in inst.patterns:
        v = sum(match_wildcard(d, q) for d in inst.docs)
        if best is None or v < best.value:
            best = MinOutput(v, q)
    return best if best else MinOutput(0, None)


def _wci_pattern_counts(inst: WciInstance) -> np.ndarray:
    X = wci_incidence(inst)
    return X.sum(axis=0)


def wci_incidence(inst: WciInstance) -> np.ndarray:
    """docs x surviving-patterns match matrix (explicit patterns only)."""
    if inst.kind == "wci-query":
        docs = np.array([support_mask(d) for d in inst.docs], dtype=np.uint64)
        wild = np.array([sum(1 << i for i in p.wild_positions) for p in inst.patterns], dtype=np.uint64)
        if not len(docs) or not len(wild):
            return np.zeros((len(docs), len(wild)), dtype=bool)
        return (docs[:, None] & ~wild[None, :]) == 0
    return np.array([[match_wildcard(d, q) for q in inst.patterns] for d in inst.docs], dtype=bool).reshape(
        len(inst.docs), len(inst.patterns))


# -- ell-wise sharing -----------------------------------------------------------

@dataclass(frozen=True)
class IntersectionReport:
    arity: int
    max_shared: int
    witness_patterns: tuple
    witness_docs: Tuple[int, ...]
    bound_ok: bool
    exhaustive: bool = True


def max_group_sharing(X: np.ndarray, ell: int, stop_at: int = None):
    """Largest set of rows of boolean matrix ``X`` whose columns-in-common
    number at least ``ell``. Returns (size, rows, common columns).

    Anchored at each row's smallest member: candidates are later rows that
    agree with the anchor on ``ell`` columns; pairs come from one matrix
    product, longer groups from a depth-first extension with pruning.
    """
    D = X.shape[0]
    best = [0, (), ()]
    if D == 0:
        return 0, (), ()

    def record(group, common_cols):
        if len(group) > best[0]:
            best[0] = len(group)
            best[1] = tuple(group)
            best[2] = tuple(common_cols)

    def done():
        return stop_at is not None and best[0] >= stop_at

    for i in range(D):
        feats = np.flatnonzero(X[i])
        if len(feats) < ell:
            continue
        if best[0] == 0:
            record([i], feats)
            if done():
                break
        E = X[i + 1:, feats]
        cand = np.flatnonzero(E.sum(axis=1) >= ell)
        if len(cand) + 1 <= best[0]:
            continue
        Ec = E[cand]
        if best[0] < 2:
            record([i, i + 1 + int(cand[0])], feats[Ec[0]])
            if done():
                break
        F = Ec.astype(np.float32)
        A = (F @ F.T) >= ell
        n = len(cand)
        # last partner of each row; rows without a later partner cannot extend
        last = n - 1 - np.argmax(A[:, ::-1], axis=1)
        rows = np.flatnonzero(last > np.arange(n))
        for j in rows:
            nxt = j + 1 + np.flatnonzero(A[j, j + 1:])
            if 2 + len(nxt) <= best[0]:
                continue
            _extend([i, i + 1 + int(cand[j])], Ec[j], nxt, Ec, cand, i + 1,
                    feats, ell, record, best, stop_at)
            if done():
                break
        if done():
            break
    return best[0], best[1], best[2]


def _extend(group, common, nxt, Ec, cand, offset, feats, ell, record, best, stop_at):
    # nxt: indices into Ec of rows that can join; all are past group's last row
    if len(group) + len(nxt) <= best[0]:
        return
    for pos, k in enumerate(nxt):
        if stop_at is not None and best[0] >= stop_at:
            return
        shared = common & Ec[k]
        if shared.sum() < ell:
            continue
        g2 = group + [offset + int(cand[k])]
        record(g2, feats[shared])
        rest = nxt[pos + 1:]
        if len(rest):
            ok = (Ec[rest] & shared).sum(axis=1) >= ell
            rest = rest[ok]
        if len(rest):
            _extend(g2, shared, rest, Ec, cand, offset, feats, ell, record, best, stop_at)


def _tuple_enum_2p(inst: Instance2P, ell: int, stop_at: int = None):
    pm = inst.prefix_matrix
    D, C = pm.shape
    p = inst.params.trailing_bits
    best = (0, (), ())
    for chars in combinations(range(C), ell):
        key = np.zeros(D, dtype=np.int64)
        for c in chars:
            key = (key << p) | pm[:, c]
        vals, counts = np.unique(key, return_counts=True)
        k = int(np.argmax(counts))
        if counts[k] > best[0]:
            docs = tuple(int(d) for d in np.flatnonzero(key == vals[k]))
            cols = tuple(c * (1 << p) + int(pm[docs[0], c]) for c in chars)
            best = (int(counts[k]), docs, cols)
            if stop_at is not None and best[0] >= stop_at:
                break
    return best


def max_docs_sharing_patterns(instance, ell: int, stop_at: int = None) -> IntersectionReport:
    """Most documents matched simultaneously by some ell distinct patterns.

    For 2P instances the patterns have pairwise-distinct initial characters
    (same-character patterns never co-occur in a document). FP/2FP instances
    are checked per pattern kind: ell distinct positive patterns, or ell
    distinct negative patterns of one part. With ``stop_at`` the search
    stops as soon as a group that large is found (the report is then a
    lower bound and labelled non-exhaustive).
    """
    if ell < 2:
        raise ValueError("ell must be >= 2")
    if isinstance(instance, Instance2P):
        return _sharing_2p(instance, ell, stop_at)
    if isinstance(instance, WciInstance):
        X = wci_incidence(instance)
        size, docs, cols = max_group_sharing(X, ell, stop_at)
        pats = tuple(instance.patterns[c] for c in cols[:ell])
        return _report(ell, size, pats, docs, instance.beta, stop_at)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _report(ell, size, pats, docs, beta, stop_at):
    exhaustive = stop_at is None or size < stop_at
    return IntersectionReport(ell, size, pats, tuple(docs), size < beta, exhaustive)


def _sharing_2p(inst: Instance2P, ell: int, stop_at):
    if not inst.docs:
        return _report(ell, 0, (), (), inst.params.beta, stop_at)
    results = []
    if inst.family in ("2p", "fp"):
        if inst.params.trailing_bits and math.comb(inst.params.chars, ell) <= TUPLE_ENUM_LIMIT:
            size, docs, cols = _tuple_enum_2p(inst, ell, stop_at)
        else:
            size, docs, cols = max_group_sharing(_one_hot(inst) > 0, ell, stop_at)
        results.append((size, docs, tuple(_pos_pattern(inst, c) for c in cols[:ell])))
    for part in range(len(inst.docs[0].neg_parts)):
        X = ~inst.neg_matrix(part)
        size, docs, cols = max_group_sharing(X, ell, stop_at)
        results.append((size, docs, tuple(_neg_pattern(inst, c, part) for c in cols[:ell])))
    size, docs, pats = max(results, key=lambda r: r[0]) if results else (0, (), ())
    return _report(ell, size, pats, docs, inst.params.beta, stop_at)


# -- union-bound inequality -------------------------------------------------------------

LOG2_ONE_THIRD = math.log2(1 / 3)


def check_eq_int(sigma: int, p: int, ell: int, beta: int, D: int) -> Tuple[bool, float]:
    """Union bound over ell-pattern sets: 2^{ell(p+sigma)} (eD/(beta 2^{p ell}))^beta < 1/3,
    with the suppressed constant taken as 1. Returns (holds, log2 of the left side)."""
    if min(sigma, p, ell, D) < 0 or beta < 0:
        raise ValueError("parameters must be non-negative")
    lhs = ell * (p + sigma)
    if beta > 0:
        if D == 0:
            return True, -math.inf
        lhs += beta * (math.log2(math.e) + math.log2(D) - math.log2(beta) - p * ell)
    return lhs < LOG2_ONE_THIRD, lhs


# -- discrete intersection measure ------------------------------------------------

def intersection_measure(instance, doc_subset: Sequence, limit: int = EXHAUSTIVE_LIMIT) -> Fraction:
    """Fraction of the query family that matches every member of ``doc_subset``.

    Inputs act as ranges over queries under the uniform measure; for a
    GpiDictionary the members are gapped patterns and the queries are texts.
    """
    subset = list(doc_subset)
    if not subset:
        raise ValueError("doc_subset must be non-empty")
    if isinstance(instance, Instance2P):
        return _measure_2p(instance, subset)
    if isinstance(instance, GpiDictionary):
        texts = enumerate_texts(instance.params)
        if len(texts) > limit:
            raise FamilyTooLarge(len(texts), limit)
        pats = [instance[x] if isinstance(x, int) else x for x in subset]
        hit = sum(1 for t in texts if all(match_gapped(t, pt) for pt in pats))
        return Fraction(hit, len(texts))
    if isinstance(instance, WciInstance):
        return _measure_wci(instance, subset)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _measure_2p(inst: Instance2P, ids: List[int]) -> Fraction:
    total = query_count(inst.family, inst.params.sigma_bits, inst.params.trailing_bits)
    counts = []
    if inst.family in ("2p", "fp"):
        pm = inst.prefix_matrix[ids]
        counts.append(int((pm == pm[0]).all(axis=0).sum()))
    for part in range(len(inst.docs[0].neg_parts)):
        absent = ~inst.neg_matrix(part)[ids]
        counts.append(int(absent.all(axis=0).sum()))
    if inst.family == "2p":
        hit = math.comb(counts[0], 2)
    else:
        hit = counts[0] * counts[1]
    return Fraction(hit, total)


def _measure_wci(inst: WciInstance, ids: List[int]) -> Fraction:
    docs = [inst.docs[i] for i in ids]
    total = inst.query_family_size()
    if inst.kind == "wci-query":
        union = 0
        for d in docs:
            union |= support_mask(d)
        hit = sum(1 for p in inst.patterns
                  if union & ~sum(1 << i for i in p.wild_positions) == 0)
        return Fraction(hit, total)
    m, kappa = inst.m, inst.kappa
    diff = [i for i in range(m) if len({d.symbols[i] for d in docs}) > 1]
    if len(diff) > kappa:
        return Fraction(0, total)
    gone = {p.cells for p in inst.removed}
    same = [i for i in range(m) if i not in diff]
    hit = 0
    for extra in combinations(same, kappa - len(diff)):
        cells = list(docs[0].symbols)
        for i in list(diff) + list(extra):
            cells[i] = "*"
        hit += "".join(cells) not in gone
    return Fraction(hit, total)


def max_window_load(inst: WciInstance, width: int = None) -> Tuple[int, Tuple[int, ...]]:
    """Most documents whose supports fit in one ``width``-index window,
    found by scanning every window. Returns (load, window positions)."""
    m = inst.m
    width = inst.params.width if width is None else width
    masks = np.array([support_mask(d) for d in inst.docs], dtype=np.uint64)
    best = (0, ())
    for win in combinations(range(m), width):
        inv = np.uint64(~sum(1 << i for i in win) & ((1 << m) - 1))
        load = int(((masks & inv) == 0).sum())
        if load > best[0]:
            best = (load, win)
    return best


def sampled_subsets(n: int, size: int, count: int, seed: int = 0) -> List[Tuple[int, ...]]:
    rng = np.random.default_rng(seed)
    return [tuple(sorted(int(x) for x in rng.choice(n, size=size, replace=False))) for _ in range(count)]
