"""Hard inputs for wild-card indexing.

Two constructions:

* query side (``wci-query``): binary documents of weight kappa/2, sampled with
  probability 1/r and then thinned so no small index window holds the
  supports of beta documents; queries are all-zero patterns with kappa
  wild cards that keep enough matches.
* space side (``wci-space``): uniform documents over [sigma]^m; queries are
  every pattern with kappa wild cards, minus both members of any pair that
  shares beta or more documents.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .errors import GenerationFailure
from .model import WILDCARD, WciDoc, WciPattern

SYMBOLS = "0123456789abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class ParamsWciQuery:
    m: int
    kappa: int
    c: float = 2.0
    beta: int = None
    seed: int = 0
    max_attempts: int = 16

    def __post_init__(self):
        if self.kappa < 2 or self.kappa % 2:
            raise ValueError("kappa must be even and >= 2")
        if self.kappa > self.m:
            raise ValueError("kappa must not exceed m")
        if self.beta is None:
            object.__setattr__(self, "beta", max(1, math.ceil(self.c * math.log(self.m) / math.log(self.kappa) - 1e-12)))
        if self.ell + self.ell_prime > self.m:
            raise ValueError("ell + ell' exceeds m")

    @property
    def ell(self) -> int:
        return self.kappa // 2

    @property
    def r(self) -> int:
        return max(1, math.floor(2 ** (self.kappa / 3)))

    @property
    def ell_prime(self) -> int:
        """ceil(log_ell(r) / 2), computed exactly: least e with ell^(2e) >= r."""
        if self.r <= 1:
            return 0
        e = 0
        while self.ell ** (2 * e) < self.r:
            e += 1
        return e

    @property
    def width(self) -> int:
        return self.ell + self.ell_prime

    @property
    def min_matches(self) -> float:
        return math.comb(self.kappa, self.ell) / (2 * self.r)

    @property
    def max_matches(self) -> float:
        return 2 * math.comb(self.kappa, self.ell) / self.r

    @property
    def intersection_cap(self) -> int:
        """Patterns that can match beta pruned documents at once."""
        return math.comb(self.m - self.width, self.kappa - self.width)


@dataclass(frozen=True)
class ParamsWciSpace:
    sigma_w: int
    m: int
    kappa: int
    doc_count: int
    beta: int = 2
    epsilon: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.sigma_w <= len(SYMBOLS):
            raise ValueError(f"sigma must be in [2, {len(SYMBOLS)}]")
        if not 0 <= self.kappa <= self.m:
            raise ValueError("need 0 <= kappa <= m")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")

    @property
    def query_count(self) -> int:
        return math.comb(self.m, self.kappa) * self.sigma_w ** (self.m - self.kappa)


def suggest_length(kappa: int, t: float, D: int, epsilon: float) -> float:
    """Pattern length m = kappa + (log_t D - 1)/(1 + eps) for sigma = t^(1+eps)."""
    return kappa + (math.log(D, t) - 1) / (1 + epsilon)


@dataclass(frozen=True)
class WciInstance:
    kind: str
    params: object
    docs: Tuple[WciDoc, ...]
    patterns: Tuple[WciPattern, ...]
    removed: Tuple[WciPattern, ...] = ()
    stage_log: Dict[str, int] = field(default_factory=dict, compare=False, hash=False)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def kappa(self) -> int:
        return self.params.kappa

    @property
    def beta(self) -> int:
        return self.params.beta

    def query_family_size(self) -> int:
        if self.kind == "wci-query":
            return len(self.patterns)
        return self.params.query_count - len(self.removed)

    def iter_queries(self) -> Iterator[WciPattern]:
        """Surviving query family. For the space construction this is every
        kappa-wild-card pattern not removed, enumerated lazily."""
        if self.kind == "wci-query":
            yield from self.patterns
            return
        gone = set(self.removed)
        for pat in all_wildcard_patterns(self.params.m, self.params.kappa, self.params.sigma_w):
            if pat not in gone:
                yield pat

    @property
    def size_cells(self) -> int:
        return len(self.docs) * self.params.m


def all_wildcard_patterns(m: int, kappa: int, sigma: int) -> Iterator[WciPattern]:
    for wild in combinations(range(m), kappa):
        rest = [i for i in range(m) if i not in wild]
        for syms in product(SYMBOLS[:sigma], repeat=len(rest)):
            cells = [WILDCARD] * m
            for i, s in zip(rest, syms):
                cells[i] = s
            yield WciPattern("".join(cells))


# -- query-side construction ------------------------------------------------

def support_mask(doc: WciDoc) -> int:
    return sum(1 << i for i, s in enumerate(doc.symbols) if s == "1")


def _doc_from_support(support: Sequence[int], m: int) -> WciDoc:
    cells = ["0"] * m
    for i in support:
        cells[i] = "1"
    return WciDoc("".join(cells))


def _pattern_from_wild(wild: Sequence[int], m: int) -> WciPattern:
    cells = ["0"] * m
    for i in wild:
        cells[i] = WILDCARD
    return WciPattern("".join(cells))


def prune_concentrated_supports(docs: Sequence[WciDoc], width: int, beta: int) -> Tuple[WciDoc, ...]:
    """Drop every document whose support lies in some ``width``-index window
    that holds the supports of ``beta`` or more documents."""
    if not docs:
        return ()
    m = len(docs[0].symbols)
    if width > m:
        raise ValueError(f"window width {width} exceeds document length {m}")
    masks = [support_mask(d) for d in docs]
    windows_of = []
    tally = Counter()
    for mask in masks:
        supp = [i for i in range(m) if mask >> i & 1]
        if len(supp) > width:
            raise ValueError(f"document has {len(supp)} ones, more than window width {width}")
        free = [i for i in range(m) if not mask >> i & 1]
        wins = [mask | sum(1 << i for i in extra) for extra in combinations(free, width - len(supp))]
        windows_of.append(wins)
        tally.update(wins)
    crowded = {w for w, k in tally.items() if k >= beta}
    return tuple(d for d, wins in zip(docs, windows_of) if not crowded.intersection(wins))


def _match_counts(doc_masks: np.ndarray, pattern_masks: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """For each wild-card mask, how many binary documents have support inside it."""
    out = np.empty(len(pattern_masks), dtype=np.int64)
    for s in range(0, len(pattern_masks), chunk):
        inv = ~pattern_masks[s:s + chunk]
        out[s:s + chunk] = ((doc_masks[None, :] & inv[:, None]) == 0).sum(axis=1)
    return out


def query_patterns(docs: Sequence[WciDoc], params: ParamsWciQuery):
    """Surviving all-zero patterns (those matching at least min_matches docs)
    and the match count of every kappa-subset of positions."""
    m = params.m
    wild_sets = list(combinations(range(m), params.kappa))
    wild_masks = np.array([sum(1 << i for i in w) for w in wild_sets], dtype=np.uint64)
    doc_masks = np.array([support_mask(d) for d in docs], dtype=np.uint64)
    counts = _match_counts(doc_masks, wild_masks)
    good = counts >= params.min_matches
    patterns = tuple(_pattern_from_wild(w, m) for w, g in zip(wild_sets, good) if g)
    return patterns, counts, good


def generate_wci_query_hard(params: ParamsWciQuery) -> WciInstance:
    m, ell, r = params.m, params.ell, params.r
    supports = list(combinations(range(m), ell))
    if len(supports) < r:
        raise ValueError("C(m, ell)/r < 1: nothing to sample")
    n_wild = math.comb(m, params.kappa)
    failed = None
    for attempt in range(params.max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([params.seed & (2**64 - 1), attempt]))
        keep = rng.random(len(supports)) < 1.0 / r
        sampled = [_doc_from_support(s, m) for s, k in zip(supports, keep) if k]
        docs = prune_concentrated_supports(sampled, params.width, params.beta)
        patterns, counts, good = query_patterns(docs, params)
        log = {
            "attempts": attempt + 1,
            "sampled": len(sampled),
            "pruned": len(sampled) - len(docs),
            "patterns_total": n_wild,
            "patterns_removed": n_wild - len(patterns),
        }
        if len(docs) < len(supports) / (2 * r):
            failed = "doc-count"
        elif len(patterns) < n_wild / 2:
            failed = "pattern-count"
        elif patterns and counts[good].max() > params.max_matches:
            failed = "pattern-output-cap"
        else:
            return WciInstance("wci-query", params, docs, patterns, (), log)
    raise GenerationFailure(failed, params.max_attempts)


# -- space-side construction ------------------------------------------------

def _queries_of(doc: str, kappa: int) -> List[str]:
    out = []
    for wild in combinations(range(len(doc)), kappa):
        cells = list(doc)
        for i in wild:
            cells[i] = WILDCARD
        out.append("".join(cells))
    return out


def generate_wci_space_hard(params: ParamsWciSpace) -> WciInstance:
    rng = np.random.default_rng(np.random.SeedSequence([params.seed & (2**64 - 1), 0]))
    raw = rng.integers(0, params.sigma_w, size=(params.doc_count, params.m))
    docs = tuple(WciDoc("".join(SYMBOLS[v] for v in row)) for row in raw)
    return space_instance(docs, params)


def space_instance(docs: Sequence[WciDoc], params: ParamsWciSpace) -> WciInstance:
    """Derive the surviving and removed queries from the documents."""
    docs = tuple(docs)
    matched = set()
    shared = Counter()
    for doc in docs:
        qs = sorted(set(_queries_of(doc.symbols, params.kappa)))
        matched.update(qs)
        shared.update(combinations(qs, 2))
    removed = set()
    for (a, b), k in sorted(shared.items()):
        if k >= params.beta:
            removed.update((a, b))
    patterns = tuple(WciPattern(q) for q in sorted(matched - removed))
    log = {
        "queries_total": params.query_count,
        "queries_matched": len(matched),
        "queries_removed": len(removed),
    }
    return WciInstance("wci-space", params, docs, patterns, tuple(WciPattern(q) for q in sorted(removed)), log)
