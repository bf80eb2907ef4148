"""Random hard instances for two-pattern (2P), forbidden-pattern (FP) and
two-forbidden-pattern (2FP) document indexing, and their set-intersection
reduction.

Each generator re-draws with a derived seed until the instance passes the
worst-case checks (large outputs, small ell-wise intersections), so "with
high probability" becomes an explicit accept/retry loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .combinatorics import rank_subset, unrank_subset
from .errors import GenerationFailure
from .model import (
    NEGATIVE,
    POSITIVE,
    Doc2P,
    Pattern2P,
    Query2P,
    SIInstance,
    bits,
)

FAMILIES = ("2p", "fp", "2fp")


@dataclass(frozen=True)
class Params2P:
    sigma_bits: int
    trailing_bits: int
    doc_count: int
    ell: int = 8
    beta: int = 6
    seed: int = 0
    max_attempts: int = 16

    def __post_init__(self):
        if self.sigma_bits < 1:
            raise ValueError("sigma_bits must be >= 1")
        if not 0 <= self.trailing_bits <= self.sigma_bits:
            raise ValueError("need 0 <= p <= sigma")
        if self.doc_count < 0:
            raise ValueError("doc_count must be >= 0")
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.ell < 2:
            raise ValueError("ell must be >= 2")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    @property
    def chars(self) -> int:
        """Non-delimiter characters, 2^sigma - 1."""
        return (1 << self.sigma_bits) - 1

    @property
    def n(self) -> int:
        return self.doc_count << self.sigma_bits


def negative_subset_size(sigma_bits: int, p: int) -> int:
    """Size m of each document's Sigma_2 subset, chosen so that
    1 - m/|Sigma_2| is as close as possible to 2^-p."""
    size = 1 << sigma_bits
    return int(math.floor(size * (1 - 2.0 ** -p) + 0.5))


def query_count(family: str, sigma_bits: int, p: int) -> int:
    chars = (1 << sigma_bits) - 1
    if family == "2p":
        return math.comb(chars, 2) << (2 * p)
    if family == "fp":
        return (chars << p) << sigma_bits
    if family == "2fp":
        return 1 << (2 * sigma_bits)
    raise ValueError(f"unknown family {family!r}")


def describe_params(params: Params2P, family: str = "2p") -> Dict[str, int]:
    return {
        "n": params.n,
        "queries": query_count(family, params.sigma_bits, params.trailing_bits),
        "docs": params.doc_count,
        "chars": params.chars,
    }


def suggest_params_2p(n: int, q_time: int, c_p: float = 1.0, c_ell: float = 1.0) -> Params2P:
    """One reading of the asymptotic recipe: D = Q(n) 2^{2p}, sigma = log(n/D),
    p = beta = c_p sqrt(log(n/Q(n))), ell = c_ell log n. Constants are free."""
    p = max(1, math.ceil(c_p * math.sqrt(math.log2(max(n / q_time, 2)))))
    D = q_time << (2 * p)
    sigma = max(p, round(math.log2(max(n / D, 2))))
    ell = max(2, math.ceil(c_ell * math.log2(n)))
    return Params2P(sigma_bits=sigma, trailing_bits=p, doc_count=D, ell=ell, beta=max(1, p))


class QueryFamily2P:
    """Implicit, rank-indexable query set of one family."""

    def __init__(self, family: str, sigma_bits: int, p: int):
        if family not in FAMILIES:
            raise ValueError(f"unknown family {family!r}")
        self.family = family
        self.sigma_bits = sigma_bits
        self.p = p
        self.chars = (1 << sigma_bits) - 1

    def __len__(self) -> int:
        return query_count(self.family, self.sigma_bits, self.p)

    def __getitem__(self, rank: int) -> Query2P:
        if not 0 <= rank < len(self):
            raise IndexError(rank)
        p, sig = self.p, self.sigma_bits
        if self.family == "2p":
            pair, rest = divmod(rank, 1 << (2 * p))
            i, j = unrank_subset(pair, self.chars, 2)
            b1, b2 = divmod(rest, 1 << p)
            return Query2P(Pattern2P(i + 1, bits(b1, p)), Pattern2P(j + 1, bits(b2, p)))
        if self.family == "fp":
            pos, c = divmod(rank, 1 << sig)
            i, b = divmod(pos, 1 << p)
            return Query2P(Pattern2P(i + 1, bits(b, p)),
                           Pattern2P((1 << sig) + c, polarity=NEGATIVE))
        c1, c2 = divmod(rank, 1 << sig)
        return Query2P(Pattern2P((1 << sig) + c1, polarity=NEGATIVE, part=0),
                       Pattern2P((1 << sig) + c2, polarity=NEGATIVE, part=1))

    def rank(self, q: Query2P) -> int:
        p, sig = self.p, self.sigma_bits
        if self.family == "2p":
            a, b = sorted((q.first, q.second), key=lambda x: x.initial)
            pair = rank_subset((a.initial - 1, b.initial - 1), self.chars)
            return (pair << (2 * p)) + (int(a.trailing or "0", 2) << p) + int(b.trailing or "0", 2)
        if self.family == "fp":
            pos, neg = (q.first, q.second) if q.first.polarity == POSITIVE else (q.second, q.first)
            r = ((pos.initial - 1) << p) + int(pos.trailing or "0", 2)
            return (r << sig) + neg.initial - (1 << sig)
        a, b = sorted((q.first, q.second), key=lambda x: x.part)
        return ((a.initial - (1 << sig)) << sig) + b.initial - (1 << sig)

    def __iter__(self) -> Iterator[Query2P]:
        for r in range(len(self)):
            yield self[r]


@dataclass(frozen=True)
class Instance2P:
    params: Params2P
    docs: Tuple[Doc2P, ...]
    family: str = "2p"
    m_neg: int = 0
    attempts: int = 1
    # sharing report from the acceptance check, when one was run
    sharing: object = field(default=None, compare=False, repr=False)

    @property
    def queries(self) -> QueryFamily2P:
        return QueryFamily2P(self.family, self.params.sigma_bits, self.params.trailing_bits)

    @property
    def size_cells(self) -> int:
        """Total rendered characters over all documents."""
        return sum(len(d.render()) for d in self.docs)

    @cached_property
    def prefix_matrix(self) -> np.ndarray:
        """D x (2^sigma - 1) array of each payload's p-bit prefix as an integer."""
        p = self.params.trailing_bits
        C = self.params.chars if self.family != "2fp" else 0
        out = np.zeros((len(self.docs), C), dtype=np.int64)
        if p and C:
            for d, doc in enumerate(self.docs):
                out[d] = [int(s[:p], 2) for s in doc.payloads]
        return out

    def neg_matrix(self, part: int) -> np.ndarray:
        """D x |Sigma_2| boolean membership of each Sigma_2 symbol in a negative part."""
        size = 1 << self.params.sigma_bits
        out = np.zeros((len(self.docs), size), dtype=bool)
        for d, doc in enumerate(self.docs):
            for c in doc.neg_parts[part]:
                out[d, c - size] = True
        return out


# -- generation -------------------------------------------------------------

def _rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), attempt]))


def _draw_payloads(rng, params: Params2P):
    sig = params.sigma_bits
    raw = rng.integers(0, 1 << sig, size=(params.doc_count, params.chars), dtype=np.int64)
    return [tuple(bits(int(v), sig) for v in row) for row in raw]


def _draw_subsets(rng, params: Params2P, m: int, count: int):
    size = 1 << params.sigma_bits
    out = []
    for _ in range(count):
        pick = rng.choice(size, size=m, replace=False) if m else ()
        out.append(frozenset(int(c) + size for c in pick))
    return out


def draw_docs(params: Params2P, family: str, rng: np.random.Generator):
    m = negative_subset_size(params.sigma_bits, params.trailing_bits) if family != "2p" else 0
    D = params.doc_count
    if family == "2p":
        docs = [Doc2P(pl) for pl in _draw_payloads(rng, params)]
    elif family == "fp":
        pls = _draw_payloads(rng, params)
        negs = _draw_subsets(rng, params, m, D)
        docs = [Doc2P(pl, (s,)) for pl, s in zip(pls, negs)]
    else:
        first = _draw_subsets(rng, params, m, D)
        second = _draw_subsets(rng, params, m, D)
        docs = [Doc2P((), (a, b)) for a, b in zip(first, second)]
    return tuple(docs), m


def expected_query_output(params: Params2P, family: str) -> float:
    p = params.trailing_bits
    D = params.doc_count
    if family == "2p":
        return D * 2.0 ** (-2 * p)
    keep = 1 - negative_subset_size(params.sigma_bits, p) / (1 << params.sigma_bits)
    if family == "fp":
        return D * 2.0 ** -p * keep
    return D * keep * keep


def acceptance_failure(inst: Instance2P) -> Optional[str]:
    """Name of the first failing acceptance check, or None."""
    failed, _ = _acceptance(inst)
    return failed


def _acceptance(inst: Instance2P):
    from . import verify

    prm = inst.params
    ok, _ = verify.check_eq_int(prm.sigma_bits, prm.trailing_bits, prm.ell, prm.beta, prm.doc_count)
    if not ok:
        return "eq-int", None
    need = expected_query_output(prm, inst.family) / 2
    if verify.min_query_output(inst).value < need:
        return "min-output", None
    rep = verify.max_docs_sharing_patterns(inst, prm.ell, stop_at=prm.beta)
    if rep.max_shared >= prm.beta:
        return "max-shared", rep
    return None, rep


def _generate(params: Params2P, family: str, check: bool = True) -> Instance2P:
    from . import verify

    if check:
        ok, lhs = verify.check_eq_int(params.sigma_bits, params.trailing_bits,
                                      params.ell, params.beta, params.doc_count)
        if not ok:
            # no amount of re-sampling fixes the parameter choice
            raise GenerationFailure("eq-int", 0, f"log2 lhs = {lhs:.3f}")
    failed = None
    for attempt in range(params.max_attempts):
        docs, m = draw_docs(params, family, _rng(params.seed, attempt))
        inst = Instance2P(params, docs, family, m, attempt + 1)
        if not check:
            return inst
        failed, rep = _acceptance(inst)
        if failed is None:
            return Instance2P(params, docs, family, m, attempt + 1, rep)
    raise GenerationFailure(failed, params.max_attempts)


def generate_2p(params: Params2P, check: bool = True) -> Instance2P:
    return _generate(params, "2p", check)


def generate_fp(params: Params2P, check: bool = True) -> Instance2P:
    return _generate(params, "fp", check)


def generate_2fp(params: Params2P, check: bool = True) -> Instance2P:
    return _generate(params, "2fp", check)


GENERATORS = {"2p": generate_2p, "fp": generate_fp, "2fp": generate_2fp}


# -- set intersection reduction ---------------------------------------------

@dataclass(frozen=True)
class SIReduction:
    si: SIInstance
    p: int
    index: Dict[Tuple[int, str], int] = field(repr=False)

    def image(self, q: Query2P) -> Tuple[int, int]:
        return self.index[(q.first.initial, q.first.trailing)], self.index[(q.second.initial, q.second.trailing)]


def reduce_to_si(inst: Instance2P) -> SIReduction:
    """One set per (initial character, p-bit string): the documents whose
    payload for that character starts with those bits. For a fixed
    character these sets are disjoint and cover all documents."""
    if inst.family != "2p":
        raise ValueError("set-intersection reduction is defined for 2P instances")
    p = inst.params.trailing_bits
    pm = inst.prefix_matrix
    sets = []
    index = {}
    for i in range(1, inst.params.chars + 1):
        col = pm[:, i - 1]
        for b in range(1 << p):
            index[(i, bits(b, p))] = len(sets)
            sets.append(frozenset(int(d) for d in np.flatnonzero(col == b)))
    universe = frozenset(range(len(inst.docs)))
    return SIReduction(SIInstance(tuple(sets), universe), p, index)
