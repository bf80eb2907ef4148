"""Deterministic kappa-GPI construction: every standard gapped pattern over
p-bit subpatterns, queried by texts of distinct, sorted '#'-prefixed blocks.

Block arithmetic (p = 2, blocks 00 01 10 11)::

    # 0 0 # 0 1 # 1 0 # 1 1
      ^^^   ^^^
      a=0   b=1   gap = (b - a - 1)(p + 1) + 1 = 1 character ('#')

A subpattern at block a followed by one at block b leaves
(b - a - 1)(p + 1) + 1 characters between them, so a gap bound gamma allows
block distances up to floor((gamma - 1)/(p + 1)) + 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Sequence, Tuple

import numpy as np

from .combinatorics import iter_subsets, rank_subset, unrank_subset
from .model import GappedPattern, GpiText, bits


@dataclass(frozen=True)
class ParamsGpi:
    p: int
    kappa: int
    gamma: int
    blocks: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.blocks < 1:
            raise ValueError("blocks must be >= 1")
        if (1 << self.p) < self.blocks:
            raise ValueError(f"2^p = {1 << self.p} < blocks = {self.blocks}: texts cannot have distinct blocks")
        if (1 << self.p) < self.kappa + 1:
            raise ValueError("fewer p-bit strings than subpatterns per pattern")

    @property
    def D(self) -> int:
        return self.blocks * (self.p + 1)

    @property
    def dense_regime(self) -> bool:
        return self.D >= 2 * self.kappa * self.gamma

    @classmethod
    def from_text_length(cls, p, kappa, gamma, D):
        if D % (p + 1):
            raise ValueError(f"text length D={D} is not a multiple of p+1={p + 1}")
        return cls(p, kappa, gamma, D // (p + 1))


def adjacency_window(p: int, gamma: int) -> int:
    """Largest allowed block distance between consecutive subpattern matches."""
    return max(0, (gamma - 1) // (p + 1) + 1)


class GpiDictionary:
    """All C(2^p, kappa+1) standard gapped patterns, in lexicographic order."""

    def __init__(self, params: ParamsGpi):
        self.params = params

    def __len__(self) -> int:
        return comb(1 << self.params.p, self.params.kappa + 1)

    def _wrap(self, subset) -> GappedPattern:
        p = self.params.p
        return GappedPattern(tuple(bits(x, p) for x in subset), self.params.gamma)

    def __getitem__(self, rank: int) -> GappedPattern:
        return self._wrap(unrank_subset(rank, 1 << self.params.p, self.params.kappa + 1))

    def rank(self, pat: GappedPattern) -> int:
        return rank_subset([int(s, 2) for s in pat.subpatterns], 1 << self.params.p)

    def __iter__(self) -> Iterator[GappedPattern]:
        return self.slice(0, len(self))

    def slice(self, start: int, stop: int) -> Iterator[GappedPattern]:
        prm = self.params
        return (self._wrap(s) for s in iter_subsets(1 << prm.p, prm.kappa + 1, start, stop))

    @property
    def size_chars(self) -> int:
        prm = self.params
        return len(self) * (prm.kappa + 1) * prm.p


class TextFamily:
    """All C(2^p, blocks) query texts, in lexicographic order."""

    def __init__(self, params: ParamsGpi):
        self.params = params

    def __len__(self) -> int:
        return comb(1 << self.params.p, self.params.blocks)

    def _wrap(self, subset) -> GpiText:
        return GpiText(tuple(bits(x, self.params.p) for x in subset))

    def __getitem__(self, rank: int) -> GpiText:
        return self._wrap(unrank_subset(rank, 1 << self.params.p, self.params.blocks))

    def rank(self, text: GpiText) -> int:
        return rank_subset([int(b, 2) for b in text.blocks], 1 << self.params.p)

    def __iter__(self) -> Iterator[GpiText]:
        return self.slice(0, len(self))

    def slice(self, start: int, stop: int) -> Iterator[GpiText]:
        prm = self.params
        return (self._wrap(s) for s in iter_subsets(1 << prm.p, prm.blocks, start, stop))


def build_dictionary(params: ParamsGpi) -> GpiDictionary:
    return GpiDictionary(params)


def enumerate_texts(params: ParamsGpi) -> TextFamily:
    return TextFamily(params)


def count_matches_exact(text: GpiText, params: ParamsGpi) -> int:
    """Number of dictionary patterns matching ``text``.

    Each matching pattern corresponds to exactly one increasing run of
    kappa+1 block indices whose consecutive distances are within the
    adjacency window, so we count those runs.
    """
    if len(text.blocks) != params.blocks:
        raise ValueError("text has the wrong number of blocks")
    if text.blocks and len(text.blocks[0]) != params.p:
        raise ValueError("text block length differs from p")
    w = adjacency_window(params.p, params.gamma)
    ways = [1] * params.blocks
    for _ in range(params.kappa):
        prefix = [0]
        for x in ways:
            prefix.append(prefix[-1] + x)
        ways = [prefix[b] - prefix[max(0, b - w)] for b in range(params.blocks)]
    return sum(ways)


def output_scale(params: ParamsGpi) -> float:
    """D gamma^kappa / (p+1)^(kappa+1), the order of every text's output."""
    return params.D * params.gamma ** params.kappa / (params.p + 1) ** (params.kappa + 1)


# count / output_scale over every dense regime text with gamma >= p+1,
# p in 2..5, kappa in 1..2, blocks <= 12 (see calibrate_output_band)
OUTPUT_BAND = (0.5, 2.25)


def calibrate_output_band(ps=(2, 3, 4, 5), kappas=(1, 2), max_gamma=40, max_blocks=12) -> Tuple[float, float]:
    """(min, max) of count / scale over a parameter grid. The count depends
    only on the block layout, so one text per parameter point suffices."""
    lo, hi = float("inf"), 0.0
    for p in ps:
        for k in kappas:
            for g in range(p + 1, max_gamma):
                for b in range(k + 1, min(1 << p, max_blocks) + 1):
                    try:
                        prm = ParamsGpi(p, k, g, b)
                    except ValueError:
                        continue
                    if not prm.dense_regime:
                        continue
                    ratio = count_matches_exact(enumerate_texts(prm)[0], prm) / output_scale(prm)
                    lo, hi = min(lo, ratio), max(hi, ratio)
    return lo, hi


def sample_texts(params: ParamsGpi, count: int, seed: int = 0) -> list:
    fam = enumerate_texts(params)
    rng = np.random.default_rng(seed)
    return [fam[int(r)] for r in rng.integers(0, len(fam), size=count)]


def ceil_root(beta: int, k: int) -> int:
    """Smallest integer r with r**k >= beta."""
    if beta <= 0:
        return 0
    r = max(1, int(round(beta ** (1.0 / k))))
    while r ** k < beta:
        r += 1
    while r > 1 and (r - 1) ** k >= beta:
        r -= 1
    return r


def check_subpattern_spread(patterns: Iterable[GappedPattern], beta: int, kappa: int) -> Tuple[bool, int]:
    """Whether ``beta`` patterns use at least ceil(beta^(1/(kappa+1)))
    distinct subpatterns between them; returns (ok, union size)."""
    pats = list(patterns)
    if len(pats) != beta:
        raise ValueError(f"expected {beta} patterns, got {len(pats)}")
    union = set()
    for pat in pats:
        union.update(pat.subpatterns)
    return len(union) >= ceil_root(beta, kappa + 1), len(union)


def common_match_bound(params: ParamsGpi, beta: int) -> int:
    """Upper bound on the number of texts matching all of ``beta`` patterns."""
    r = ceil_root(beta, params.kappa + 1)
    if r > params.blocks:
        return 0
    return comb((1 << params.p) - r, params.blocks - r)


def texts_matching_all(params: ParamsGpi, patterns: Sequence[GappedPattern]) -> int:
    """Brute-force count over every text (desk scale only)."""
    from .model import match_gapped

    return sum(1 for t in enumerate_texts(params) if all(match_gapped(t, pat) for pat in patterns))
