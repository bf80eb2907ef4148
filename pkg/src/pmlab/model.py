"""Documents, patterns and queries for the four problem families, plus the
brute-force matchers everything else is checked against.

The matchers here are intentionally naive. Faster paths live elsewhere and
are tested for agreement with these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

POSITIVE = "positive"
NEGATIVE = "negative"

WILDCARD = "*"


@dataclass(frozen=True)
class Alphabet2P:
    sigma_bits: int
    negative_half: bool = False

    def __post_init__(self):
        if self.sigma_bits < 1:
            raise ValueError("sigma_bits must be >= 1")

    @property
    def size(self) -> int:
        return 1 << self.sigma_bits

    @property
    def positive_chars(self) -> range:
        # character 0 is the '#' delimiter
        return range(1, self.size)

    @property
    def negative_chars(self) -> range:
        return range(self.size, 2 * self.size)


@dataclass(frozen=True)
class Doc2P:
    """A two-pattern document.

    ``payloads[i - 1]`` is the sigma-bit payload following character ``i``.
    ``neg_parts`` holds the Sigma_2 subsets used by negative patterns: one
    for FP documents, two for 2FP documents (which carry no payloads).
    """

    payloads: Tuple[str, ...]
    neg_parts: Tuple[FrozenSet[int], ...] = ()

    @property
    def second_part(self) -> Optional[FrozenSet[int]]:
        return self.neg_parts[-1] if self.neg_parts else None

    @property
    def sigma_bits(self) -> int:
        return len(self.payloads[0]) if self.payloads else 0

    def render(self) -> Tuple[str, ...]:
        """Literal character sequence: '#', i, payload_i for every part, then
        '#', c for each Sigma_2 symbol of each negative part (sorted)."""
        out = []
        for i, bits in enumerate(self.payloads, start=1):
            out.extend(("#", str(i), bits))
        for part in self.neg_parts:
            for c in sorted(part):
                out.extend(("#", str(c)))
        return tuple(out)


@dataclass(frozen=True)
class Pattern2P:
    initial: int
    trailing: str = ""
    polarity: str = POSITIVE
    # index into Doc2P.neg_parts for negative patterns
    part: int = 0

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if set(self.trailing) - {"0", "1"}:
            raise ValueError(f"trailing bits must be 0/1, got {self.trailing!r}")
        if self.polarity == NEGATIVE and self.trailing:
            raise ValueError("negative patterns carry no trailing bits")


@dataclass(frozen=True)
class Query2P:
    first: Pattern2P
    second: Pattern2P

    def __post_init__(self):
        if _slot(self.first) == _slot(self.second):
            raise ValueError("the two patterns of a query need distinct initial characters")

    @property
    def family(self) -> str:
        pols = (self.first.polarity, self.second.polarity)
        if pols == (POSITIVE, POSITIVE):
            return "2p"
        if pols == (NEGATIVE, NEGATIVE):
            return "2fp"
        return "fp"


def _slot(pat: Pattern2P):
    if pat.polarity == POSITIVE:
        return (POSITIVE, pat.initial)
    return (NEGATIVE, pat.part, pat.initial)


class CharacterOutOfRange(ValueError):
    pass


class MissingSecondPart(ValueError):
    pass


def match_positive(doc: Doc2P, pat: Pattern2P) -> bool:
    if pat.polarity != POSITIVE:
        raise ValueError("match_positive needs a positive pattern")
    if not 1 <= pat.initial <= len(doc.payloads):
        raise CharacterOutOfRange(f"initial character {pat.initial} not in [1, {len(doc.payloads)}]")
    payload = doc.payloads[pat.initial - 1]
    if len(pat.trailing) > len(payload):
        raise ValueError(f"{len(pat.trailing)} trailing bits exceed sigma={len(payload)}")
    return payload.startswith(pat.trailing)


def match_negative(doc: Doc2P, pat: Pattern2P) -> bool:
    if pat.polarity != NEGATIVE:
        raise ValueError("match_negative needs a negative pattern")
    if not doc.neg_parts:
        raise MissingSecondPart("negative pattern evaluated on a document without a second part")
    if pat.part >= len(doc.neg_parts):
        raise MissingSecondPart(f"document has no negative part {pat.part}")
    return pat.initial not in doc.neg_parts[pat.part]


def match_pattern(doc: Doc2P, pat: Pattern2P) -> bool:
    if pat.polarity == POSITIVE:
        return match_positive(doc, pat)
    return match_negative(doc, pat)


def eval_query(instance, q: Query2P) -> FrozenSet[int]:
    """Ids of documents matched by both patterns of ``q``.

    ``instance`` is anything with a ``docs`` sequence of Doc2P.
    """
    return frozenset(
        i for i, doc in enumerate(instance.docs)
        if match_pattern(doc, q.first) and match_pattern(doc, q.second)
    )


# -- wild cards -------------------------------------------------------------

@dataclass(frozen=True)
class WciDoc:
    symbols: str


@dataclass(frozen=True)
class WciPattern:
    cells: str

    @property
    def wildcard_count(self) -> int:
        return self.cells.count(WILDCARD)

    @property
    def wild_positions(self) -> Tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.cells) if c == WILDCARD)


def match_wildcard(doc: WciDoc, pat: WciPattern) -> bool:
    if len(doc.symbols) != len(pat.cells):
        raise ValueError(f"length mismatch: doc {len(doc.symbols)} vs pattern {len(pat.cells)}")
    return all(c == WILDCARD or c == s for s, c in zip(doc.symbols, pat.cells))


# -- gapped patterns --------------------------------------------------------

@dataclass(frozen=True)
class GappedPattern:
    subpatterns: Tuple[str, ...]
    gap_high: int
    gap_low: int = 0

    def __post_init__(self):
        subs = self.subpatterns
        if any(a >= b for a, b in zip(subs, subs[1:])):
            raise ValueError("subpatterns must be distinct and lexicographically increasing")
        if len({len(s) for s in subs}) > 1:
            raise ValueError("subpatterns must share one length")

    @property
    def kappa(self) -> int:
        return len(self.subpatterns) - 1

    def render(self) -> str:
        gap = "{%d,%d}" % (self.gap_low, self.gap_high)
        return gap.join(self.subpatterns)


@dataclass(frozen=True)
class GpiText:
    blocks: Tuple[str, ...]

    def __post_init__(self):
        b = self.blocks
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("text blocks must be distinct and lexicographically increasing")

    def render(self) -> str:
        return "".join("#" + b for b in self.blocks)


def block_gap(a: int, b: int, p: int) -> int:
    """Characters strictly between a subpattern matched at block ``a`` and the
    next one matched at block ``b`` (a < b) in the rendered text."""
    return (b - a - 1) * (p + 1) + 1


def match_gapped(text: GpiText, pat: GappedPattern) -> bool:
    index = {blk: i for i, blk in enumerate(text.blocks)}
    p = len(text.blocks[0]) if text.blocks else 0
    if pat.subpatterns and len(pat.subpatterns[0]) != p:
        raise ValueError("subpattern length differs from block length")
    try:
        where = [index[s] for s in pat.subpatterns]
    except KeyError:
        return False
    for a, b in zip(where, where[1:]):
        gap = block_gap(a, b, p)
        if not pat.gap_low <= gap <= pat.gap_high:
            return False
    return True


# -- set intersection -------------------------------------------------------

@dataclass(frozen=True)
class SIInstance:
    sets: Tuple[FrozenSet[int], ...]
    universe: FrozenSet[int] = field(default=frozenset())

    def __post_init__(self):
        if not self.universe:
            object.__setattr__(self, "universe", frozenset().union(*self.sets) if self.sets else frozenset())
        for s in self.sets:
            if not s <= self.universe:
                raise ValueError("set member outside the universe")

    @property
    def total_size(self) -> int:
        return sum(len(s) for s in self.sets)


def set_intersection(si: SIInstance, i: int, j: int) -> FrozenSet[int]:
    n = len(si.sets)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"set index out of range: ({i}, {j}) with {n} sets")
    if i == j:
        raise ValueError("set_intersection needs two distinct indices")
    return si.sets[i] & si.sets[j]


def make_si(sets: Iterable[Iterable[int]]) -> SIInstance:
    return SIInstance(tuple(frozenset(s) for s in sets))


def bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def all_bitstrings(width: int) -> Sequence[str]:
    return [bits(v, width) for v in range(1 << width)]
