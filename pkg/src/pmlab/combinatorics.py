"""Lexicographic ranking of k-subsets of range(n)."""

from itertools import islice
from math import comb
from typing import Iterator, Sequence, Tuple


def rank_subset(subset: Sequence[int], n: int) -> int:
    k = len(subset)
    r = 0
    prev = -1
    for i, s in enumerate(subset):
        if not prev < s < n:
            raise ValueError(f"not a strictly increasing subset of range({n}): {tuple(subset)}")
        for x in range(prev + 1, s):
            r += comb(n - x - 1, k - i - 1)
        prev = s
    return r


def unrank_subset(rank: int, n: int, k: int) -> Tuple[int, ...]:
    total = comb(n, k)
    if not 0 <= rank < total:
        raise IndexError(f"rank {rank} out of range for C({n},{k}) = {total}")
    out = []
    x = 0
    for i in range(k):
        while True:
            c = comb(n - x - 1, k - i - 1)
            if rank < c:
                out.append(x)
                x += 1
                break
            rank -= c
            x += 1
    return tuple(out)


def iter_subsets(n: int, k: int, start: int = 0, stop: int = None) -> Iterator[Tuple[int, ...]]:
    """Subsets with ranks in [start, stop), in lexicographic order."""
    total = comb(n, k)
    stop = total if stop is None else min(stop, total)
    if start >= stop:
        return iter(())
    return islice(_combinations_from(unrank_subset(start, n, k), n), stop - start)


def _combinations_from(first, n):
    cur = list(first)
    k = len(cur)
    while True:
        yield tuple(cur)
        i = k - 1
        while i >= 0 and cur[i] == n - k + i:
            i -= 1
        if i < 0:
            return
        cur[i] += 1
        for j in range(i + 1, k):
            cur[j] = cur[j - 1] + 1
