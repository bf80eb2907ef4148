"""Reference indexing structures and the benchmark runner.

Time is model time (cells touched), so every number in a benchmark CSV is
deterministic. Answers are always cross-checked against brute force.
"""

from __future__ import annotations

import csv
import io
import time as wallclock
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CrossCheckMismatch, MemoryBudgetExceeded
from .gapped import GpiDictionary, enumerate_texts
from .model import (
    NEGATIVE,
    POSITIVE,
    Pattern2P,
    eval_query,
    match_gapped,
    match_wildcard,
)
from .twopattern import Instance2P
from .wildcard import WciInstance

KINDS = ("naive-scan", "inverted-lists", "full-table")
ALIASES = {"naive": "naive-scan", "inverted": "inverted-lists", "table": "full-table"}
CSV_COLUMNS = ["row", "query", "output", "time", "space", "overhead", "value"]
FULL_TABLE_BUDGET = 5_000_000
DEFAULT_SAMPLE = 200


# -- instance adapters ---------------------------------------------------------------

def query_family(instance):
    """Rank-indexable query family of an instance."""
    if isinstance(instance, Instance2P):
        return instance.queries
    if isinstance(instance, WciInstance):
        return list(instance.iter_queries())
    if isinstance(instance, GpiDictionary):
        return enumerate_texts(instance.params)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def brute_force(instance, q) -> FrozenSet[int]:
    """Ground truth: ids of the stored items reported for query ``q``."""
    if isinstance(instance, Instance2P):
        return eval_query(instance, q)
    if isinstance(instance, WciInstance):
        return frozenset(i for i, d in enumerate(instance.docs) if match_wildcard(d, q))
    if isinstance(instance, GpiDictionary):
        return frozenset(r for r, pat in enumerate(instance) if match_gapped(q, pat))
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def instance_size(instance) -> int:
    """Stored characters: rendered document tokens, WCI cells, or dictionary characters."""
    if isinstance(instance, GpiDictionary):
        return instance.size_chars
    return instance.size_cells


# -- structures ---------------------------------------------------------------------------

@dataclass
class ReferenceStructure:
    kind: str
    instance: object
    space_cells: int
    _answer: Callable = field(repr=False)

    def query(self, q) -> Tuple[FrozenSet[int], int]:
        """(reported ids, model time)."""
        return self._answer(q)


def _naive(instance) -> ReferenceStructure:
    n = instance_size(instance)
    return ReferenceStructure("naive-scan", instance, n, lambda q: (brute_force(instance, q), n))


def _pattern_key(pat: Pattern2P):
    if pat.polarity == POSITIVE:
        return (POSITIVE, pat.initial, pat.trailing)
    return (NEGATIVE, pat.part, pat.initial)


def _inverted(instance) -> ReferenceStructure:
    if not isinstance(instance, Instance2P):
        raise ValueError("inverted-lists supports 2P/FP/2FP instances only")
    prm = instance.params
    p = prm.trailing_bits
    lists: Dict[tuple, np.ndarray] = {}
    if instance.family != "2fp":
        pm = instance.prefix_matrix
        for c in range(prm.chars):
            col = pm[:, c]
            for b in range(1 << p):
                lists[(POSITIVE, c + 1, format(b, f"0{p}b") if p else "")] = np.flatnonzero(col == b)
    if instance.docs:
        size = 1 << prm.sigma_bits
        for part in range(len(instance.docs[0].neg_parts)):
            absent = ~instance.neg_matrix(part)
            for c in range(size):
                lists[(NEGATIVE, part, size + c)] = np.flatnonzero(absent[:, c])
    space = sum(len(v) for v in lists.values())
    empty = np.zeros(0, dtype=np.int64)

    def answer(q):
        a = lists.get(_pattern_key(q.first), empty)
        b = lists.get(_pattern_key(q.second), empty)
        both = np.intersect1d(a, b, assume_unique=True)
        return frozenset(int(x) for x in both), len(a) + len(b)

    return ReferenceStructure("inverted-lists", instance, space, answer)


def _full_table(instance, budget: int) -> ReferenceStructure:
    fam = query_family(instance)
    if len(fam) > budget:
        raise MemoryBudgetExceeded(f"{len(fam)} queries exceed the full-table budget {budget}")
    table = {}
    space = 0
    for q in fam:
        out = brute_force(instance, q)
        space += len(out)
        if space > budget:
            raise MemoryBudgetExceeded(f"full table exceeds {budget} cells")
        table[q] = out

    def answer(q):
        out = table[q]
        return out, 1 + len(out)

    return ReferenceStructure("full-table", instance, space, answer)


def build_structure(kind: str, instance, budget: int = FULL_TABLE_BUDGET) -> ReferenceStructure:
    kind = ALIASES.get(kind, kind)
    if kind == "naive-scan":
        return _naive(instance)
    if kind == "inverted-lists":
        return _inverted(instance)
    if kind == "full-table":
        return _full_table(instance, budget)
    raise ValueError(f"unknown structure kind {kind!r}; expected one of {', '.join(KINDS)}")


def inject_fault(structure: ReferenceStructure, rank_or_query, family=None) -> ReferenceStructure:
    """Copy of ``structure`` that answers one query wrongly (for testing the
    cross-check)."""
    target = family[rank_or_query] if family is not None else rank_or_query
    inner = structure._answer

    def answer(q):
        out, t = inner(q)
        if q == target:
            out = out ^ {-1} if not out else out - {min(out)}
        return out, t

    return ReferenceStructure(structure.kind, structure.instance, structure.space_cells, answer)


# -- benchmark --------------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    rank: int
    output: int
    time: int
    space: int

    @property
    def overhead(self) -> int:
        return self.time - self.output


@dataclass
class BenchResult:
    kind: str
    rows: List[BenchRow]
    space: int
    sampled: bool
    certificates: list = field(default_factory=list)
    wall_seconds: float = 0.0

    @property
    def min_overhead(self) -> int:
        return min((max(r.overhead, 1) for r in self.rows), default=0)

    @property
    def product(self) -> int:
        """space x the smallest per-query search overhead (at least 1)."""
        return self.space * self.min_overhead

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["query", r.rank, r.output, r.time, r.space, r.overhead, ""])
        w.writerow(["meta", "structure", "", "", self.space, "", self.kind])
        w.writerow(["meta", "sampled", "", "", "", "", int(self.sampled)])
        w.writerow(["product", "space*min_overhead", "", "", self.space, self.min_overhead, self.product])
        for cert in self.certificates:
            w.writerow(["certificate", cert.kind, "", "", "", "", repr(cert.value)])
            for k in sorted(cert.inputs):
                w.writerow(["certificate-input", f"{cert.kind}.{k}", "", "", "", "", cert.inputs[k]])
            for k in sorted(cert.constants):
                w.writerow(["certificate-const", f"{cert.kind}.{k}", "", "", "", "", cert.constants[k]])
        return buf.getvalue()


def default_certificates(instance) -> list:
    """Counting-bound certificate for an accepted 2P-family instance: t is
    the exact minimum query output, ell and beta come from the parameters."""
    from . import verify
    from .pointer import chazelle_bound

    if not isinstance(instance, Instance2P) or not instance.docs:
        return []
    t = verify.min_query_output(instance).value
    if t < 1:
        return []
    prm = instance.params
    return [chazelle_bound(len(instance.queries), t, prm.ell, prm.beta, 1)]


def sample_ranks(size: int, sample: Optional[int], seed: int = 0) -> Tuple[List[int], bool]:
    if sample is None:
        sample = size if size <= 2_000 else DEFAULT_SAMPLE
    if sample >= size:
        return list(range(size)), False
    rng = np.random.default_rng(seed)
    return sorted(int(x) for x in rng.choice(size, size=sample, replace=False)), True


def run_benchmark(structure: ReferenceStructure, instance, ranks: Sequence[int] = None,
                  out_path: str = None, workers: int = 1, certificates: list = None,
                  sample: int = None, seed: int = 0) -> BenchResult:
    """Run queries (by rank) against ``structure`` and cross-check every
    answer. Rows come back in rank order whatever the completion order.
    Raises CrossCheckMismatch naming the first offending rank."""
    fam = query_family(instance)
    sampled = False
    if ranks is None:
        ranks, sampled = sample_ranks(len(fam), sample, seed)
    else:
        ranks = sorted(ranks)
        sampled = len(ranks) < len(fam)
    start = wallclock.perf_counter()

    def one(rank):
        q = fam[rank]
        got, t = structure.query(q)
        want = brute_force(instance, q)
        return rank, got == want, len(want), t

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, ranks))
    else:
        results = [one(r) for r in ranks]
    for rank, ok, _, _ in results:
        if not ok:
            raise CrossCheckMismatch(rank)
    rows = [BenchRow(rank, out, t, structure.space_cells) for rank, _, out, t in results]
    if certificates is None:
        certificates = default_certificates(instance)
    res = BenchResult(structure.kind, rows, structure.space_cells, sampled, list(certificates),
                      wallclock.perf_counter() - start)
    if out_path:
        with open(out_path, "w", newline="") as fh:
            fh.write(res.to_csv())
    return res


def read_bench_csv(text: str) -> Dict[str, object]:
    """Parse a benchmark CSV back into query rows, the product and the
    certificate inputs, so the footer can be recomputed offline."""
    rows, certs, inputs, consts, meta = [], {}, {}, {}, {}
    product = None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
    for rec in reader:
        kind = rec["row"]
        if kind == "query":
            rows.append(BenchRow(int(rec["query"]), int(rec["output"]), int(rec["time"]), int(rec["space"])))
        elif kind == "meta":
            meta[rec["query"]] = rec["value"]
        elif kind == "product":
            product = int(rec["value"])
        elif kind == "certificate":
            certs[rec["query"]] = float(rec["value"])
        elif kind == "certificate-input":
            c, k = rec["query"].split(".", 1)
            inputs.setdefault(c, {})[k] = rec["value"]
        elif kind == "certificate-const":
            c, k = rec["query"].split(".", 1)
            consts.setdefault(c, {})[k] = rec["value"]
    return {"rows": rows, "product": product, "certificates": certs,
            "inputs": inputs, "constants": consts, "meta": meta}
