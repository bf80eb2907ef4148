"""Semi-group (arithmetic) model: stored sums over document weights, exact
query answering from those sums, and the crowded-sum audit.

Answers are judged on index sets, never on evaluated values, so a
non-faithful operation such as max cannot make a wrong plan look right.
"""

from __future__ import annotations

import csv
import io
import math
import operator
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import FormatError, SearchCapExceeded
from .model import eval_query


@dataclass(frozen=True)
class SemiGroupSpec:
    name: str
    op: Callable[[int, int], int]
    identity: int
    faithful: bool

    def combine(self, values: Iterable[int]) -> int:
        out = self.identity
        for v in values:
            out = self.op(out, v)
        return out

    def probe_axioms(self, samples: Sequence[int]) -> bool:
        """Associativity and commutativity on all sampled triples/pairs."""
        f = self.op
        for a in samples:
            for b in samples:
                if f(a, b) != f(b, a):
                    return False
                for c in samples:
                    if f(f(a, b), c) != f(a, f(b, c)):
                        return False
        return True

    def has_inverse(self, x: int, candidates: Iterable[int]) -> bool:
        """Whether some candidate y gives x . y = identity (for x != identity)."""
        return x != self.identity and any(self.op(x, y) == self.identity for y in candidates)


ADD = SemiGroupSpec("add", operator.add, 0, True)
# x max x = x, so formal sums with different coefficients can agree
MAX = SemiGroupSpec("max", max, 0, False)
SEMIGROUPS = {"add": ADD, "max": MAX}


@dataclass(frozen=True)
class StoredSum:
    id: str
    docs: FrozenSet[int]
    coefficients: Mapping[int, int] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.docs:
            raise ValueError(f"sum {self.id} has an empty index set")
        if self.coefficients is None:
            object.__setattr__(self, "coefficients", {d: 1 for d in self.docs})
        if set(self.coefficients) != set(self.docs):
            raise ValueError(f"sum {self.id}: coefficient keys differ from its index set")
        if any(c < 1 for c in self.coefficients.values()):
            raise ValueError(f"sum {self.id}: coefficients must be positive")


@dataclass(frozen=True)
class SumScheme:
    sums: Tuple[StoredSum, ...]
    weight: Mapping[int, int] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ids = [s.id for s in self.sums]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sum ids")

    @classmethod
    def of(cls, index_sets: Mapping[str, Iterable[int]], weight: Mapping[int, int] = None) -> "SumScheme":
        return cls(tuple(StoredSum(k, frozenset(v)) for k, v in index_sets.items()), dict(weight or {}))

    @classmethod
    def singletons(cls, doc_ids: Iterable[int], extra: Mapping[str, Iterable[int]] = None) -> "SumScheme":
        sets = {f"s{d}": [d] for d in doc_ids}
        sets.update(extra or {})
        return cls.of(sets)

    def __len__(self) -> int:
        return len(self.sums)

    def by_id(self, sid: str) -> StoredSum:
        for s in self.sums:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def value(self, sid: str, sg: SemiGroupSpec) -> int:
        s = self.by_id(sid)
        vals = []
        for d in sorted(s.docs):
            vals.extend([self.weight.get(d, 1)] * s.coefficients[d])
        return sg.combine(vals)


@dataclass(frozen=True)
class SumAnswer:
    sum_ids: Tuple[str, ...]
    coefficients: Mapping[str, int]

    def index_multiset(self, scheme: SumScheme) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for sid in self.sum_ids:
            s = scheme.by_id(sid)
            k = self.coefficients[sid]
            for d, a in s.coefficients.items():
                out[d] = out.get(d, 0) + k * a
        return out

    def evaluate(self, scheme: SumScheme, sg: SemiGroupSpec) -> int:
        vals = []
        for sid in self.sum_ids:
            vals.extend([scheme.value(sid, sg)] * self.coefficients[sid])
        return sg.combine(vals)


def _target_of(instance, query) -> FrozenSet[int]:
    if instance is None:
        return frozenset(query)
    return frozenset(eval_query(instance, query))


def answer_with_sums(scheme: SumScheme, instance, query, cap: int = None,
                     require: Iterable[str] = ()) -> Optional[SumAnswer]:
    """Pick stored sums whose index sets exactly tile the query's matching
    documents (each used once, coefficient one).

    ``instance`` may be None, in which case ``query`` is the target doc set.
    Returns None when no combination exists; raises SearchCapExceeded when
    only the ``cap`` on the number of sums stopped the search. ``require``
    names sums that must be part of the answer.
    """
    target = _target_of(instance, query)
    usable = [s for s in scheme.sums
              if s.docs <= target and all(a == 1 for a in s.coefficients.values())]
    required = [scheme.by_id(r) for r in require]
    chosen: List[str] = []
    covered = set()
    for s in required:
        if s not in usable or covered & s.docs:
            return None
        covered |= s.docs
        chosen.append(s.id)
    if cap is not None and len(chosen) > cap:
        raise SearchCapExceeded(f"{len(chosen)} required sums exceed cap {cap}")
    # larger sums first, so a sum equal to the whole target wins immediately
    containing: Dict[int, List[StoredSum]] = {}
    for s in sorted(usable, key=lambda s: (-len(s.docs), s.id)):
        for d in s.docs:
            containing.setdefault(d, []).append(s)
    failed: Dict[FrozenSet[int], int] = {}
    cap_hit = [False]

    def search(left: FrozenSet[int], budget) -> Optional[List[str]]:
        if not left:
            return []
        if budget is not None and budget <= 0:
            cap_hit[0] = True
            return None
        key_budget = math.inf if budget is None else budget
        if failed.get(left, -1) >= key_budget:
            return None
        d = min(left)
        for s in containing.get(d, ()):
            if s.docs <= left:
                rest = search(left - s.docs, None if budget is None else budget - 1)
                if rest is not None:
                    return [s.id] + rest
        failed[left] = key_budget
        return None

    left = frozenset(target - covered)
    budget = None if cap is None else cap - len(chosen)
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, len(left) + 200))
    try:
        found = search(left, budget)
    finally:
        sys.setrecursionlimit(limit)
    if found is None:
        if cap_hit[0]:
            raise SearchCapExceeded(f"no cover within {cap} sums; search was cut by the cap")
        return None
    ids = tuple(chosen + found)
    return SumAnswer(ids, {sid: 1 for sid in ids})


# -- crowded-sum audit ----------------------------------------------------------------

@dataclass(frozen=True)
class SumUsage:
    sum_id: str
    size: int
    usable: int
    flagged: bool


@dataclass(frozen=True)
class CrowdedAudit:
    beta: int
    ell: int
    usage: Tuple[SumUsage, ...]
    max_usable: int
    flagged: Tuple[str, ...]
    certified: bool
    precondition: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sum", "size", "usable_queries", "flag"])
        for u in self.usage:
            w.writerow([u.sum_id, u.size, u.usable, int(u.flagged)])
        return buf.getvalue()


def usable_query_count(instance, docs: Iterable[int]) -> int:
    """Number of queries whose matching set contains every doc in ``docs``."""
    from . import verify
    from .twopattern import Instance2P, query_count

    ids = sorted(docs)
    if isinstance(instance, Instance2P):
        total = query_count(instance.family, instance.params.sigma_bits, instance.params.trailing_bits)
    else:
        total = instance.query_family_size()
    frac = verify.intersection_measure(instance, ids)
    return int(frac * total)


def _precondition(instance, beta: int, ell: int, verify_precondition: bool) -> Tuple[bool, str]:
    from . import verify

    rep = getattr(instance, "sharing", None)
    if rep is not None and rep.arity == ell and rep.exhaustive and getattr(instance.params, "beta", None) == beta:
        return rep.max_shared < beta, f"max_shared={rep.max_shared} (from generation)"
    if not verify_precondition:
        return False, "not verified"
    rep = verify.max_docs_sharing_patterns(instance, ell, stop_at=beta)
    return rep.max_shared < beta, f"max_shared={rep.max_shared}"


def audit_crowded(scheme: SumScheme, instance, beta: int, ell: int,
                  verify_precondition: bool = True, workers: int = 1) -> CrowdedAudit:
    """Count, for each sum over at least beta documents, the queries it can
    serve. Sums usable for more than ell^2 queries are flagged. The audit is
    certified only when no beta documents share ell patterns on the instance."""
    if beta < 1 or ell < 1:
        raise ValueError("beta and ell must be >= 1")
    ok, note = _precondition(instance, beta, ell, verify_precondition)
    crowded = [s for s in scheme.sums if len(s.docs) >= beta]

    def one(s: StoredSum) -> SumUsage:
        u = usable_query_count(instance, s.docs)
        return SumUsage(s.id, len(s.docs), u, u > ell * ell)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            usage = tuple(pool.map(one, crowded))
    else:
        usage = tuple(one(s) for s in crowded)
    flagged = tuple(u.sum_id for u in usage if u.flagged)
    return CrowdedAudit(beta, ell, usage, max((u.usable for u in usage), default=0), flagged, ok, note)


# -- parameter inequalities -------------------------------------------------------------

@dataclass(frozen=True)
class CountCheck:
    eq_count_ok: bool
    eq_count2_ok: bool
    sigma_cap: Fraction
    q_time_cap: Fraction


def check_count_inequalities(sigma: int, p: int, beta: int, ell: int, D: int, q_time) -> CountCheck:
    """sigma <= p beta / 2 and Q(n) < D / (2 2^{2p} beta), both exact.
    ``ell`` is carried for reporting; neither inequality involves it."""
    if min(sigma, p, beta, ell, D) < 1:
        raise ValueError("parameters must be positive")
    sigma_cap = Fraction(p * beta, 2)
    q_cap = Fraction(D, 2 * (1 << (2 * p)) * beta)
    return CountCheck(sigma <= sigma_cap, Fraction(q_time) < q_cap, sigma_cap, q_cap)


def least_doc_count(q_time, p: int, beta: int) -> int:
    """Smallest D with q_time < D / (2 2^{2p} beta)."""
    scale = 2 * (1 << (2 * p)) * beta
    return math.floor(Fraction(q_time) * scale) + 1


def semigroup_params(n: int, q_time, p: int = 2) -> Dict[str, int]:
    """Desk parameters following the counting-model recipe: constant p,
    least D meeting the query-time inequality, sigma = log(n/D), beta
    large enough for sigma <= p beta/2, ell = ceil(log D)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    sigma = 0
    D = least_doc_count(q_time, p, 1)
    for _ in range(64):
        sigma = max(1, round(math.log2(max(n / D, 2))))
        beta = max(math.ceil(math.log2(max(n / D, 2))), math.ceil(2 * sigma / p))
        D2 = least_doc_count(q_time, p, beta)
        if D2 == D:
            break
        D = D2
    ell = max(1, math.ceil(math.log2(D)))
    return {"sigma": sigma, "p": p, "beta": beta, "ell": ell, "D": D}


# -- scheme files -------------------------------------------------------------------------

def parse_scheme(text: str) -> SumScheme:
    """``sum <id> docs <id,...>`` lines; ``weight <doc> <value>`` optional."""
    sets: Dict[str, List[int]] = {}
    weight: Dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "sum" and len(tok) == 4 and tok[2] == "docs":
                if tok[1] in sets:
                    raise FormatError(f"line {lineno}: duplicate sum id {tok[1]}")
                sets[tok[1]] = [int(x) for x in tok[3].split(",") if x]
            elif tok[0] == "weight" and len(tok) == 3:
                weight[int(tok[1])] = int(tok[2])
            else:
                raise FormatError(f"line {lineno}: expected 'sum <id> docs <ids>'")
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    try:
        return SumScheme.of(sets, weight)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def emit_scheme(scheme: SumScheme) -> str:
    lines = [f"sum {s.id} docs {','.join(str(d) for d in sorted(s.docs))}" for s in scheme.sums]
    lines += [f"weight {d} {w}" for d, w in sorted(scheme.weight.items())]
    return "\n".join(lines) + "\n"
