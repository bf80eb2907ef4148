"""Pointer-machine cost model, marked-tree partition and lower-bound
certificates.

A structure is a directed graph of cells with outdegree at most two and a
root; a query explores a connected subgraph from the root. Space is the
number of cells, time the number of cells visited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import FormatError, MalformedTrace

NONE = -1

# binary-tree shape count standing in for the 2^{O(a beta)} reachable sets
C_CAT = 4
C_ALPHA = 1
C_BETA = 1


# -- graphs and traces ----------------------------------------------------------

@dataclass(frozen=True)
class PMNode:
    id: int
    elem: Optional[int] = None
    edges: Tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.edges) > 2:
            raise ValueError(f"node {self.id} has outdegree {len(self.edges)} > 2")


@dataclass(frozen=True)
class PMGraph:
    nodes: Mapping[int, PMNode]
    root: int

    def __post_init__(self):
        if self.root not in self.nodes:
            raise ValueError(f"root {self.root} is not a node")
        for node in self.nodes.values():
            for e in node.edges:
                if e not in self.nodes:
                    raise ValueError(f"edge {node.id} -> {e} leaves the graph")

    @property
    def space(self) -> int:
        return len(self.nodes)

    @classmethod
    def build(cls, nodes: Iterable[PMNode], root: int) -> "PMGraph":
        table = {}
        for n in nodes:
            if n.id in table:
                raise ValueError(f"duplicate node id {n.id}")
            table[n.id] = n
        return cls(table, root)


@dataclass(frozen=True)
class Trace:
    query: str
    visited: Tuple[int, ...]
    outputs_claimed: FrozenSet[int] = frozenset()


@dataclass(frozen=True)
class TraceCheck:
    time: int
    ok: bool
    missing: FrozenSet[int]


def validate_trace(graph: PMGraph, trace: Trace, required: Iterable[int]) -> TraceCheck:
    """Check that ``trace`` is a connected exploration from the root and that
    every required element is stored at a visited node.

    Raises MalformedTrace at the first step that is not reachable from the
    visited prefix (or names an unknown node).
    """
    seen = set()
    reach = set()
    for i, v in enumerate(trace.visited):
        if v not in graph.nodes:
            raise MalformedTrace(i, v, "unknown node")
        if i == 0:
            if v != graph.root:
                raise MalformedTrace(0, v, "trace does not start at the root")
        elif v not in reach:
            raise MalformedTrace(i, v, "no edge from an earlier visited node")
        seen.add(v)
        reach.update(graph.nodes[v].edges)
    stored = {graph.nodes[v].elem for v in seen}
    missing = frozenset(e for e in required if e not in stored)
    return TraceCheck(len(trace.visited), not missing, missing)


def parse_graph(text: str) -> Tuple[PMGraph, List[Trace]]:
    """Read ``node <id> [elem <eid>] <edge?> <edge?>``, ``root <id>`` and
    ``trace <qid> <id>... [out <eid>...]`` lines."""
    nodes, traces, root = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "node":
                nid = int(tok[1])
                rest = tok[2:]
                elem = None
                if rest[:1] == ["elem"]:
                    elem = int(rest[1])
                    rest = rest[2:]
                nodes.append(PMNode(nid, elem, tuple(int(x) for x in rest)))
            elif tok[0] == "root":
                root = int(tok[1])
            elif tok[0] == "trace":
                ids, out = tok[2:], []
                if "out" in ids:
                    k = ids.index("out")
                    ids, out = ids[:k], ids[k + 1:]
                traces.append(Trace(tok[1], tuple(int(x) for x in ids), frozenset(int(x) for x in out)))
            else:
                raise FormatError(f"line {lineno}: unknown record {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    if root is None:
        raise FormatError("missing root line")
    try:
        return PMGraph.build(nodes, root), traces
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def emit_graph(graph: PMGraph, traces: Sequence[Trace] = ()) -> str:
    lines = []
    for nid in sorted(graph.nodes):
        n = graph.nodes[nid]
        parts = ["node", str(nid)]
        if n.elem is not None:
            parts += ["elem", str(n.elem)]
        parts += [str(e) for e in n.edges]
        lines.append(" ".join(parts))
    lines.append(f"root {graph.root}")
    for tr in traces:
        parts = ["trace", tr.query] + [str(v) for v in tr.visited]
        if tr.outputs_claimed:
            parts += ["out"] + [str(e) for e in sorted(tr.outputs_claimed)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# -- marked-tree partition --------------------------------------------------------

@dataclass(frozen=True)
class BinaryTree:
    left: Tuple[int, ...]
    right: Tuple[int, ...]
    marked: Tuple[bool, ...]
    root: int = 0

    def __post_init__(self):
        n = len(self.left)
        if len(self.right) != n or len(self.marked) != n:
            raise ValueError("left/right/marked lengths differ")
        if n and not 0 <= self.root < n:
            raise ValueError("root out of range")

    def __len__(self) -> int:
        return len(self.left)

    @property
    def marked_count(self) -> int:
        return sum(self.marked)

    def children(self, v: int) -> Tuple[int, ...]:
        return tuple(c for c in (self.left[v], self.right[v]) if c != NONE)

    def postorder(self) -> List[int]:
        out, stack = [], [(self.root, False)]
        while stack:
            v, expanded = stack.pop()
            if expanded:
                out.append(v)
                continue
            stack.append((v, True))
            # right pushed first so the left subtree is finished first
            for c in (self.right[v], self.left[v]):
                if c != NONE:
                    stack.append((c, False))
        return out


@dataclass(frozen=True)
class Piece:
    root: int
    nodes: Tuple[int, ...]
    marked: int


def random_binary_tree(n: int, mark_prob: float, rng) -> BinaryTree:
    """Random binary tree on n nodes: each new node hangs off a uniformly
    chosen free child slot. ``rng`` is a numpy Generator."""
    left = [NONE] * n
    right = [NONE] * n
    slots = [(0, 0), (0, 1)] if n else []
    for v in range(1, n):
        k = int(rng.integers(len(slots)))
        parent, side = slots[k]
        slots[k] = slots[-1]
        slots.pop()
        (left if side == 0 else right)[parent] = v
        slots += [(v, 0), (v, 1)]
    marked = tuple(bool(x) for x in rng.random(n) < mark_prob)
    return BinaryTree(tuple(left), tuple(right), marked, 0)


def partition_marked_tree(tree: BinaryTree, beta: int) -> List[Piece]:
    """Split ``tree`` into connected, node-disjoint pieces.

    One bottom-up pass carries the marked count of the still-open part of
    each subtree; a node closes a piece as soon as that count reaches beta,
    so closed pieces hold between beta and 2 beta - 1 marked nodes. The
    left child is always finished (and cut) before the right one. Whatever
    stays open at the root forms the root piece; if it holds no marked
    node it is merged into the first piece hanging below it.
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    n = len(tree)
    if n == 0:
        return []
    acc = [0] * n
    cut = [False] * n
    for v in tree.postorder():
        acc[v] = int(tree.marked[v]) + sum(acc[c] for c in tree.children(v) if not cut[c])
        if acc[v] >= beta:
            cut[v] = True
    head = [NONE] * n
    order = []
    groups: Dict[int, List[int]] = {}
    # pre-order walk assigning every node to its nearest cut ancestor-or-self
    stack = [(tree.root, tree.root)]
    while stack:
        v, h = stack.pop()
        if cut[v]:
            h = v
        head[v] = h
        order.append(v)
        groups.setdefault(h, []).append(v)
        for c in reversed(tree.children(v)):
            stack.append((c, h))
    merged_into = None
    if not cut[tree.root] and acc[tree.root] == 0 and len(groups) > 1:
        # empty root remainder joins the first piece below it
        merged_into = next(head[v] for v in order if head[v] != tree.root)
        groups[merged_into] = groups.pop(tree.root) + groups[merged_into]
    pieces = []
    for h, members in groups.items():
        r = tree.root if h == merged_into else h
        pieces.append(Piece(r, tuple(sorted(members)), sum(tree.marked[v] for v in members)))
    pieces.sort(key=lambda p: (p.root != tree.root, p.root))
    return pieces


def check_partition(tree: BinaryTree, pieces: Sequence[Piece], beta: int) -> List[str]:
    """Problems with a partition: coverage, disjointness, connectivity,
    marked counts of non-root pieces and the piece-count window."""
    problems = []
    n = len(tree)
    owner = [NONE] * n
    for k, piece in enumerate(pieces):
        for v in piece.nodes:
            if owner[v] != NONE:
                problems.append(f"node {v} in two pieces")
            owner[v] = k
    if NONE in owner:
        problems.append(f"{owner.count(NONE)} nodes in no piece")
        return problems
    parent = [NONE] * n
    for v in range(n):
        for c in tree.children(v):
            parent[c] = v
    for k, piece in enumerate(pieces):
        # connected iff exactly one member has its parent outside the piece
        tops = [v for v in piece.nodes if parent[v] == NONE or owner[parent[v]] != k]
        if tops != [piece.root]:
            problems.append(f"piece rooted at {piece.root} is not a subtree (tops {tops[:3]})")
        if piece.root != tree.root and not beta <= piece.marked <= 2 * beta:
            problems.append(f"piece rooted at {piece.root} has {piece.marked} marked nodes")
    t = tree.marked_count
    if t >= beta and not t // (2 * beta) <= len(pieces) <= -(-t // beta) + 1:
        problems.append(f"{len(pieces)} pieces outside [{t // (2 * beta)}, {-(-t // beta) + 1}]")
    if t < beta and len(pieces) != 1:
        problems.append("fewer than beta marked nodes but more than one piece")
    return problems


def tree_from_graph(graph: PMGraph) -> BinaryTree:
    """Read a binary tree from the graph format: edges are children (left
    first), and a node is marked when it stores an element."""
    ids = sorted(graph.nodes)
    pos = {v: i for i, v in enumerate(ids)}
    left, right, marked = [NONE] * len(ids), [NONE] * len(ids), [False] * len(ids)
    indeg = [0] * len(ids)
    for v in ids:
        node = graph.nodes[v]
        kids = [pos[e] for e in node.edges]
        for c in kids:
            indeg[c] += 1
        if kids:
            left[pos[v]] = kids[0]
        if len(kids) > 1:
            right[pos[v]] = kids[1]
        marked[pos[v]] = node.elem is not None
    if any(d > 1 for d in indeg) or indeg[pos[graph.root]]:
        raise ValueError("graph is not a tree rooted at its root")
    tree = BinaryTree(tuple(left), tuple(right), tuple(marked), pos[graph.root])
    if len(tree.postorder()) != len(ids):
        raise ValueError("graph has nodes unreachable from the root")
    return tree


# -- certificates -------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCertificate:
    kind: str
    inputs: Dict[str, object]
    constants: Dict[str, object]
    value: float
    log2_value: float
    unbounded: bool = False
    notes: Dict[str, str] = field(default_factory=dict)

    def to_lines(self) -> str:
        lines = [f"kind={self.kind}"]
        for k in sorted(self.inputs):
            lines.append(f"in.{k}={self.inputs[k]}")
        for k in sorted(self.constants):
            lines.append(f"const.{k}={self.constants[k]}")
        lines.append(f"value={self.value!r}")
        lines.append(f"log2_value={self.log2_value!r}")
        lines.append(f"unbounded={int(self.unbounded)}")
        for k in sorted(self.notes):
            lines.append(f"note.{k}={self.notes[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "BoundCertificate":
        kv = {}
        for raw in text.splitlines():
            raw = raw.strip()
            if not raw:
                continue
            if "=" not in raw:
                raise FormatError(f"not a key=value line: {raw!r}")
            k, v = raw.split("=", 1)
            kv[k] = v
        try:
            inputs = {k[3:]: Fraction(v) for k, v in kv.items() if k.startswith("in.")}
            consts = {k[6:]: Fraction(v) for k, v in kv.items() if k.startswith("const.")}
            notes = {k[5:]: v for k, v in kv.items() if k.startswith("note.")}
            inputs = {k: _plain(v) for k, v in inputs.items()}
            consts = {k: _plain(v) for k, v in consts.items()}
            return cls(kv["kind"], inputs, consts, float(kv["value"]), float(kv["log2_value"]),
                       bool(int(kv.get("unbounded", "0"))), notes)
        except (KeyError, ValueError, ZeroDivisionError) as exc:
            raise FormatError(f"bad certificate: {exc}") from exc

    def recompute(self) -> "BoundCertificate":
        """Re-evaluate from the stored inputs and constants."""
        i, c = self.inputs, self.constants
        if self.kind == "chazelle":
            return chazelle_bound(i["q_count"], i["t"], i["ell"], i["beta"], i["alpha"],
                                  c_cat=c["c_cat"], c_alpha=c["c_alpha"])
        if self.kind == "afshani":
            return afshani_bound(i["t"], i["v"], i["beta"], c_beta=c["c_beta"],
                                 attested=bool(i.get("g_attested", 0)))
        raise ValueError(f"unknown certificate kind {self.kind!r}")


def _plain(x: Fraction):
    return int(x) if x.denominator == 1 else x


def _log2(x) -> float:
    x = Fraction(x)
    # exact-ish log2 of a rational with big numerators and denominators
    return _log2_int(x.numerator) - _log2_int(x.denominator)


def _log2_int(n: int) -> float:
    if n <= 0:
        raise ValueError("log of non-positive value")
    shift = max(0, n.bit_length() - 60)
    return math.log2(n >> shift) + shift


def _pow2(e: float) -> float:
    try:
        return 2.0 ** e
    except OverflowError:
        return math.inf


def chazelle_arity(alpha, beta: int) -> int:
    """The navigation budget alpha*beta, rounded up to an integer."""
    ab = Fraction(alpha) * beta
    return math.ceil(ab)


def chazelle_bound(q_count, t, ell, beta, alpha=1, c_cat=C_CAT, c_alpha=C_ALPHA) -> BoundCertificate:
    """Space lower bound c t |Q| / (beta ell) divided by c_cat^{ab} C(ab, beta),
    ab = alpha*beta, evaluated in log space."""
    if q_count < 1 or t < 1 or beta < 1 or ell < 1:
        raise ValueError("need q_count, t, beta, ell >= 1")
    if Fraction(alpha) * beta < beta:
        raise ValueError("need alpha*beta >= beta")
    if c_cat < 1 or c_alpha <= 0:
        raise ValueError("constants out of range")
    ab = chazelle_arity(alpha, beta)
    lg = (_log2(c_alpha) + _log2(t) + _log2(q_count) - _log2(beta) - _log2(ell)
          - ab * _log2(c_cat) - _log2_int(math.comb(ab, beta)))
    inputs = {"q_count": _plain(Fraction(q_count)), "t": _plain(Fraction(t)), "ell": _plain(Fraction(ell)),
              "beta": int(beta), "alpha": _plain(Fraction(alpha))}
    consts = {"c_cat": _plain(Fraction(c_cat)), "c_alpha": _plain(Fraction(c_alpha))}
    return BoundCertificate("chazelle", inputs, consts, _pow2(lg), lg)


def chazelle_exact(cert: BoundCertificate) -> Fraction:
    """The chazelle certificate's value as an exact rational."""
    i, c = cert.inputs, cert.constants
    ab = chazelle_arity(i["alpha"], i["beta"])
    num = Fraction(c["c_alpha"]) * Fraction(i["t"]) * Fraction(i["q_count"])
    den = Fraction(i["beta"]) * Fraction(i["ell"]) * Fraction(c["c_cat"]) ** ab * math.comb(ab, i["beta"])
    return num / den


def afshani_bound(t, v, beta, c_beta=C_BETA, attested: bool = True) -> BoundCertificate:
    """t / v * 2^{-c_beta beta}. ``attested`` records that the caller checked
    t is at least the query search overhead. A zero measure yields a
    distinct 'unbounded' certificate."""
    v = Fraction(v)
    if t < 0 or beta < 0:
        raise ValueError("need t, beta >= 0")
    if not 0 <= v <= 1:
        raise ValueError("measure v must lie in [0, 1]")
    inputs = {"t": _plain(Fraction(t)), "v": _plain(v), "beta": int(beta), "g_attested": int(bool(attested))}
    consts = {"c_beta": _plain(Fraction(c_beta))}
    if v == 0:
        return BoundCertificate("afshani", inputs, consts, math.inf, math.inf, True)
    if t == 0:
        return BoundCertificate("afshani", inputs, consts, 0.0, -math.inf)
    lg = _log2(t) - _log2(v) - float(Fraction(c_beta) * beta)
    return BoundCertificate("afshani", inputs, consts, _pow2(lg), lg)


def afshani_exact(cert: BoundCertificate) -> Fraction:
    i, c = cert.inputs, cert.constants
    if cert.unbounded:
        raise ValueError("unbounded certificate has no finite value")
    e = Fraction(c["c_beta"]) * i["beta"]
    if e.denominator != 1:
        raise ValueError("exact evaluation needs an integral c_beta * beta")
    return Fraction(i["t"]) / Fraction(i["v"]) / (2 ** int(e))


def relative_error(approx: float, exact: Fraction) -> float:
    if exact == 0:
        return abs(approx)
    return float(abs(Fraction(approx) - exact) / abs(exact))
