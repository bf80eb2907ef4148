"""Line-oriented instance files.

::

    PMLAB 1 <family>
    param <k>=<v>          (every generator parameter, seed included)
    doc <id> <fields>
    queries implicit
    stagelog <k>=<v>

2P/FP/2FP documents carry ``pay=<hex,...>`` and ``neg<part>=<hex,...>``
fields; WCI documents carry their symbol string; GPI files list the
dictionary patterns as comma-separated subpatterns. Query families are
never stored: they follow from the parameters (and, for WCI, from the
documents).
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Tuple

from .errors import FormatError
from .gapped import GpiDictionary, ParamsGpi, build_dictionary
from .model import Doc2P, WciDoc
from .twopattern import FAMILIES, GENERATORS, Instance2P, Params2P, negative_subset_size
from .wildcard import (
    ParamsWciQuery,
    ParamsWciSpace,
    WciInstance,
    generate_wci_query_hard,
    generate_wci_space_hard,
    query_patterns,
    space_instance,
)

VERSION = 1
ALL_FAMILIES = FAMILIES + ("wci-query", "wci-space", "gpi")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    return str(v)


def _hex(v: int, width: int) -> str:
    return format(v, f"0{width}x")


def _params_lines(params, extra: Dict[str, object] = None) -> List[str]:
    out = [f"param {f.name}={_fmt(getattr(params, f.name))}" for f in dataclasses.fields(params)]
    for k, v in (extra or {}).items():
        out.append(f"param {k}={_fmt(v)}")
    return out


def emit_instance(instance, check: bool = True) -> str:
    """Render an instance. ``check`` records whether generation ran the
    acceptance checks, which regeneration must repeat."""
    if isinstance(instance, Instance2P):
        return _emit_2p(instance, check)
    if isinstance(instance, WciInstance):
        return _emit_wci(instance)
    if isinstance(instance, GpiDictionary):
        return _emit_gpi(instance)
    raise TypeError(f"unsupported instance type {type(instance).__name__}")


def _emit_2p(inst: Instance2P, check: bool) -> str:
    prm = inst.params
    width = max(1, -(-prm.sigma_bits // 4))
    neg_width = -(-(prm.sigma_bits + 1) // 4)
    lines = [f"PMLAB {VERSION} {inst.family}"]
    lines += _params_lines(prm, {"check": check})
    for i, doc in enumerate(inst.docs):
        fields = [f"doc {i}"]
        if doc.payloads:
            fields.append("pay=" + ",".join(_hex(int(b, 2), width) for b in doc.payloads))
        for k, part in enumerate(doc.neg_parts):
            fields.append(f"neg{k}=" + ",".join(_hex(c, neg_width) for c in sorted(part)))
        lines.append(" ".join(fields))
    lines.append("queries implicit")
    lines.append(f"stagelog attempts={inst.attempts}")
    lines.append(f"stagelog m_neg={inst.m_neg}")
    return "\n".join(lines) + "\n"


def _emit_wci(inst: WciInstance) -> str:
    lines = [f"PMLAB {VERSION} {inst.kind}"]
    lines += _params_lines(inst.params)
    lines += [f"doc {i} {d.symbols}" for i, d in enumerate(inst.docs)]
    lines.append("queries implicit")
    lines += [f"stagelog {k}={v}" for k, v in inst.stage_log.items()]
    return "\n".join(lines) + "\n"


def _emit_gpi(d: GpiDictionary) -> str:
    lines = [f"PMLAB {VERSION} gpi"]
    lines += _params_lines(d.params)
    lines += [f"doc {i} {','.join(pat.subpatterns)}" for i, pat in enumerate(d)]
    lines.append("queries implicit")
    return "\n".join(lines) + "\n"


# -- parsing -------------------------------------------------------------------------------

PARAM_TYPES = {
    "2p": Params2P, "fp": Params2P, "2fp": Params2P,
    "wci-query": ParamsWciQuery, "wci-space": ParamsWciSpace, "gpi": ParamsGpi,
}


def _coerce(cls, raw: Dict[str, str]):
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in raw:
            continue
        v = raw[f.name]
        if f.name in ("c", "epsilon"):
            kwargs[f.name] = float(v)
        elif v == "None":
            kwargs[f.name] = None
        else:
            kwargs[f.name] = int(v)
    unknown = set(raw) - {f.name for f in dataclasses.fields(cls)} - {"check"}
    if unknown:
        raise FormatError(f"unknown parameters: {', '.join(sorted(unknown))}")
    return cls(**kwargs)


def read_header(text: str) -> Tuple[str, Dict[str, str], List[str], Dict[str, str]]:
    """(family, raw params, doc lines, stagelog)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty instance file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "PMLAB":
        raise FormatError("missing 'PMLAB <version> <family>' header")
    if head[1] != str(VERSION):
        raise FormatError(f"unsupported format version {head[1]}")
    family = head[2]
    if family not in ALL_FAMILIES:
        raise FormatError(f"unknown family {family!r}")
    params, docs, log = {}, [], {}
    seen_queries = False
    for ln in lines[1:]:
        tok = ln.split(None, 1)
        key = tok[0]
        rest = tok[1] if len(tok) > 1 else ""
        if key in ("param", "stagelog"):
            if "=" not in rest:
                raise FormatError(f"expected {key} k=v, got {ln!r}")
            k, v = rest.split("=", 1)
            (params if key == "param" else log)[k.strip()] = v.strip()
        elif key == "doc":
            docs.append(rest)
        elif key == "queries":
            if rest.strip() != "implicit":
                raise FormatError("only 'queries implicit' is supported")
            seen_queries = True
        else:
            raise FormatError(f"unknown record {key!r}")
    if not seen_queries:
        raise FormatError("missing 'queries implicit' line")
    return family, params, docs, log


def parse_instance(text: str):
    family, raw, doc_lines, log = read_header(text)
    try:
        params = _coerce(PARAM_TYPES[family], raw)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad parameters: {exc}") from exc
    try:
        if family in FAMILIES:
            return _parse_2p(family, params, doc_lines, log)
        if family == "gpi":
            d = build_dictionary(params)
            if len(doc_lines) != len(d):
                raise FormatError(f"expected {len(d)} dictionary lines, got {len(doc_lines)}")
            for i, ln in enumerate(doc_lines):
                idx, subs = ln.split()
                if int(idx) != i or tuple(subs.split(",")) != d[i].subpatterns:
                    raise FormatError(f"dictionary line {i} does not match the parameters")
            return d
        docs = []
        for i, ln in enumerate(doc_lines):
            idx, sym = ln.split()
            if int(idx) != i:
                raise FormatError(f"doc ids out of order at {idx}")
            if len(sym) != params.m:
                raise FormatError(f"doc {idx} has length {len(sym)}, expected {params.m}")
            docs.append(WciDoc(sym))
        stage = {k: int(v) for k, v in log.items()}
        if family == "wci-query":
            patterns, _, _ = query_patterns(docs, params)
            return WciInstance("wci-query", params, tuple(docs), patterns, (), stage)
        inst = space_instance(docs, params)
        return dataclasses.replace(inst, stage_log=stage or inst.stage_log)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def _parse_2p(family: str, params: Params2P, doc_lines: List[str], log: Dict[str, str]) -> Instance2P:
    sig = params.sigma_bits
    docs = []
    for i, ln in enumerate(doc_lines):
        tok = ln.split()
        if int(tok[0]) != i:
            raise FormatError(f"doc ids out of order at {tok[0]}")
        pays, negs = (), {}
        for t in tok[1:]:
            k, v = t.split("=", 1)
            vals = [int(x, 16) for x in v.split(",")] if v else []
            if k == "pay":
                if any(x >> sig for x in vals):
                    raise FormatError(f"doc {i}: payload wider than {sig} bits")
                pays = tuple(format(x, f"0{sig}b") for x in vals)
            elif k.startswith("neg"):
                negs[int(k[3:])] = frozenset(vals)
            else:
                raise FormatError(f"doc {i}: unknown field {k!r}")
        docs.append(Doc2P(pays, tuple(negs[k] for k in sorted(negs))))
    m = int(log.get("m_neg", negative_subset_size(sig, params.trailing_bits) if family != "2p" else 0))
    return Instance2P(params, tuple(docs), family, m, int(log.get("attempts", 1)))


# -- generation from header -------------------------------------------------------------------

def generate(family: str, raw: Dict[str, str]):
    """Build the instance a header describes. Returns (instance, check flag)."""
    params = _coerce(PARAM_TYPES[family], raw)
    check = raw.get("check", "1") not in ("0", "false", "False")
    if family in FAMILIES:
        return GENERATORS[family](params, check=check), check
    if family == "wci-query":
        return generate_wci_query_hard(params), check
    if family == "wci-space":
        return generate_wci_space_hard(params), check
    return build_dictionary(params), check


def regenerate(text: str) -> str:
    """Re-run the generator named in ``text``'s header and emit the result."""
    family, raw, _, _ = read_header(text)
    inst, check = generate(family, raw)
    return emit_instance(inst, check)
