"""Command-line entry point.

Exit status: 0 when every check passes, 2 when a property fails, 1 on
usage errors (bad subcommand, flag, parameter or input file).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Dict, List, Optional

import numpy as np

from . import instfile, pointer, semigroup, structures, verify
from .errors import (
    CrossCheckMismatch,
    FamilyTooLarge,
    FormatError,
    GenerationFailure,
    MalformedTrace,
    MemoryBudgetExceeded,
)
from .model import Pattern2P, Query2P, bits

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2

# short parameter names accepted on the command line
ALIASES = {
    "2p": {"sigma": "sigma_bits", "p": "trailing_bits", "D": "doc_count", "attempts": "max_attempts"},
    "wci-query": {"attempts": "max_attempts"},
    "wci-space": {"sigma": "sigma_w", "D": "doc_count"},
    "gpi": {},
}
ALIASES["fp"] = ALIASES["2fp"] = ALIASES["2p"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_kv(text: Optional[str]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise UsageError(f"expected k=v in --params, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _num(v: str):
    try:
        return int(v)
    except ValueError:
        return Fraction(v)


def _need(kv: Dict[str, str], *keys):
    missing = [k for k in keys if k not in kv]
    if missing:
        raise UsageError(f"missing parameter(s): {', '.join(missing)}")
    return [_num(kv[k]) for k in keys]


def _report(check: str, mode: str, value, bound, ok: bool) -> str:
    return f"check={check} mode={mode} value={value} bound={bound} pass={int(ok)}"


def _read(path: Optional[str]) -> str:
    if not path:
        raise UsageError("--in is required")
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(str(exc)) from exc


def _write(path: Optional[str], text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_instance(path: Optional[str]):
    if not path:
        raise UsageError("--in is required")
    return instfile.parse_instance(_read(path))


# -- subcommands ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    family = args.family
    if family not in instfile.ALL_FAMILIES:
        raise UsageError(f"unknown family {family!r}; choose from {', '.join(instfile.ALL_FAMILIES)}")
    raw = {ALIASES[family].get(k, k): v for k, v in parse_kv(args.params).items()}
    if args.seed is not None and family != "gpi":
        raw["seed"] = str(args.seed)
    if args.no_check:
        raw["check"] = "0"
    if family == "gpi" and "D" in raw:
        p = int(raw.get("p", 0))
        D = int(raw.pop("D"))
        if p < 1 or D % (p + 1):
            raise UsageError(f"text length D={D} is not a multiple of p+1")
        raw["blocks"] = str(D // (p + 1))
    try:
        inst, check = instfile.generate(family, raw)
    except GenerationFailure as exc:
        print(f"gen: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (TypeError, ValueError, FormatError) as exc:
        raise UsageError(f"bad parameters: {exc}") from exc
    _write(args.out, instfile.emit_instance(inst, check))
    return EXIT_OK


def cmd_verify(args) -> int:
    kv = parse_kv(args.params)
    check = args.check
    if check == "eq-int":
        sigma, p, ell, beta, D = _need(kv, "sigma", "p", "ell", "beta", "D")
        ok, lhs = verify.check_eq_int(sigma, p, ell, beta, D)
        print(_report("eq-int", "exact", f"{lhs:.6f}", f"{verify.LOG2_ONE_THIRD:.6f}", ok))
        return EXIT_OK if ok else EXIT_FAIL
    if check == "count-ineq":
        sigma, p, beta, ell, D, q = _need(kv, "sigma", "p", "beta", "ell", "D", "q_time")
        res = semigroup.check_count_inequalities(sigma, p, beta, ell, D, q)
        print(_report("eq-count", "exact", sigma, res.sigma_cap, res.eq_count_ok))
        print(_report("eq-count2", "exact", q, res.q_time_cap, res.eq_count2_ok))
        return EXIT_OK if res.eq_count_ok and res.eq_count2_ok else EXIT_FAIL
    if check == "mc-rate":
        return _verify_mc(kv, args.seed or 0)
    inst = _load_instance(args.inp)
    if check == "regen":
        text = _read(args.inp)
        ok = instfile.regenerate(text) == text
        print(_report("regen", "exact", int(ok), 1, ok))
        return EXIT_OK if ok else EXIT_FAIL
    if check == "min-output":
        from .twopattern import Instance2P, expected_query_output

        try:
            res = verify.min_query_output(inst, sample=_opt_int(kv, "sample"))
        except FamilyTooLarge as exc:
            raise UsageError(str(exc)) from exc
        bound = 0
        if isinstance(inst, Instance2P):
            bound = expected_query_output(inst.params, inst.family) / 2
        elif "bound" in kv:
            bound = float(kv["bound"])
        ok = res.value >= bound
        print(_report("min-output", "exact" if res.exhaustive else "sampled", res.value, bound, ok))
        return EXIT_OK if ok else EXIT_FAIL
    if check == "max-shared":
        ell = int(kv.get("ell", getattr(inst.params, "ell", 0)))
        beta = int(kv.get("beta", getattr(inst.params, "beta", 0)))
        rep = verify.max_docs_sharing_patterns(inst, ell, stop_at=beta)
        mode = "exact" if rep.exhaustive else "lower-bound"
        print(_report("max-shared", mode, rep.max_shared, beta, rep.max_shared < beta))
        print(f"witness_docs={','.join(str(d) for d in rep.witness_docs)}")
        return EXIT_OK if rep.max_shared < beta else EXIT_FAIL
    raise UsageError(f"unknown check {check!r}")


def _opt_int(kv, key):
    return int(kv[key]) if key in kv else None


def _verify_mc(kv, seed: int) -> int:
    from .twopattern import Params2P

    sigma, p = _need(kv, "sigma", "p")
    family = kv.get("family", "2p")
    target = kv.get("target", "pattern")
    trials = int(kv.get("trials", 100_000))
    ell = int(kv.get("ell", 3))
    params = Params2P(sigma, p, 1, ell=max(ell, 2))
    pats = [Pattern2P(i, bits(0, p)) for i in range(1, ell + 1)]
    if target == "pattern":
        tgt = pats[0]
    elif target == "query":
        tgt = Query2P(pats[0], pats[1])
    elif target == "tuple":
        tgt = tuple(pats)
    else:
        raise UsageError("target must be pattern, query or tuple")
    rep = verify.mc_match_rate(family, params, tgt, trials=trials, seed=seed)
    ok = abs(rep.z_score) <= 4
    print(_report(f"mc-{target}", "mc", f"{rep.estimate:.6g}", f"{rep.analytic:.6g}", ok) + f" z={rep.z_score:.3f}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bound(args) -> int:
    kv = parse_kv(args.params)
    try:
        if args.kind == "chazelle":
            q, t, ell, beta = _need(kv, "q", "t", "ell", "beta")
            alpha = _num(kv.get("alpha", "1"))
            cert = pointer.chazelle_bound(q, t, ell, beta, alpha,
                                          c_cat=_num(kv.get("c_cat", str(pointer.C_CAT))),
                                          c_alpha=_num(kv.get("c_alpha", str(pointer.C_ALPHA))))
        else:
            t, v, beta = _need(kv, "t", "v", "beta")
            cert = pointer.afshani_bound(t, v, beta, c_beta=_num(kv.get("c_beta", str(pointer.C_BETA))),
                                         attested=kv.get("g_attested", "1") != "0")
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(str(exc)) from exc
    _write(args.out, cert.to_lines())
    return EXIT_OK


def cmd_bench(args) -> int:
    inst = _load_instance(args.inp)
    try:
        st = structures.build_structure(args.structure, inst)
    except MemoryBudgetExceeded as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    kv = parse_kv(args.params)
    fam = structures.query_family(inst)
    if args.rank:
        try:
            ranks = sorted({int(x) for x in args.rank.split(",") if x})
        except ValueError as exc:
            raise UsageError(f"bad --rank list: {exc}") from exc
        if any(not 0 <= r < len(fam) for r in ranks):
            raise UsageError(f"--rank outside [0, {len(fam)})")
    else:
        ranks, _ = structures.sample_ranks(len(fam), _opt_int(kv, "sample"), args.seed or 0)
    if args.inject_fault is not None:
        k = args.inject_fault
        if not 0 <= k < len(fam):
            raise UsageError(f"fault rank {k} out of range")
        st = structures.inject_fault(st, k, fam)
        if k not in ranks:
            ranks = sorted(ranks + [k])
    try:
        res = structures.run_benchmark(st, inst, ranks=ranks, workers=int(kv.get("workers", 1)))
    except CrossCheckMismatch as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(args.out, res.to_csv())
    ok = all(res.product >= c.value for c in res.certificates)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_audit(args) -> int:
    inst = _load_instance(args.inp)
    if not args.scheme:
        raise UsageError("--scheme is required")
    scheme = semigroup.parse_scheme(_read(args.scheme))
    kv = parse_kv(args.params)
    beta = int(kv.get("beta", getattr(inst.params, "beta", 0)))
    ell = int(kv.get("ell", getattr(inst.params, "ell", 0)))
    if beta < 1 or ell < 1:
        raise UsageError("beta and ell must be given")
    audit = semigroup.audit_crowded(scheme, inst, beta, ell)
    _write(args.out, audit.to_csv())
    print(f"certified={int(audit.certified)} max_usable={audit.max_usable} bound={ell * ell} "
          f"flagged={len(audit.flagged)} precondition={audit.precondition}", file=sys.stderr)
    return EXIT_OK if audit.certified and not audit.flagged else EXIT_FAIL


def cmd_partition(args) -> int:
    kv = parse_kv(args.params)
    if "beta" not in kv:
        raise UsageError("missing parameter: beta")
    beta = int(kv["beta"])
    if args.inp:
        graph, _ = pointer.parse_graph(_read(args.inp))
        try:
            tree = pointer.tree_from_graph(graph)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        n = int(kv.get("n", 1000))
        rng = np.random.default_rng(args.seed or 0)
        tree = pointer.random_binary_tree(n, float(kv.get("mark", 0.3)), rng)
    try:
        pieces = pointer.partition_marked_tree(tree, beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    problems = pointer.check_partition(tree, pieces, beta)
    lines = [f"piece root={p.root} marked={p.marked} size={len(p.nodes)}" for p in pieces]
    lines.append(f"pieces={len(pieces)} marked={tree.marked_count} beta={beta} ok={int(not problems)}")
    _write(args.out, "\n".join(lines) + "\n")
    for msg in problems:
        print(f"partition-tree: {msg}", file=sys.stderr)
    return EXIT_OK if not problems else EXIT_FAIL


def cmd_trace(args) -> int:
    graph, traces = pointer.parse_graph(_read(args.inp))
    kv = parse_kv(args.params)
    required = {int(x) for x in kv.get("required", "").split(";") if x}
    bad = False
    for tr in traces:
        try:
            res = pointer.validate_trace(graph, tr, required or tr.outputs_claimed)
        except MalformedTrace as exc:
            print(f"trace={tr.query} malformed index={exc.index}")
            bad = True
            continue
        print(f"trace={tr.query} time={res.time} space={graph.space} ok={int(res.ok)} "
              f"missing={','.join(str(e) for e in sorted(res.missing))}")
        bad |= not res.ok
    return EXIT_FAIL if bad else EXIT_OK


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmlab", description="Hard-instance generators, property checks and bound certificates.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, inp=False):
        p.add_argument("--params", help="comma-separated k=v pairs")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (default stdout)")
        if inp:
            p.add_argument("--in", dest="inp", help="input file")

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("family")
    g.add_argument("--no-check", action="store_true", help="skip acceptance checks")
    common(g)
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("verify", help="run one check")
    v.add_argument("check", choices=["eq-int", "count-ineq", "mc-rate", "min-output", "max-shared", "regen"])
    common(v, inp=True)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bound", help="emit a lower-bound certificate")
    b.add_argument("kind", choices=["chazelle", "afshani"])
    common(b)
    b.set_defaults(func=cmd_bound)

    be = sub.add_parser("bench", help="benchmark a reference structure")
    be.add_argument("--structure", required=True,
                    choices=list(structures.KINDS) + list(structures.ALIASES))
    be.add_argument("--inject-fault", type=int, metavar="RANK",
                    help="corrupt the answer to one query (tests the cross-check)")
    be.add_argument("--rank", help="comma-separated query ranks to run instead of a sample")
    common(be, inp=True)
    be.set_defaults(func=cmd_bench)

    a = sub.add_parser("audit-sg", help="audit crowded semi-group sums")
    a.add_argument("--scheme", help="scheme file")
    common(a, inp=True)
    a.set_defaults(func=cmd_audit)

    pt = sub.add_parser("partition-tree", help="partition a marked binary tree")
    common(pt, inp=True)
    pt.set_defaults(func=cmd_partition)

    tr = sub.add_parser("trace", help="validate pointer-machine traces")
    common(tr, inp=True)
    tr.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits on --help and on errors; hand back the code instead
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pmlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"pmlab: malformed input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
