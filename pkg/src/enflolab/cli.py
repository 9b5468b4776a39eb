"""Command-line entry point: ``enflo <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path


from . import indices
from .errors import ConvergenceError, DomainError, InputError, ResourceError, SearchFailure
from .interpolation import interp_spec_from, spr_result
from .report import emit_report, fmt_float, dumps
from .schlumprecht import FlatBlockVec, s_norm, s_norm_flat_detail
from .suites import SUITES, SuiteConfig, run_suite
from .typecotype import kl_search, type_cotype_table
from .vectors import NormSpec, SparseVec, dual_norm, lattice_norm


def _real(text: str) -> float:
    if text.lower() in ("inf", "infinity", "oo"):
        return math.inf
    return float(text)


def _load_vector(path: str) -> SparseVec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "coeffs" not in data:
        raise InputError(f"{path}: expected {{\"role\": ..., \"coeffs\": {{index: \"num/den\"}}}}")
    return SparseVec.from_json(data)


def _vector_source(args) -> SparseVec | FlatBlockVec:
    if getattr(args, "flat", None):
        return FlatBlockVec.parse(args.flat)
    if getattr(args, "vector", None):
        return _load_vector(args.vector)
    if getattr(args, "ones", None):
        return FlatBlockVec(((args.ones, 1.0),))
    raise InputError("give --flat, --vector or --ones")


def _print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_verify(args) -> int:
    cfg = SuiteConfig(
        suite=args.suite, p=args.p, r=args.r, depth=args.depth, cases=args.cases, seed=args.seed,
        max_level=args.max_level, operators=args.operators, vanishing=args.vanishing,
        samples=args.samples, n=args.n, eps=args.eps, timings=args.timings,
    )
    status, report = run_suite(cfg)
    text = emit_report(report, args.out, args.csv)
    if not args.out:
        sys.stdout.write(text)
    for c in report["checks"]:
        sys.stderr.write(f"{c['status'].upper():5} {c['name']}\n")
    return status


def cmd_norm(args) -> int:
    v = _vector_source(args)
    if args.kind == "s":
        if isinstance(v, FlatBlockVec):
            res = s_norm_flat_detail(v)
            if res.exact:
                value = res.value
            elif v.length <= 4096:
                value = s_norm(v.expand(), args.tol)
            else:
                value = res.value
                sys.stderr.write("note: long runs were cut on a coarse grid; the value is a lower bound\n")
        else:
            value = s_norm(v, args.tol)
    else:
        if isinstance(v, FlatBlockVec):
            raise InputError("the lattice norm needs --vector")
        spec = NormSpec.build(args.p, max(indices.block_of(max(v.support() or (1,))), 4))
        value = dual_norm(v, spec) if v.role == "fun" else lattice_norm(v, spec)
    print(f"{fmt_float(value)}")
    return 0


def cmd_interp(args) -> int:
    v = _vector_source(args)
    z = v.expand() if isinstance(v, FlatBlockVec) else v
    spec = interp_spec_from(args.p, args.r)
    res = spr_result(z, args.p, args.r, args.tol)
    out = {"p": args.p, "r": args.r, "theta": spec.theta, "t": spec.t}
    if isinstance(res, float):
        out.update(value=res, witness=None, stalled=False)
    else:
        out.update(value=res.value, witness=res.factorization, stalled=res.stalled, equal_split=res.equal_split)
    _print(dumps(out), args.out)
    return 0


def cmd_cotype(args) -> int:
    res = kl_search(args.n, args.eps, args.p, args.r)
    out = {"vectors": res.vectors, "certificate": res.certificate}
    if args.table:
        n_list = [int(x) for x in args.n_list.split(",")]
        grid = [_real(x) for x in args.grid.split(",")] if args.grid else [args.p, args.r]
        table = type_cotype_table(args.p, args.r, n_list, grid)
        Path(args.table).write_text(table.to_csv())
        out["table"] = table
    _print(dumps(out), args.out)
    return 0 if res.certificate["pass"] else 1


def cmd_export(args) -> int:
    pairs = indices.build_partitions(args.max_level)
    text = json.dumps([p.to_json() for p in pairs], sort_keys=True) + "\n"
    _print(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enflo", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", nargs="?", default="enflo", choices=SUITES + ("all",))
    v.add_argument("--p", type=float, default=None)
    v.add_argument("--r", type=_real, default=None)
    v.add_argument("--depth", type=int, default=8)
    v.add_argument("--cases", default="all")
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--max-level", type=int, default=12)
    v.add_argument("--operators", type=int, default=100)
    v.add_argument("--vanishing", type=int, default=50)
    v.add_argument("--samples", type=int, default=64)
    v.add_argument("--n", type=int, default=4)
    v.add_argument("--eps", type=float, default=1.0)
    v.add_argument("--out", help="JSON report path (default: stdout)")
    v.add_argument("--csv", help="per-check CSV path")
    v.add_argument("--timings", action="store_true", help="record runtimes (reports stop being byte-identical)")
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("norm", help="evaluate a norm")
    n.add_argument("kind", choices=("s", "lattice"))
    n.add_argument("--flat", help='flat-block shorthand "m1:c1,m2:c2,..."')
    n.add_argument("--vector", help="SparseVec JSON file")
    n.add_argument("--ones", type=int, help="e_1 + ... + e_n")
    n.add_argument("--p", type=float, default=1.0, help="exponent of the lattice norm")
    n.add_argument("--tol", type=float, default=1e-9)
    n.set_defaults(func=cmd_norm)

    i = sub.add_parser("interp", help="S_{p,r} norm of a vector")
    i.add_argument("--p", type=float, required=True)
    i.add_argument("--r", type=_real, required=True)
    i.add_argument("--vector")
    i.add_argument("--flat")
    i.add_argument("--ones", type=int)
    i.add_argument("--tol", type=float, default=1e-9)
    i.add_argument("--out")
    i.set_defaults(func=cmd_interp)

    c = sub.add_parser("cotype", help="disjoint-block cotype witness")
    c.add_argument("--p", type=float, default=2.0)
    c.add_argument("--r", type=_real, default=4.0)
    c.add_argument("--n", type=int, default=4)
    c.add_argument("--eps", type=float, default=1.0)
    c.add_argument("--table", help="also write the type/cotype ratio table as CSV here")
    c.add_argument("--n-list", default="1,2,4,8,16")
    c.add_argument("--grid", help="comma-separated exponents for the table (default: p,r)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cotype)

    e = sub.add_parser("export-partitions", help="write the partition pairs as JSON")
    e.add_argument("--max-level", type=int, default=8)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DomainError, ResourceError) as exc:
        parser.exit(2, f"enflo: error: {exc}\n")
    except (ConvergenceError, SearchFailure) as exc:
        sys.stderr.write(f"enflo: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"enflo: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
