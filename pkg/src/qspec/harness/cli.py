"""Command line entry point: ``qspec verify | decompose | calculus | report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..calculus import cont_calculus, named_function
from ..errors import ConfigError, QSpecError
from ..spaces import sample_set
from ..spectral import decompose
from .config import build_context, build_operator, load_config, shipped_configs
from .report import emit, to_json
from .suites import run_suite


def _print_report(report, stream=None):
    stream = stream or sys.stdout
    for c in report.checks:
        margin = c["margin"]
        m = f"{margin:.3g}" if isinstance(margin, float) else str(margin)
        print(f"{c['status']:>13}  {c['name']}  [{c['anchor']}]  margin={m}", file=stream)
    n_fail = len(report.failed)
    print(f"{len(report.checks)} checks, {n_fail} failed", file=stream)


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    report = run_suite(cfg, args.suites)
    _print_report(report)
    if args.out:
        emit(report, "json", args.out)
    return report.exit_code


def _profile_ops(cfg):
    ctx = build_context(cfg)
    return ctx, [build_operator(o, ctx.space) for o in cfg.operators]


def cmd_decompose(args) -> int:
    cfg = load_config(args.config)
    ctx, ops = _profile_ops(cfg)
    smp = sample_set(ctx.space, cfg.sample_spec(), cfg.effective_seed())
    schedule = [args.n] if args.n else cfg.schedule
    out = {}
    for F in ops:
        dec = decompose(F, ctx, schedule, smp, cfg.choice)
        out[F.name] = {
            "bracket": [dec.bracket.m, dec.bracket.M],
            "identity_residual": dec.identity_residual,
            "converges": dec.converges,
            "note": dec.note,
            "table": [{"n": n, "mesh": mesh, "sup_error": err} for n, mesh, err in dec.table()],
        }
    text = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_calculus(args) -> int:
    cfg = load_config(args.config)
    ctx, ops = _profile_ops(cfg)
    smp = sample_set(ctx.space, cfg.sample_spec(), cfg.effective_seed())
    f = named_function(args.fn)
    tol = args.tol if args.tol is not None else cfg.tol("calculus")
    out = {}
    for F in ops:
        res = cont_calculus(F, ctx, f, tol, smp)
        entry = {
            "degree": res.degree,
            "gaps": res.gaps,
            "chebyshev_degree": res.chebyshev_degree,
            "independence_gap": res.independence_gap,
            "k_bar": res.k_bar,
            "bracket": [res.bracket.m, res.bracket.M],
        }
        if args.at is not None:
            x = np.array(args.at, dtype=float)
            entry["value"] = res.operator(x).tolist()
        out[F.name] = entry
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    if args.from_json:
        data = json.loads(Path(args.from_json).read_text(encoding="utf-8"))
        to_json(data)  # validate before writing anything
        code = 1 if any(c["status"] == "fail" for c in data["checks"]) else 0
    elif args.config:
        report = run_suite(load_config(args.config))
        data, code = report.to_dict(), report.exit_code
    else:
        raise ConfigError("report needs a config or --from <report.json>")
    for p in emit(data, args.format, args.out):
        print(p)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qspec", description="Numerical checks for nonlinear spectral theory.")
    sub = p.add_subparsers(dest="command", required=True)
    shipped = ", ".join(shipped_configs())

    v = sub.add_parser("verify", help="run the configured suites")
    v.add_argument("config", help=f"config path or shipped name ({shipped})")
    v.add_argument("--suites", nargs="*", default=None, help="override the suite selection")
    v.add_argument("--out", help="directory for report.json")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("decompose", help="spectral sums and their error table")
    d.add_argument("config")
    d.add_argument("--n", type=int, default=None, help="single partition size (default: config schedule)")
    d.add_argument("--out", help="output JSON file (default: stdout)")
    d.set_defaults(func=cmd_decompose)

    c = sub.add_parser("calculus", help="f(F) by Bernstein approximation")
    c.add_argument("config")
    c.add_argument("--fn", default="exp", help="named function: exp, abs, identity, sin, cos, square, one")
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--at", type=float, nargs="+", default=None, help="also print f(F) at this point")
    c.set_defaults(func=cmd_calculus)

    r = sub.add_parser("report", help="write a report as JSON or CSV")
    r.add_argument("config", nargs="?", help="config to run (omit with --from)")
    r.add_argument("--from", dest="from_json", help="existing report.json to convert")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, QSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
