"""
Command-line front end.

    ncdelay bound <config> [--csv PATH]
    ncdelay tightness <config> --trace-out PATH [--csv PATH]
    ncdelay simulate <config> [--seeds N] [--trace PATH] [--csv PATH]
    ncdelay casestudy {drr|cbs} [--param k=v ...] [--csv PATH]

Exit codes: 0 ok, 2 config error, 3 infeasible scenario, 4 bound violation
(library bug), 5 gate failure on a user-supplied trace.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, load_config, read_trace, write_trace
from .curves import DomainError
from .runner import (
    BoundViolation,
    GateFailure,
    RunReport,
    cbs_case,
    drr_case,
    run_bound,
    run_simulate,
    run_tightness,
    to_csv,
)
from .tightness import InfeasibleScenario

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_VIOLATION, EXIT_GATE = 0, 2, 3, 4, 5

log = logging.getLogger("ncdelay")


def _seconds(x) -> str:
    if x is None:
        return "-"
    if math.isinf(x):
        return "unbounded"
    if x != 0 and abs(x) < 1e-3:
        return f"{x * 1e6:.6g} us"
    if x != 0 and abs(x) < 1:
        return f"{x * 1e3:.6g} ms"
    return f"{x:.9g} s"


def _print_bounds(report: RunReport, out) -> None:
    rep = report.bounds
    print(f"scenario: {report.scenario}", file=out)
    print(f"  classic bound (delta): {_seconds(rep.delta)}", file=out)
    if rep.t_prime is not None:
        print(f"  critical time t':      {_seconds(rep.t_prime)}", file=out)
    if rep.delta_l:
        print(f"  {'length (bits)':>14}  {'delta_l':>16}  {'improvement':>16}  {'%':>8}", file=out)
        for l, dl in rep.delta_l.items():
            if rep.bounded:
                imp = rep.delta - dl
                pct = f"{100 * imp / rep.delta:.3f}" if rep.delta > 0 else "-"
                print(f"  {l:>14.6g}  {_seconds(dl):>16}  {_seconds(imp):>16}  {pct:>8}", file=out)
            else:
                print(f"  {l:>14.6g}  {'unbounded':>16}  {'-':>16}  {'-':>8}", file=out)
    for name, b in report.flows.items():
        print(f"  flow {name}: {_seconds(b)}", file=out)


def _print_verdicts(verdicts: dict, out) -> None:
    for k, v in verdicts.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}", file=out)


def _write_csv(report: RunReport, path) -> None:
    text = to_csv(report)
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_bound(args) -> int:
    cfg = load_config(args.config)
    report = run_bound(cfg)
    _print_bounds(report, sys.stdout)
    if args.csv:
        _write_csv(report, args.csv)
    return EXIT_OK


def _cmd_tightness(args) -> int:
    cfg = load_config(args.config)
    try:
        report, wc, trace = run_tightness(cfg)
    except InfeasibleScenario as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    write_trace(args.trace_out, trace, wc.schedule)
    _print_bounds(report, sys.stdout)
    s = report.trace_summary
    print(f"  worst-case trace: {s['packets']} packets, t'={_seconds(s['t_prime'])}", file=sys.stdout)
    print(f"  achieved response: {_seconds(s['achieved'])} (bound {_seconds(s['bound'])}, "
          f"{'attained' if s['attained'] else 'NOT attained'})", file=sys.stdout)
    _print_verdicts(report.verdicts, sys.stdout)
    print(f"  trace written to {args.trace_out}")
    if args.csv:
        _write_csv(report, args.csv)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    user_trace = schedule = None
    if args.trace:
        user_trace, schedule = read_trace(args.trace)
    try:
        report = run_simulate(cfg, seeds=args.seeds, user_trace=user_trace, user_schedule=schedule)
    except GateFailure as exc:
        print(f"gate failure: {exc}; simulation skipped", file=sys.stderr)
        for k, v in exc.verdicts.items():
            print(f"  {k}: {'pass' if v else 'FAIL'} {v.witness or ''}", file=sys.stderr)
        return EXIT_GATE
    except BoundViolation as exc:
        print(f"BOUND VIOLATION: {exc}", file=sys.stderr)
        json.dump(exc.witnesses, sys.stderr, indent=2)
        print(file=sys.stderr)
        return EXIT_VIOLATION
    except InfeasibleScenario as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_bounds(report, sys.stdout)
    st = report.sim_stats
    print(f"  runs: {st['runs']}  gated out: {st['gated_out']}  "
          f"start-witness failures: {st['witness_failures']}  violations: {st['violations']}")
    frac = st["max_fraction"]
    print(f"  max fraction of bound attained: {'-' if frac is None else f'{frac:.6f}'}")
    for c in st["length_classes"]:
        if c["count"]:
            print(f"    lengths <= {c['upper_bits']:.6g} bits: n={c['count']}, "
                  f"max response {_seconds(c['max_response'])}, "
                  f"max fraction {c['max_fraction']:.6f}")
    print(f"  slack/delta histogram (10 bins on [0,1]): {st['slack_histogram']}")
    _print_verdicts(report.verdicts, sys.stdout)
    if args.csv:
        _write_csv(report, args.csv)
    return EXIT_OK


def _parse_params(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"--param expects k=v, got {pair!r}")
        k, v = pair.split("=", 1)
        try:
            out[k.strip()] = [float(x) for x in v.split(",")]
        except ValueError:
            raise ConfigError(f"--param {k}: not a number list: {v!r}") from None
    return out


def _cmd_casestudy(args) -> int:
    params = _parse_params(args.param)
    if args.which == "drr":
        allowed = {"n", "c", "L", "Q"}
    else:
        allowed = {"c", "T"}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ConfigError(f"unknown parameter {unknown[0]!r} for {args.which}; "
                          f"expected {sorted(allowed)}")
    if args.which == "drr":
        n_values = [int(n) for n in params.get("n", [2, 4, 8, 16])]
        report = drr_case(n_values, c=params.get("c", [1e6])[0], L=params.get("L", [1000.0])[0],
                          Q=params.get("Q", [None])[0])
        print(f"{'n':>5} {'R (bps)':>12} {'T':>14} {'delta':>14} {'improvement':>14} {'ratio':>8}")
        for r in report.sim_stats["drr"]:
            print(f"{r['n']:>5} {r['R']:>12.6g} {_seconds(r['T']):>14} {_seconds(r['delta']):>14} "
                  f"{_seconds(r['improvement']):>14} {r['ratio']:>8.4f}")
    else:
        report = cbs_case(tuple(params.get("c", [1e9, 1e8])), T=params.get("T", [0.0])[0])
        print(f"{'class':>5} {'c (bps)':>10} {'R (bps)':>10} {'l (bits)':>9} {'improvement':>14}")
        for r in report.sim_stats["cbs"]:
            print(f"{r['class']:>5} {r['c']:>10.4g} {r['R']:>10.4g} {r['l']:>9.0f} "
                  f"{_seconds(r['improvement']):>14}")
    if args.csv:
        _write_csv(report, args.csv)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncdelay",
        description="Per-packet delay bounds for FIFO rate-latency servers with a known line rate.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="classic and per-packet delay bounds")
    p.add_argument("config")
    p.add_argument("--csv", help="write CSV here ('-' for stdout)")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("tightness", help="build the worst-case trace attaining the bound")
    p.add_argument("config")
    p.add_argument("--trace-out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_tightness)

    p = sub.add_parser("simulate", help="verifier-gated FIFO simulation campaign")
    p.add_argument("config")
    p.add_argument("--seeds", type=int)
    p.add_argument("--trace", help="simulate this trace file instead of random traces")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("casestudy", help="DRR and CBS case studies")
    p.add_argument("which", choices=("drr", "cbs"))
    p.add_argument("--param", action="append", metavar="k=v")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_casestudy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        where = getattr(args, "trace", None) if "trace" in str(exc) else getattr(args, "config", None)
        where = where or "<args>"
        line = f":{exc.line}" if exc.line else ""
        print(f"{where}{line}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"{getattr(args, 'config', '<args>')}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
