"""Command line entry point: ``fracfueter run|sweep|validate|list-checks``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from fracfueter.checks import REGISTRY
from fracfueter.config import SWEEP_PARAMS, RunConfig
from fracfueter.errors import ConfigError
from fracfueter.reports import (
    run,
    run_document,
    sweep,
    sweep_csv,
    sweep_document,
    to_csv,
    write_reports,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parse_values(param: str, text: str) -> list:
    cast = int if param in ("N_volume", "N_face", "node_count_1d") else float
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad value list for {param}: {text!r}") from exc


def _summary(reports) -> str:
    lines = []
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        if r.error is not None:
            detail = r.error
        else:
            worst = max(r.cases, key=lambda c: c.residual / c.tolerance if c.tolerance > 0 else c.residual)
            detail = f"worst {worst.label}: {worst.residual:.3e} (tol {worst.tolerance:g})"
        lines.append(f"{status}  {r.name:<16} {r.wall_time_s:7.2f}s  {detail}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    reports = run(cfg, args.workers)
    doc = run_document(cfg, reports)
    jpath, _ = write_reports(args.out, doc, to_csv(reports))
    print(_summary(reports))
    print(f"report: {jpath}")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; expected one of {', '.join(SWEEP_PARAMS)}")
    cfg = RunConfig.load(args.config)
    values = _parse_values(args.param, args.values)
    result = sweep(cfg, args.param, values, args.workers)
    doc = sweep_document(cfg, result)
    jpath, _ = write_reports(args.out, doc, sweep_csv(result))
    for name, trend in result["trends"].items():
        scores = ", ".join(f"{s:.3e}" for s in trend["scores"])
        print(f"{name:<16} {trend['verdict']:<15} [{scores}]")
    print(f"report: {jpath}")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_validate(args) -> int:
    RunConfig.load(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_list_checks(args) -> int:
    for name, check in REGISTRY.items():
        print(f"{name:<16} {check.identity}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracfueter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured checks")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="fracfueter-report")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="rerun the checks over one resolution parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--out", default="fracfueter-sweep")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="schema check only")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("list-checks", help="list the registered checks")
    p.set_defaults(func=cmd_list_checks)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
