"""Run/sweep drivers and report serialization (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from fracfueter.checks import CheckReport, run_check
from fracfueter.config import RunConfig

WORKERS_ENV = "FRACFUETER_WORKERS"
CSV_FIELDS = ("check", "case", "residual", "tolerance", "passed")


def worker_count(requested: Optional[int] = None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, requested or 1)


def run(cfg: RunConfig, workers: Optional[int] = None) -> list[CheckReport]:
    """Run the configured checks; reports come back in config order whatever the worker count."""
    names = cfg.checks
    n = min(worker_count(workers), len(names))
    if n <= 1:
        return [run_check(name, cfg.raw) for name in names]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run_check, names, [cfg.raw] * len(names)))


def trend_verdict(values: Sequence[float], slack: float = 0.10) -> str:
    """``"decreasing"`` if monotone apart from at most one inversion of at most ``slack``."""
    inversions = [(a, b) for a, b in zip(values, values[1:]) if b > a]
    if not inversions:
        return "decreasing"
    if len(inversions) == 1:
        a, b = inversions[0]
        if b <= (1.0 + slack) * a:
            return "decreasing"
    return "not decreasing"


def _score(report: CheckReport) -> float:
    if report.error is not None or not report.cases:
        return float("inf")
    return max(c.residual / c.tolerance if c.tolerance > 0 else c.residual for c in report.cases)


def sweep(cfg: RunConfig, param: str, values: Sequence, workers: Optional[int] = None) -> dict:
    """Rerun the configured checks for each value of one resolution parameter."""
    steps = []
    for v in values:
        step_cfg = cfg.with_resolution(param, v)
        steps.append({"value": v, "reports": run(step_cfg, workers)})
    trends = {}
    for i, name in enumerate(cfg.checks):
        scores = [_score(step["reports"][i]) for step in steps]
        trends[name] = {"scores": scores, "verdict": trend_verdict(scores)}
    return {"param": param, "values": list(values), "steps": steps, "trends": trends}


# {{{ serialization


def run_document(cfg: RunConfig, reports: Sequence[CheckReport]) -> dict:
    return {
        "config": cfg.raw,
        "checks": [r.to_dict() for r in reports],
        "passed": all(r.passed for r in reports),
        "wall_time_s": sum(r.wall_time_s for r in reports),
    }


def sweep_document(cfg: RunConfig, result: dict) -> dict:
    return {
        "config": cfg.raw,
        "sweep": {
            "param": result["param"],
            "values": result["values"],
            "steps": [
                {"value": s["value"], "checks": [r.to_dict() for r in s["reports"]]} for s in result["steps"]
            ],
            "trends": result["trends"],
        },
        "passed": all(t["verdict"] == "decreasing" for t in result["trends"].values()),
    }


def strip_timing(doc):
    """Copy of a report document without wall-time fields (the reproducible payload)."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items() if k != "wall_time_s"}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc


def payload(doc: dict) -> str:
    return json.dumps(strip_timing(doc), sort_keys=True)


def _write_rows(writer, reports: Sequence[CheckReport], extra: Optional[dict] = None) -> None:
    for r in reports:
        rows = [(c.label, repr(c.residual), repr(c.tolerance), c.passed) for c in r.cases]
        if r.error is not None:
            rows = [(f"error: {r.error}", "", "", False)]
        for label, res, tol, ok in rows:
            writer.writerow(dict(extra or {}, check=r.name, case=label, residual=res, tolerance=tol, passed=ok))


def to_csv(reports: Sequence[CheckReport]) -> str:
    """One row per residual."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    _write_rows(writer, reports)
    return buf.getvalue()


def sweep_csv(result: dict) -> str:
    """One row per residual and sweep value."""
    buf = io.StringIO()
    param = result["param"]
    writer = csv.DictWriter(buf, fieldnames=(param,) + CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for step in result["steps"]:
        _write_rows(writer, step["reports"], {param: step["value"]})
    return buf.getvalue()


def write_reports(out: str | Path, doc: dict, csv_text: str) -> tuple[Path, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / "report.json", out / "report.csv"
    jpath.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    cpath.write_text(csv_text)
    return jpath, cpath


# }}}
