"""Serialising suite reports to JSON and CSV."""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema

from .suites import SuiteReport

TIMING_KEYS = ("timing",)


def schema() -> dict:
    return json.loads((resources.files("qspec") / "report_schema.json").read_text(encoding="utf-8"))


def to_json(report: SuiteReport | dict) -> str:
    data = report.to_dict() if isinstance(report, SuiteReport) else report
    jsonschema.validate(data, schema())
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def strip_timing(data):
    """Drop timing fields recursively so two runs can be compared byte for byte."""
    if isinstance(data, dict):
        return {k: strip_timing(v) for k, v in data.items() if k not in TIMING_KEYS}
    if isinstance(data, list):
        return [strip_timing(v) for v in data]
    return data


def emit(report: SuiteReport | dict, fmt: str, out: str | Path) -> list[Path]:
    """Write ``report`` as JSON (one file) or CSV (one file per convergence table) under ``out``."""
    data = report.to_dict() if isinstance(report, SuiteReport) else report
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        path.write_text(to_json(data), encoding="utf-8")
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    paths = []
    for name, rows in sorted(data["tables"].items()):
        path = out / f"{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "mesh", "sup_error"])
            for r in rows:
                w.writerow([r["n"], repr(float(r["mesh"])), repr(float(r["sup_error"]))])
        paths.append(path)
    return paths
