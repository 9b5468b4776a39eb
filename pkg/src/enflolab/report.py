"""Deterministic JSON/CSV serialization of verification results.

Exact rationals are written as ``"num/den"``, floats with 12 significant
digits, and infinities as the strings ``"inf"``/``"-inf"``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .vectors import format_fraction

SIGNIFICANT = 12


def fmt_float(x: float) -> float | str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{SIGNIFICANT}g}")


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(x) for x in obj.tolist()]
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(x) for x in items]
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> dict:
    return json.loads(text)


def checks_csv(checks: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["suite", "check", "status"])
    for c in checks:
        writer.writerow([c.get("suite", ""), c.get("name", ""), c.get("status", "")])
    return buf.getvalue()


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def emit_report(results: dict, json_path: str | Path | None = None, csv_path: str | Path | None = None) -> str:
    """Serialize ``results`` (a dict with a ``checks`` list) and optionally write it out."""
    results = dict(results)
    results.setdefault("checks", [])
    text = dumps(results)
    if json_path is not None:
        _write(json_path, text)
    if csv_path is not None:
        _write(csv_path, checks_csv(results["checks"]))
    return text
