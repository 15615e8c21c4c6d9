"""Reports: per-point metrics, rate fits and threshold checks.

JSON output has a fixed field order and writes floats with 17 significant
digits, so parsing and re-emitting a report reproduces it byte for byte.
Pass/fail is recomputable from the stored data: fits are refitted from their
samples and every check is re-evaluated from its stored statistic.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__
from ..rates import RateFit, fit_rate

__all__ = ["Check", "Report", "emit_report", "dumps_json", "load_report", "recompute_checks"]

_OPS = ("<=", ">=", "in")


@dataclass(frozen=True)
class Check:
    """``value op threshold``; ``source`` ties the value to a stored fit (``fit:name.slope``)."""

    name: str
    value: float
    op: str
    threshold: float | tuple[float, float]
    source: str = ""

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")

    @property
    def passed(self) -> bool:
        return _compare(self.value, self.op, self.threshold)

    def as_dict(self) -> dict:
        th = list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold
        return {"name": self.name, "value": self.value, "op": self.op, "threshold": th,
                "source": self.source, "passed": self.passed}


def _compare(value, op, threshold) -> bool:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return False
    if op == "<=":
        return value <= threshold
    if op == ">=":
        return value >= threshold
    lo, hi = threshold
    return lo <= value <= hi


@dataclass
class Report:
    experiment: str
    config: dict
    config_sha256: str
    points: list[dict] = field(default_factory=list)
    fits: dict[str, RateFit] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "passed": self.passed,
            "provenance": {"package_version": __version__, "config_sha256": self.config_sha256},
            "config": self.config,
            "points": self.points,
            "fits": {k: v.as_dict() for k, v in self.fits.items()},
            "checks": [c.as_dict() for c in self.checks],
        }

    def summary_lines(self) -> list[str]:
        out = []
        for c in self.checks:
            th = (f"[{c.threshold[0]:g}, {c.threshold[1]:g}]" if isinstance(c.threshold, tuple)
                  else f"{c.threshold:g}")
            out.append(f"{'PASS' if c.passed else 'FAIL'} {self.experiment} {c.name}: "
                       f"{c.value:.6g} {c.op} {th}")
        return out


# ---------------------------------------------------------------------------
# JSON


def _float(x: float) -> str:
    s = format(x, ".17g")
    # keep floats floats on re-parse (also preserves -0.0)
    return s if any(ch in s for ch in ".en") else s + ".0"


def _enc(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isfinite(obj):
            return _float(obj)
        return json.dumps(str(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_enc(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _enc(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _enc(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(data: dict) -> str:
    return _enc(data, 2, 0) + "\n"


def load_report(path) -> dict:
    p = Path(path)
    try:
        return json.loads(p.read_text())
    except OSError as exc:
        raise OSError(f"cannot read report {p}: {exc.strerror}") from None


def recompute_checks(data: dict) -> list[dict]:
    """Re-derive every check from a parsed report.

    Fits are refitted from their stored samples; checks whose ``source`` names
    a fit statistic take their value from the refit, the others from the
    stored value.
    """
    refits = {}
    for name, f in data.get("fits", {}).items():
        refits[name] = fit_rate([tuple(s) for s in f["samples"]])
    out = []
    for c in data.get("checks", []):
        value = c["value"]
        src = c.get("source", "")
        if src.startswith("fit:"):
            fname, stat = src[4:].rsplit(".", 1)
            value = getattr(refits[fname], stat)
        th = tuple(c["threshold"]) if isinstance(c["threshold"], list) else c["threshold"]
        out.append({"name": c["name"], "value": value, "op": c["op"], "threshold": th,
                    "passed": _compare(value, c["op"], th)})
    return out


# ---------------------------------------------------------------------------
# CSV


def dumps_csv(data: dict) -> str:
    """One row per ladder point, with a header row."""
    points = data.get("points", [])
    cols: list[str] = []
    for row in points:
        for k in row:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in points:
        w.writerow([_cell(row.get(k)) for k in cols])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return _float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(str(_cell(x)) for x in v)
    return "" if v is None else v


def emit_report(report: Report | dict, path=None, fmt: str = "json") -> str:
    """Serialize a report as JSON or CSV; write it to ``path`` if given."""
    data = report.as_dict() if isinstance(report, Report) else report
    fmt = fmt.lower()
    if fmt == "json":
        text = dumps_json(data)
    elif fmt == "csv":
        text = dumps_csv(data)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        p = Path(path)
        try:
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {p}: {exc.strerror}") from None
    return text
