"""Flat ``key = value`` experiment configuration with one level of sections.

Example
-------
::

    [experiment]
    id = graft-rate

    [ladder]
    # values of -log|t|, or: geometric = 20, 2, 4  (start, factor, count)
    neg_log_t = 20 40 80 160

    [params]
    c_star = exp(-1)
    a0 = -1
    n_u = 8192

    [thresholds]
    slope_min = 3.8
    r2_min = 0.98
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..metrics import PlumbingConfig

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]

_SECTIONS = {"experiment", "ladder", "params", "thresholds", "output"}
_GROUPS = {"ParabolicCylinder", "GammaTwo"}
# parameters that are grid resolutions and must be powers of two
_RESOLUTIONS = {"n_u", "n_theta", "n_band", "n_bulk"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _number(name: str, text: str) -> float:
    s = text.strip()
    try:
        if s.startswith("exp(") and s.endswith(")"):
            return math.exp(float(s[4:-1]))
        return float(s)
    except ValueError:
        raise ConfigError(name, f"not a number: {text!r}") from None


def _value(name: str, text: str):
    """Scalar, list (whitespace or comma separated) or bare string."""
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError(name, "empty value")
    vals = []
    for p in parts:
        try:
            vals.append(_number(name, p))
        except ConfigError:
            if len(parts) == 1:
                return p
            raise
    if len(vals) == 1:
        v = vals[0]
        return int(v) if v.is_integer() and "." not in parts[0] and "e" not in parts[0] else v
    return tuple(vals)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration.

    ``ladder`` holds values of ``-log|t|`` in increasing order.  Everything
    not covered by a named field lives in ``params`` (numbers or tuples) and
    ``thresholds`` (numbers).
    """

    experiment: str
    group: str = "ParabolicCylinder"
    ladder: tuple[float, ...] = ()
    c_star: float = math.exp(-1.0)
    a0: float = -1.0
    cutoff: int = 200
    seed: int = 0
    params: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    output: str | None = None
    format: str = "json"

    def param(self, name: str, default=None):
        return self.params.get(name, default)

    def threshold(self, name: str, default=None) -> float:
        if name in self.thresholds:
            return float(self.thresholds[name])
        if default is None:
            raise ConfigError(f"thresholds.{name}", "missing")
        return float(default)

    def plumbing(self, neg_log_t: float) -> PlumbingConfig:
        return PlumbingConfig.from_log(-neg_log_t, log_c_star=math.log(self.c_star), a0=self.a0)

    def canonical(self) -> dict:
        """Plain dict with a fixed key order; the basis of the provenance hash."""
        return {
            "experiment": self.experiment,
            "group": self.group,
            "ladder": list(self.ladder),
            "c_star": self.c_star,
            "a0": self.a0,
            "cutoff": self.cutoff,
            "seed": self.seed,
            "params": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in sorted(self.params.items())},
            "thresholds": dict(sorted(self.thresholds.items())),
        }

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"),
                          default=repr)
        return hashlib.sha256(text.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def _ladder(sec) -> tuple[float, ...]:
    if sec is None:
        return ()
    if "geometric" in sec:
        v = _value("ladder.geometric", sec["geometric"])
        if not isinstance(v, tuple) or len(v) != 3:
            raise ConfigError("ladder.geometric", "expected start, factor, count")
        start, factor, count = v
        if count != int(count) or count < 1:
            raise ConfigError("ladder.geometric", "count must be a positive integer")
        return tuple(start * factor**k for k in range(int(count)))
    if "neg_log_t" in sec:
        v = _value("ladder.neg_log_t", sec["neg_log_t"])
        return tuple(float(x) for x in (v if isinstance(v, tuple) else (v,)))
    if "abs_t" in sec:
        v = _value("ladder.abs_t", sec["abs_t"])
        vals = v if isinstance(v, tuple) else (v,)
        if any(not 0 < x < 1 for x in vals):
            raise ConfigError("ladder.abs_t", "values must lie in (0, 1)")
        return tuple(-math.log(x) for x in vals)
    return ()


def parse_config(text: str, requires_ladder: bool | None = None) -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With the offending field, e.g. ``ladder: empty`` or
        ``experiment.id: unknown experiment``.
    """
    from .experiments import EXPERIMENTS

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    extra = set(cp.sections()) - _SECTIONS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown section")
    if "experiment" not in cp or "id" not in cp["experiment"]:
        raise ConfigError("experiment.id", "missing")
    exp = cp["experiment"]
    eid = exp["id"].strip()
    if eid not in EXPERIMENTS:
        raise ConfigError("experiment.id", f"unknown experiment {eid!r}")
    group = exp.get("group", EXPERIMENTS[eid].group).strip()
    if group not in _GROUPS:
        raise ConfigError("experiment.group", f"unsupported group {group!r}")

    ladder = _ladder(cp["ladder"] if "ladder" in cp else None)
    need = EXPERIMENTS[eid].requires_ladder if requires_ladder is None else requires_ladder
    if need and not ladder:
        raise ConfigError("ladder", "empty")
    if list(ladder) != sorted(ladder):
        raise ConfigError("ladder", "values of -log|t| must be increasing")

    params = {k: _value(f"params.{k}", v) for k, v in (cp["params"].items() if "params" in cp else [])}
    c_star = float(params.pop("c_star", math.exp(-1.0)))
    a0 = float(params.pop("a0", -1.0))
    cutoff = params.pop("cutoff", 200)
    seed = params.pop("seed", 0)
    if not 0 < c_star < 1:
        raise ConfigError("params.c_star", "must lie in (0, 1)")
    if a0 >= 0:
        raise ConfigError("params.a0", "must be negative")
    if not isinstance(cutoff, int) or cutoff < 2:
        raise ConfigError("params.cutoff", "must be an integer >= 2")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("params.seed", "must be a non-negative integer")
    for k in _RESOLUTIONS & params.keys():
        n = params[k]
        if not isinstance(n, int) or n < 1 or n & (n - 1):
            raise ConfigError(f"params.{k}", "must be a positive power of two")
    thresholds = {}
    if "thresholds" in cp:
        for k, v in cp["thresholds"].items():
            thresholds[k] = _number(f"thresholds.{k}", v)

    out = cp["output"] if "output" in cp else {}
    fmt = out.get("format", "json").strip().lower()
    if fmt not in ("json", "csv"):
        raise ConfigError("output.format", "must be json or csv")
    cfg = ExperimentConfig(eid, group, ladder, c_star, a0, cutoff, seed, params, thresholds,
                           out.get("path"), fmt)
    for i, x in enumerate(ladder):
        try:
            cfg.plumbing(x)
        except ValueError as exc:
            raise ConfigError(f"ladder[{i}]", str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {p}: {exc.strerror}") from None
    return parse_config(text)
