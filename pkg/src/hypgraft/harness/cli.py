"""Command-line interface: ``hypgraft run|list|validate|report``."""
from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, load_config
from .experiments import EXPERIMENTS, run_experiment
from .report import dumps_csv, dumps_json, emit_report, load_report, recompute_checks


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypgraft",
                                description="Run and report numerical checks on plumbed hyperbolic metrics.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config_path", nargs="?", help="config file (or use --config)")
    run.add_argument("--config", dest="config_opt")
    run.add_argument("--out", help="report path (default: from the config, else stdout)")
    run.add_argument("--format", choices=("json", "csv"))
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int, help="seed for synthetic random instances")

    sub.add_parser("list", help="list experiment ids")

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config_path", nargs="?")
    val.add_argument("--config", dest="config_opt")

    rep = sub.add_parser("report", help="recompute checks of a JSON report and re-emit it")
    rep.add_argument("raw", help="JSON report written by 'run'")
    rep.add_argument("--format", choices=("json", "csv"), default="json")
    rep.add_argument("--out")
    return p


def _config_path(args) -> str:
    path = args.config_opt or args.config_path
    if not path:
        raise ConfigError("config", "no config file given")
    return path


def _write(text: str, out: str | None):
    if out:
        return
    sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        for e in EXPERIMENTS.values():
            print(f"{e.id:20s} {e.description}")
        return 0
    try:
        if args.command == "validate":
            cfg = load_config(_config_path(args))
            print(f"ok {cfg.experiment} sha256={cfg.digest()}")
            return 0
        if args.command == "run":
            if args.threads < 1:
                raise ConfigError("--threads", "must be >= 1")
            cfg = load_config(_config_path(args))
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("--seed", "must be non-negative")
                cfg = cfg.with_seed(args.seed)
            report = run_experiment(cfg, args.threads)
            fmt = args.format or cfg.format
            out = args.out or cfg.output
            text = emit_report(report, out, fmt)
            _write(text, out)
            for line in report.summary_lines():
                print(line, file=sys.stderr)
            return 0 if report.passed else 1
        if args.command == "report":
            data = load_report(args.raw)
            checks = recompute_checks(data)
            passed = all(c["passed"] for c in checks)
            for c, new in zip(data.get("checks", []), checks):
                c["value"], c["passed"] = new["value"], new["passed"]
            data["passed"] = passed
            text = dumps_json(data) if args.format == "json" else dumps_csv(data)
            if args.out:
                emit_report(data, args.out, args.format)
            else:
                sys.stdout.write(text)
            for c in checks:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {data.get('experiment')} {c['name']}",
                      file=sys.stderr)
            return 0 if passed else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
