"""Command line: validate, run, report, list-experiments.

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration error,
3 runtime abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import EXPERIMENTS, validate_config
from .errors import ConfigError, SolverAbort

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def _load(args):
    text = Path(args.config).read_text(encoding="utf-8")
    return validate_config(text, seed_override=args.seed_override)


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(json.dumps({"config_hash": cfg.hash, "config": cfg.data}, indent=2, sort_keys=True))
    for d in cfg.defaults_applied:
        print(f"default: {d}", file=sys.stderr)
    return EXIT_PASS


def cmd_run(args) -> int:
    from .report import emit_report
    from .runner import run_experiment

    cfg = _load(args)
    manifest = run_experiment(cfg, out=args.out, workers=args.workers)
    emit_report(manifest)
    print((Path(manifest.root) / "summary.txt").read_text(), end="")
    return EXIT_PASS if manifest.passed else EXIT_FAIL


def cmd_report(args) -> int:
    from .report import emit_report
    from .runner import RunManifest, verify_manifest

    if not args.out:
        raise ConfigError("report needs --out pointing at a run directory")
    bad = verify_manifest(args.out)
    if bad:
        print("manifest digest mismatch: " + ", ".join(bad), file=sys.stderr)
        return EXIT_FAIL
    manifest = RunManifest.load(args.out)
    emit_report(manifest)
    print((Path(manifest.root) / "summary.txt").read_text(), end="")
    return EXIT_PASS if manifest.passed else EXIT_FAIL


def cmd_list(args) -> int:
    for name, desc in EXPERIMENTS.items():
        print(f"{name:<18} {desc}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, needs_config in (
        ("validate", cmd_validate, True),
        ("run", cmd_run, True),
        ("report", cmd_report, False),
        ("list-experiments", cmd_list, False),
    ):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        p.add_argument("--config", required=needs_config, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, default=None, help="sweep worker cap (env ROUGHFLOW_WORKERS)")
        p.add_argument("--seed-override", type=int, default=None, help="replace seeds.base")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverAbort as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        # e.g. an incomplete manifest handed to report
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
