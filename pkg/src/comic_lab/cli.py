"""`comic-lab` command line interface.

Subcommands:
  run <config.json> [--jobs N] [--out DIR] [--seed SEED]
  verify <record.json>
  list-experiments

Seed precedence for `run`: --seed flag > COMIC_LAB_SEED environment
variable > master_seed in the config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import (
    ConfigError,
    canonical_experiments,
    load_config,
    run_experiment,
    verify_record,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _resolve_seed(flag_seed):
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get("COMIC_LAB_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"COMIC_LAB_SEED must be an integer, got {env!r}") from exc
    return None


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, master_seed_override=_resolve_seed(args.seed))
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        record = run_experiment(config, args.out, jobs=args.jobs)
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {record.path}")
    for sweep, info in record.data.get("sweeps", {}).items():
        print(f"  {sweep}: argmin n={info['argmin']['n']} bracket={info['argmin']['bracket']}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = verify_record(args.record)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{status}: checked {report['checked']} row(s)")
    for failure in report["failures"]:
        print(f"  {failure}")
    return EXIT_OK if report["passed"] else EXIT_RUNTIME


def _cmd_list(_args) -> int:
    for name, overrides in canonical_experiments().items():
        print(f"{name}: {json.dumps(overrides, sort_keys=True)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comic-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to a JSON experiment config")
    run_p.add_argument("--jobs", type=int, default=1, help="max parallel sweep jobs")
    run_p.add_argument("--out", default="runs", help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override master seed")
    run_p.set_defaults(func=_cmd_run)

    verify_p = sub.add_parser("verify", help="re-check a run record")
    verify_p.add_argument("record", help="path to a record.json")
    verify_p.set_defaults(func=_cmd_verify)

    list_p = sub.add_parser("list-experiments", help="show the canonical experiment catalog")
    list_p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
