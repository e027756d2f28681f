"""Command line entry point: ``lastpassage <command> --config FILE [--seed S] [--workers W] [--out DIR]``."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import CalibrationError, InadmissibleModel, run_experiment
from .io_config import ConfigError, load_config, summary_document, write_results
from .weights import validate_model

COMMANDS = {
    "pilot": "pilot",
    "llt": "llt",
    "clt": "lln_clt",
    "invariance": "invariance",
    "audit": "audit",
    "oracle": "oracle",
}

HELP = {
    "validate": "check the configuration and the weight law",
    "pilot": "renewal cycles, cycle statistics and the admissible interval",
    "llt": "local / integro-local limit comparison (chosen by the model kind)",
    "clt": "slope estimators and the normal approximation",
    "invariance": "cycle statistics under two renewal constant pairs",
    "audit": "decomposition identities and renewal set inclusions",
    "oracle": "dynamic programming against exhaustive enumeration",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lastpassage", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", *COMMANDS):
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="experiment configuration (JSON)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--workers", type=int, help="worker processes, overrides the config")
        p.add_argument("--out", help="output directory, overrides the config")
    return parser


def _load(args):
    config = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.out is not None:
        updates["output_dir"] = args.out
    if args.command in COMMANDS:
        updates["experiment"] = {"kind": COMMANDS[args.command]}
    return config.with_updates(**updates) if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load(args)
    except ConfigError as e:
        for path, msg in e.violations:
            print(f"config error at {path}: {msg}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"cannot read configuration: {e}", file=sys.stderr)
        return 2

    if args.command == "validate":
        report = validate_model(config.model)
        print(json.dumps({"config_digest": config.digest, "model": report.to_dict()}, indent=2))
        return 0 if report.admissible else 1

    try:
        record, cycles = run_experiment(config)
    except (CalibrationError, InadmissibleModel) as e:
        print(f"aborted: {e}", file=sys.stderr)
        return 1
    paths = write_results(record, config.output_dir, config.digest, cycles)
    summary = summary_document(record, config.digest)
    for c in summary["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}")
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
