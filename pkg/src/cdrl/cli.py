"""Command-line entry point: ``cdrl run | list | validate-mdp``."""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import REGISTRY, ExperimentConfig, load_config, run_experiment
from .experiments.config import OUTPUT_FORMATS
from .mdp import load_mdp, validate
from .measures import ParameterError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdrl", description="Tabular categorical distributional RL experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one registered experiment")
    run.add_argument("experiment", help="registered experiment name (see `cdrl list`)")
    run.add_argument("--config", help="JSON config file; its name must match the experiment")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--out", help="write the report here")
    run.add_argument("--format", choices=OUTPUT_FORMATS, help="report format (default json)")

    sub.add_parser("list", help="print the experiment registry")

    val = sub.add_parser("validate-mdp", help="check an MDP file")
    val.add_argument("path")
    return parser


def _run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.name != args.experiment:
            raise ParameterError(f"config is for {cfg.name!r}, not {args.experiment!r}")
    else:
        cfg = ExperimentConfig(args.experiment)
    values = cfg.to_dict()
    if args.seed is not None:
        values["seed"] = args.seed
    out = dict(values["output"] or {})
    if args.out:
        out["path"] = args.out
    if args.format:
        out["format"] = args.format
    values["output"] = out or None
    cfg = ExperimentConfig(**values)

    report = run_experiment(cfg)
    for name, verdict in report.verdicts.items():
        status = "PASS" if verdict.passed else "FAIL"
        print(f"{status}  {report.experiment}.{name}: {verdict.describe()}")
    if "error" in report.aggregate:
        err = report.aggregate["error"]
        print(f"error: {err['type']}: {err['message']}", file=sys.stderr)
    if out.get("path"):
        print(f"report written to {out['path']}")
    return 0 if report.passed else 1


def _validate(path: str) -> int:
    mdp, _ = load_mdp(path)
    problems = validate(mdp)
    for p in problems:
        print(p)
    if not problems:
        print(f"{path}: ok ({mdp.n_states} states, {mdp.n_actions} actions, gamma={mdp.gamma})")
    return 0 if not problems else 1


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list":
            width = max(map(len, REGISTRY))
            for name, exp in REGISTRY.items():
                print(f"{name:<{width}}  {exp.summary}")
            return 0
        if args.command == "validate-mdp":
            return _validate(args.path)
        return _run(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
