"""Dispatch a config to its registered experiment and assemble the report."""

from __future__ import annotations

import logging
import time

from .. import __version__
from ..bellman import OracleInfeasible
from ..measures import ParameterError
from .config import ExperimentConfig
from .registry import REGISTRY, check
from .report import ExperimentReport, emit_report

__all__ = ["run_experiment", "resolved_config"]

log = logging.getLogger(__name__)

_BASE_DEFAULTS = {"seed": 0, "tolerances": {}}


def resolved_config(config: ExperimentConfig) -> ExperimentConfig:
    """``config`` with the experiment's defaults filled in."""
    if config.name not in REGISTRY:
        raise ParameterError(f"unknown experiment {config.name!r}; run `cdrl list` for the registry")
    defaults = {**_BASE_DEFAULTS, **REGISTRY[config.name].defaults}
    return config.with_defaults(defaults)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the named experiment and write its report if ``config.output`` is set.

    Unknown names and malformed settings raise :class:`ParameterError`.
    Failures during the run (an unreadable MDP file, an infeasible oracle,
    invalid parameters) produce a report whose ``completed`` verdict fails
    and whose aggregate carries the error.
    """
    cfg = resolved_config(config)
    start = time.perf_counter()
    try:
        out = REGISTRY[cfg.name].run(cfg)
    except (ParameterError, OracleInfeasible, OSError) as exc:
        log.error("experiment %s failed: %s", cfg.name, exc)
        report = ExperimentReport(
            experiment=cfg.name,
            config=cfg.to_dict(),
            per_seed=[],
            aggregate={"error": {"type": type(exc).__name__, "message": str(exc)}},
            verdicts={"completed": check(0.0, 1.0, ">=")},
            constants={},
            seeds=[],
            version=__version__,
            wall_clock=time.perf_counter() - start,
        )
    else:
        report = ExperimentReport(
            experiment=cfg.name,
            config=cfg.to_dict(),
            per_seed=out.per_seed,
            aggregate=out.aggregate,
            verdicts=out.verdicts,
            constants=out.constants,
            seeds=out.seeds,
            version=__version__,
            wall_clock=time.perf_counter() - start,
            traces=out.traces,
        )
    # normalise to plain JSON types so the report equals its own re-read
    report = ExperimentReport.from_dict(report.to_dict())
    if cfg.output is not None and cfg.output.get("path"):
        emit_report(report, cfg.output.get("format", "json"), cfg.output["path"])
    return report
