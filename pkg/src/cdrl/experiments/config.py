"""Experiment configuration: a JSON object whose keys mirror :class:`ExperimentConfig`."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..learning import StepSchedule
from ..mdp import Mdp, Policy, load_mdp, mdp_from_dict
from ..measures import ParameterError, SupportGrid
from .generators import BUILTIN_MDPS, generate_random_mdp

__all__ = [
    "ExperimentConfig",
    "load_config",
    "resolve_mdp",
    "resolve_grid",
    "resolve_schedule",
    "OUTPUT_FORMATS",
]

OUTPUT_FORMATS = ("csv", "json")

_MDP_SOURCES = {"inline", "path", "generator", "builtin"}
_GENERATOR_FIELDS = {"n_states", "n_actions", "reward_support", "branching", "seed", "gamma"}
_GRID_FIELDS = {"range", "K", "locations"}
_SCHEDULE_FIELDS = {"c", "n0", "omega"}
_OUTPUT_FIELDS = {"path", "format"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one experiment run.

    ``None`` means "use the experiment's default"; the report echoes the
    config with every default filled in, so the echo alone reproduces a run.
    Fields an experiment does not read are echoed unchanged.
    """

    name: str
    mdp: dict[str, Any] | None = None
    grid: dict[str, Any] | None = None
    gamma: float | None = None
    schedule: dict[str, float] | None = None
    n_steps: int | None = None
    n_seeds: int | None = None
    n_cases: int | None = None
    seed: int | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    output: dict[str, str] | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ParameterError("config needs an experiment name")
        for key, value in self.tolerances.items():
            if not isinstance(value, (int, float)) or not value > 0:
                raise ParameterError(f"tolerance {key!r} must be positive, got {value!r}")
        for key in ("n_steps", "n_seeds", "n_cases"):
            value = getattr(self, key)
            if value is not None and (not isinstance(value, int) or value < 0):
                raise ParameterError(f"{key} must be a nonnegative integer, got {value!r}")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        _check_keys("mdp", self.mdp, _MDP_SOURCES)
        if self.mdp is not None and len(self.mdp) != 1:
            raise ParameterError("mdp must name exactly one source: inline, path, generator or builtin")
        _check_keys("grid", self.grid, _GRID_FIELDS)
        _check_keys("schedule", self.schedule, _SCHEDULE_FIELDS)
        _check_keys("output", self.output, _OUTPUT_FIELDS)
        if self.output is not None and self.output.get("format", "json") not in OUTPUT_FORMATS:
            raise ParameterError(f"output format must be one of {OUTPUT_FORMATS}")

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(obj, dict):
            raise ParameterError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "name" not in obj:
            raise ParameterError("config needs an experiment name")
        return cls(**obj)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def with_defaults(self, defaults: dict[str, Any]) -> ExperimentConfig:
        """Fill every ``None`` field from ``defaults``; tolerances merge key by key."""
        values = self.to_dict()
        for key, value in defaults.items():
            if key == "tolerances":
                values["tolerances"] = {**value, **self.tolerances}
            elif values.get(key) is None:
                values[key] = value
        return ExperimentConfig(**values)


def _check_keys(label: str, obj: dict | None, allowed: set[str]) -> None:
    if obj is None:
        return
    if not isinstance(obj, dict):
        raise ParameterError(f"{label} must be an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ParameterError(f"unknown {label} keys: {sorted(unknown)}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(doc)


def resolve_mdp(config: ExperimentConfig) -> tuple[Mdp, Policy | None]:
    """Build the configured MDP, applying the ``gamma`` override if set."""
    if config.mdp is None:
        raise ParameterError(f"experiment {config.name!r} needs an mdp source")
    (kind, source), = config.mdp.items()
    policy = None
    if kind == "inline":
        mdp, policy = mdp_from_dict(source)
    elif kind == "path":
        mdp, policy = load_mdp(source)
    elif kind == "builtin":
        if source not in BUILTIN_MDPS:
            raise ParameterError(f"unknown builtin MDP {source!r}; choose from {sorted(BUILTIN_MDPS)}")
        mdp = BUILTIN_MDPS[source]()
    else:
        _check_keys("generator", source, _GENERATOR_FIELDS)
        missing = _GENERATOR_FIELDS - {"gamma"} - set(source)
        if missing:
            raise ParameterError(f"generator settings missing {sorted(missing)}")
        mdp = generate_random_mdp(**source)
    if config.gamma is not None:
        mdp = Mdp(mdp.n_states, mdp.n_actions, mdp.kernel, config.gamma)
    return mdp, policy


def resolve_grid(config: ExperimentConfig) -> SupportGrid:
    source = config.grid
    if source is None:
        raise ParameterError(f"experiment {config.name!r} needs a grid")
    if "locations" in source:
        if set(source) != {"locations"}:
            raise ParameterError("give either grid locations or range and K, not both")
        return SupportGrid(source["locations"])
    if set(source) != {"range", "K"}:
        raise ParameterError("grid needs both range and K")
    lo, hi = source["range"]
    return SupportGrid.uniform(float(lo), float(hi), int(source["K"]))


def resolve_schedule(config: ExperimentConfig) -> StepSchedule:
    return StepSchedule(**(config.schedule or {}))
