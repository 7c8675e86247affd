"""Experiment reports and their CSV and JSON serialisations."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ..measures import ParameterError

__all__ = ["Verdict", "ExperimentReport", "emit_report", "load_report", "CSV_HEADER"]

CSV_HEADER = ("experiment", "seed", "t", "metric", "value")


@dataclass(frozen=True)
class Verdict:
    """One checked assertion: ``measured`` compared against ``limit``.

    ``relation`` says how, for example ``"<="`` or ``">="``.
    """

    passed: bool
    measured: float
    limit: float
    relation: str = "<="

    def describe(self) -> str:
        return f"{self.measured:.6g} {self.relation} {self.limit:.6g}"


@dataclass
class ExperimentReport:
    experiment: str
    config: dict[str, Any]
    per_seed: list[dict[str, Any]]
    aggregate: dict[str, Any]
    verdicts: dict[str, Verdict]
    constants: dict[str, float]
    seeds: list[dict[str, Any]]
    version: str
    wall_clock: float = 0.0
    # (seed, t, metric, value) rows
    traces: list[tuple[int, int, str, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["traces"] = [list(row) for row in self.traces]
        return _clean(doc)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ExperimentReport:
        doc = dict(doc)
        doc["verdicts"] = {
            k: Verdict(v["passed"], float(v["measured"]), float(v["limit"]), v["relation"])
            for k, v in doc["verdicts"].items()
        }
        doc["traces"] = [(int(s), int(t), str(m), float(v)) for s, t, m, v in doc["traces"]]
        return cls(**doc)

    def deterministic_dict(self) -> dict[str, Any]:
        """The report without its timing, for reproducibility comparisons."""
        doc = self.to_dict()
        doc.pop("wall_clock")
        return doc


def _clean(obj):
    """Plain JSON types only; non-finite floats become strings so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return int(obj)
    if hasattr(obj, "item"):
        return _clean(obj.item())
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else repr(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _render(report: ExperimentReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for seed, t, metric, value in report.traces:
            writer.writerow((report.experiment, seed, t, metric, repr(float(value))))
        return buf.getvalue()
    raise ParameterError(f"unknown report format {fmt!r}; use csv or json")


def emit_report(report: ExperimentReport, fmt: str, path: str | Path) -> None:
    """Write ``report`` as tidy CSV trace rows or as the full JSON object."""
    text = _render(report, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path: str | Path) -> ExperimentReport:
    path = Path(path)
    try:
        return ExperimentReport.from_dict(json.loads(path.read_text()))
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc}") from exc
