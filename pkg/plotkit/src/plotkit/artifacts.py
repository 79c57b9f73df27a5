"""Typed readers for the solver CLI's emitted artifact files.

Every reader validates the file's version and kind tags (or, for CSV, the
exact header) and refuses anything it does not recognize.  Figures never
see raw dicts; everything arrives through the dataclasses below.  No file
is ever written here and the solver is never imported.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PLOTS_DATA_VERSION = 1
TRAJECTORY_VERSION = 1
STATS_VERSION = 1

DELTA_FIELDS = ("run", "seed", "type_drawn", "cost_resolved", "cost_offline", "delta")
TRACE_FIELDS = ("iter", "loss", "grad_norm", "step_size_used")


class ArtifactError(ValueError):
    """Input file is missing, malformed, or a schema we do not read."""


def _read_json(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ArtifactError(f"{p}: no such file")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{p}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ArtifactError(f"{p}: expected a JSON object")
    return doc


def _check_tags(doc: dict, kind: str, version: int, where: str) -> None:
    if doc.get("kind") != kind:
        raise ArtifactError(f"{where}: expected kind {kind!r}, found {doc.get('kind')!r}")
    if doc.get("version") != version:
        raise ArtifactError(
            f"{where}: {kind} version {doc.get('version')!r} is not supported "
            f"(this reader understands version {version})"
        )


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise ArtifactError(f"{where}: missing field {key!r}")
    return doc[key]


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class TrajectoryRecord:
    """One rollout: states are (steps+1, n), beliefs (steps+1, I)."""

    type_drawn: int
    states: np.ndarray
    beliefs: np.ndarray
    realized_cost: float
    seed: int
    resolved: bool
    error: str | None


def parse_trajectory(doc: dict, where: str) -> TrajectoryRecord:
    _check_tags(doc, "trajectory", TRAJECTORY_VERSION, where)
    return TrajectoryRecord(
        type_drawn=int(_field(doc, "type_drawn", where)),
        states=np.asarray(_field(doc, "states", where), dtype=float),
        beliefs=np.asarray(_field(doc, "beliefs", where), dtype=float),
        realized_cost=float(_field(doc, "realized_cost", where)),
        seed=int(_field(doc, "seed", where)),
        resolved=bool(_field(doc, "resolved", where)),
        error=_field(doc, "error", where),
    )


def load_trajectories(path: str | Path) -> list[TrajectoryRecord]:
    """Read a JSON-lines rollout file; at least one record is required."""
    p = Path(path)
    if not p.exists():
        raise ArtifactError(f"{p}: no such file")
    records = []
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{p}:{lineno}: not valid JSON ({exc})") from None
        records.append(parse_trajectory(doc, f"{p}:{lineno}"))
    if not records:
        raise ArtifactError(f"{p}: no trajectories")
    return records


# ---------------------------------------------------------------------------
# per-type comparison export


@dataclass(frozen=True)
class CompletePath:
    type_index: int
    states: np.ndarray
    cost: float
    root_value: float


@dataclass(frozen=True)
class ValueComparison:
    incomplete_root: float
    complete_by_type: list[float]
    complete_weighted: float
    improvement: float


@dataclass(frozen=True)
class PlotsData:
    tau: float
    horizon: int
    x0: np.ndarray
    num_types: int
    incomplete: list[TrajectoryRecord]
    complete: list[CompletePath]
    values: ValueComparison


def load_plots_data(path: str | Path) -> PlotsData:
    p = Path(path)
    doc = _read_json(p)
    _check_tags(doc, "plots_data", PLOTS_DATA_VERSION, str(p))
    incomplete = [
        parse_trajectory(t, f"{p}: incomplete[{i}]")
        for i, t in enumerate(_field(doc, "incomplete", str(p)))
    ]
    complete = []
    for i, c in enumerate(_field(doc, "complete", str(p))):
        where = f"{p}: complete[{i}]"
        complete.append(
            CompletePath(
                type_index=int(_field(c, "type", where)),
                states=np.asarray(_field(c, "states", where), dtype=float),
                cost=float(_field(c, "cost", where)),
                root_value=float(_field(c, "root_value", where)),
            )
        )
    v = _field(doc, "values", str(p))
    where = f"{p}: values"
    values = ValueComparison(
        incomplete_root=float(_field(v, "incomplete_root", where)),
        complete_by_type=[float(x) for x in _field(v, "complete_by_type", where)],
        complete_weighted=float(_field(v, "complete_weighted", where)),
        improvement=float(_field(v, "improvement", where)),
    )
    return PlotsData(
        tau=float(_field(doc, "tau", str(p))),
        horizon=int(_field(doc, "horizon", str(p))),
        x0=np.asarray(_field(doc, "x0", str(p)), dtype=float),
        num_types=int(_field(doc, "num_types", str(p))),
        incomplete=incomplete,
        complete=complete,
        values=values,
    )


# ---------------------------------------------------------------------------
# paired-experiment summary and per-run deltas


@dataclass(frozen=True)
class ExperimentSummary:
    n_runs: int
    n_failed: int
    mean_delta_cost: float
    std_delta_cost: float | None
    ci95: tuple[float, float] | None
    mean_cost_resolved: float
    mean_cost_offline: float
    mean_resolve_ms: float
    std_resolve_ms: float
    median_resolve_ms: float


def load_stats(path: str | Path) -> ExperimentSummary:
    p = Path(path)
    doc = _read_json(p)
    _check_tags(doc, "experiment_stats", STATS_VERSION, str(p))
    ci = _field(doc, "ci95", str(p))
    std = _field(doc, "std_delta_cost", str(p))
    return ExperimentSummary(
        n_runs=int(_field(doc, "n_runs", str(p))),
        n_failed=int(_field(doc, "n_failed", str(p))),
        mean_delta_cost=float(_field(doc, "mean_delta_cost", str(p))),
        std_delta_cost=None if std is None else float(std),
        ci95=None if ci is None else (float(ci[0]), float(ci[1])),
        mean_cost_resolved=float(_field(doc, "mean_cost_resolved", str(p))),
        mean_cost_offline=float(_field(doc, "mean_cost_offline", str(p))),
        mean_resolve_ms=float(_field(doc, "mean_resolve_ms", str(p))),
        std_resolve_ms=float(_field(doc, "std_resolve_ms", str(p))),
        median_resolve_ms=float(_field(doc, "median_resolve_ms", str(p))),
    )


@dataclass(frozen=True)
class DeltaTable:
    """Column store of the per-pair experiment rows."""

    run: np.ndarray
    seed: np.ndarray
    type_drawn: np.ndarray
    cost_resolved: np.ndarray
    cost_offline: np.ndarray
    delta: np.ndarray

    def __len__(self) -> int:
        return self.delta.size


def _read_csv(path: str | Path, fields: tuple[str, ...]) -> dict[str, list[str]]:
    p = Path(path)
    if not p.exists():
        raise ArtifactError(f"{p}: no such file")
    with open(p, newline="") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        if header != fields:
            raise ArtifactError(
                f"{p}: unexpected columns {list(header)}, wanted {list(fields)}"
            )
        cols: dict[str, list[str]] = {k: [] for k in fields}
        for row in reader:
            for k in fields:
                cols[k].append(row[k])
    return cols


def load_deltas(path: str | Path) -> DeltaTable:
    cols = _read_csv(path, DELTA_FIELDS)
    if not cols["delta"]:
        raise ArtifactError(f"{path}: no rows")
    return DeltaTable(
        run=np.asarray(cols["run"], dtype=int),
        seed=np.asarray(cols["seed"], dtype=int),
        type_drawn=np.asarray(cols["type_drawn"], dtype=int),
        cost_resolved=np.asarray(cols["cost_resolved"], dtype=float),
        cost_offline=np.asarray(cols["cost_offline"], dtype=float),
        delta=np.asarray(cols["delta"], dtype=float),
    )


# ---------------------------------------------------------------------------
# optimizer trace


@dataclass(frozen=True)
class TraceTable:
    iteration: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    step_size_used: np.ndarray

    def __len__(self) -> int:
        return self.iteration.size


def load_trace(path: str | Path) -> TraceTable:
    cols = _read_csv(path, TRACE_FIELDS)
    if not cols["iter"]:
        raise ArtifactError(f"{path}: no rows")
    return TraceTable(
        iteration=np.asarray(cols["iter"], dtype=int),
        loss=np.asarray(cols["loss"], dtype=float),
        grad_norm=np.asarray(cols["grad_norm"], dtype=float),
        step_size_used=np.asarray(cols["step_size_used"], dtype=float),
    )
