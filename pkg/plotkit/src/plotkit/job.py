"""Plot jobs: a declarative figure request, from a file or CLI flags.

A job names the figure kind, the input artifact paths by role, styling
options, and the output image path.  Both invocation styles build the
same PlotJob, so a flag run and its job-file equivalent render
identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import figures
from .artifacts import (
    ArtifactError,
    load_deltas,
    load_plots_data,
    load_stats,
    load_trace,
    load_trajectories,
)

JOB_VERSION = 1

FIGURE_KINDS = ("trajectories", "values", "delta-cost-hist", "convergence")

# which input roles each figure kind accepts (tuple of alternatives first)
_REQUIRED_INPUTS = {
    "trajectories": ("data|runs",),
    "values": ("data",),
    "delta-cost-hist": ("deltas", "stats"),
    "convergence": ("trace",),
}


@dataclass
class PlotJob:
    kind: str
    inputs: dict[str, object]
    out: str
    style: dict[str, object] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ArtifactError(
                f"unknown figure kind {self.kind!r} (choose from {', '.join(FIGURE_KINDS)})"
            )
        for role in _REQUIRED_INPUTS[self.kind]:
            names = role.split("|")
            if not any(self.inputs.get(n) for n in names):
                raise ArtifactError(
                    f"{self.kind} job needs input {' or '.join(repr(n) for n in names)}"
                )
        if not self.out:
            raise ArtifactError("job has no output path")


def load_job(path: str | Path) -> PlotJob:
    p = Path(path)
    if not p.exists():
        raise ArtifactError(f"{p}: no such file")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{p}: not valid JSON ({exc})") from None
    if doc.get("kind") != "plot_job":
        raise ArtifactError(f"{p}: expected kind 'plot_job', found {doc.get('kind')!r}")
    if doc.get("version") != JOB_VERSION:
        raise ArtifactError(
            f"{p}: plot_job version {doc.get('version')!r} is not supported "
            f"(this reader understands version {JOB_VERSION})"
        )
    for key in ("figure", "out"):
        if key not in doc:
            raise ArtifactError(f"{p}: missing field {key!r}")
    # input paths are relative to the job file, like a makefile
    inputs = {}
    for role, value in dict(doc.get("inputs", {})).items():
        if isinstance(value, list):
            inputs[role] = [str(p.parent / v) for v in value]
        else:
            inputs[role] = str(p.parent / value)
    out = doc["out"]
    job = PlotJob(
        kind=doc["figure"],
        inputs=inputs,
        out=str(p.parent / out),
        style=dict(doc.get("style", {})),
    )
    job.validate()
    return job


def _as_paths(value) -> list[str]:
    return [str(v) for v in value] if isinstance(value, list) else [str(value)]


def _style_targets(style: dict) -> list[tuple[float, float]] | None:
    raw = style.get("targets")
    if raw is None:
        return None
    out = []
    for pair in raw:
        if len(pair) != 2:
            raise ArtifactError(f"target {pair!r} is not an x,y pair")
        out.append((float(pair[0]), float(pair[1])))
    return out


def _render_trajectories(job: PlotJob):
    style = job.style
    complete = None
    if job.inputs.get("data"):
        data = load_plots_data(_as_paths(job.inputs["data"])[0])
        records = list(data.incomplete)
        if not style.get("no_complete"):
            complete = data.complete
    else:
        records = []
        for path in _as_paths(job.inputs["runs"]):
            records.extend(load_trajectories(path))
    type_filter = style.get("types")
    if type_filter is not None:
        type_filter = [int(t) for t in type_filter]
    return figures.plot_trajectories(
        records,
        complete=complete,
        targets=_style_targets(style),
        type_filter=type_filter,
        title=style.get("title"),
    )


def _render_values(job: PlotJob):
    data = load_plots_data(_as_paths(job.inputs["data"])[0])
    return figures.plot_values(data, title=job.style.get("title"))


def _render_delta_cost(job: PlotJob):
    deltas = load_deltas(_as_paths(job.inputs["deltas"])[0])
    stats = load_stats(_as_paths(job.inputs["stats"])[0])
    return figures.plot_delta_cost(
        deltas, stats,
        bins=int(job.style.get("bins", 40)),
        title=job.style.get("title"),
    )


def _render_convergence(job: PlotJob):
    trace = load_trace(_as_paths(job.inputs["trace"])[0])
    return figures.plot_convergence(trace, title=job.style.get("title"))


_RENDERERS = {
    "trajectories": _render_trajectories,
    "values": _render_values,
    "delta-cost-hist": _render_delta_cost,
    "convergence": _render_convergence,
}


def render(job: PlotJob) -> Path:
    """Build the requested figure and write it; returns the output path."""
    job.validate()
    fig = _RENDERERS[job.kind](job)
    return figures.save_figure(fig, job.out)
