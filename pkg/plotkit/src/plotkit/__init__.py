"""Presentation layer for the solver CLI's artifact files.

Reads the documented JSON/CSV schemas (per-type trajectory exports,
paired-experiment stats and deltas, optimizer traces) and renders them as
figures.  Strictly downstream: the solver is never imported, and unknown
schema versions are refused rather than guessed at.
"""

from .artifacts import (
    ArtifactError,
    CompletePath,
    DeltaTable,
    ExperimentSummary,
    PlotsData,
    TraceTable,
    TrajectoryRecord,
    load_deltas,
    load_plots_data,
    load_stats,
    load_trace,
    load_trajectories,
)
from .figures import (
    plot_convergence,
    plot_delta_cost,
    plot_trajectories,
    plot_values,
    save_figure,
)
from .job import FIGURE_KINDS, PlotJob, load_job, render

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "CompletePath",
    "DeltaTable",
    "ExperimentSummary",
    "FIGURE_KINDS",
    "PlotJob",
    "PlotsData",
    "TraceTable",
    "TrajectoryRecord",
    "load_deltas",
    "load_job",
    "load_plots_data",
    "load_stats",
    "load_trace",
    "load_trajectories",
    "plot_convergence",
    "plot_delta_cost",
    "plot_trajectories",
    "plot_values",
    "render",
    "save_figure",
]
