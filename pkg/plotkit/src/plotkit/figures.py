"""Figure builders over the parsed artifact types.

Strictly presentation: nothing here transforms the data beyond axis
scaling and histogram binning, and every annotated number is read from
an input artifact rather than recomputed.  Builders return a matplotlib
Figure; `save_figure` writes PNG or SVG and closes it.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

import matplotlib

# batch default; respect the backend if the host already chose one
if "matplotlib.pyplot" not in sys.modules:
    matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .artifacts import (
    ArtifactError,
    CompletePath,
    DeltaTable,
    ExperimentSummary,
    PlotsData,
    TraceTable,
    TrajectoryRecord,
)

# state layout of the bundled scenarios: planar positions of the two
# players sit at these column pairs unless the caller says otherwise
DEFAULT_POSITIONS = ((0, 1), (4, 5))


def _panel_paths(ax, records: list[TrajectoryRecord], color: str,
                 positions, label_once: bool) -> None:
    p1, p2 = positions
    for j, rec in enumerate(records):
        s = rec.states
        ax.plot(s[:, p1[0]], s[:, p1[1]], color=color, lw=1.8,
                label="P1 (informed)" if label_once and j == 0 else None)
        ax.plot(s[:, p2[0]], s[:, p2[1]], color=color, lw=1.2, alpha=0.55,
                linestyle="-.",
                label="P2" if label_once and j == 0 else None)
        ax.plot(s[0, p1[0]], s[0, p1[1]], "ko", ms=4)
        ax.plot(s[0, p2[0]], s[0, p2[1]], "ko", ms=4, mfc="none")


def _panel_complete(ax, paths: list[CompletePath], positions,
                    label_once: bool) -> None:
    p1, p2 = positions
    for j, cp in enumerate(paths):
        s = cp.states
        ax.plot(s[:, p1[0]], s[:, p1[1]], color="0.45", lw=1.6, ls="--",
                label="P1, full information" if label_once and j == 0 else None)
        ax.plot(s[:, p2[0]], s[:, p2[1]], color="0.45", lw=1.0, ls=":",
                alpha=0.8,
                label="P2, full information" if label_once and j == 0 else None)


def plot_trajectories(
    records: list[TrajectoryRecord],
    complete: list[CompletePath] | None = None,
    targets: list[tuple[float, float]] | None = None,
    type_filter: list[int] | None = None,
    positions=DEFAULT_POSITIONS,
    title: str | None = None,
):
    """Overlay planar position paths, one panel per realized type.

    `complete` adds the full-information reference paths to the panel of
    the matching type; `targets` draws one star per candidate target, the
    panel's own type filled and the rest hollow.
    """
    if type_filter is not None:
        records = [r for r in records if r.type_drawn in set(type_filter)]
    if not records:
        raise ArtifactError("no trajectories to plot")

    types = sorted({r.type_drawn for r in records})
    fig, axes = plt.subplots(
        1, len(types), figsize=(4.8 * len(types), 4.5),
        sharex=True, sharey=True, squeeze=False,
    )
    group_legend = len(records) > 1 or complete or targets
    star_labels: set[str] = set()
    for col, t in enumerate(types):
        ax = axes[0, col]
        mine = [r for r in records if r.type_drawn == t]
        _panel_paths(ax, mine, f"C{t % 10}", positions, label_once=col == 0)
        if complete:
            _panel_complete(
                ax, [c for c in complete if c.type_index == t], positions,
                label_once=col == 0,
            )
        if targets:
            for ti, (tx, ty) in enumerate(targets):
                live = ti == t
                label = "target (drawn type)" if live else "target (other type)"
                if col > 0 or label in star_labels:
                    label = None
                else:
                    star_labels.add(label)
                ax.plot(tx, ty, marker="*", ms=15, ls="none", color="k",
                        mfc="k" if live else "none", label=label)
        ax.set_title(f"type {t}")
        ax.set_xlabel("x")
        ax.set_aspect("equal", adjustable="box")
        ax.grid(alpha=0.25)
    axes[0, 0].set_ylabel("y")
    if group_legend:
        axes[0, 0].legend(loc="best", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return fig


def plot_values(data: PlotsData, title: str | None = None):
    """Bar comparison of root values with the withholding gain annotated."""
    v = data.values
    labels = [f"type {i}\nfull info" for i in range(len(v.complete_by_type))]
    labels += ["prior-\nweighted", "committed\nsignaling"]
    heights = list(v.complete_by_type) + [v.complete_weighted, v.incomplete_root]
    colors = [f"C{i % 10}" for i in range(len(v.complete_by_type))] + ["0.6", "C3"]

    fig, ax = plt.subplots(figsize=(1.4 * len(heights) + 2.2, 4.2))
    bars = ax.bar(labels, heights, color=colors)
    for bar, h in zip(bars, heights):
        ax.annotate(f"{h:+.4f}", (bar.get_x() + bar.get_width() / 2, h),
                    ha="center", va="bottom" if h >= 0 else "top", fontsize=8)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("root value (minimizer cost)")
    ax.set_title(title or f"gain from withholding the type: {v.improvement:+.4f}")
    ax.grid(axis="y", alpha=0.25)
    fig.tight_layout()
    return fig


def plot_delta_cost(
    deltas: DeltaTable,
    stats: ExperimentSummary,
    bins: int = 40,
    title: str | None = None,
):
    """Histogram of paired cost differences with the reported mean and CI.

    The mean line and CI band come from the stats artifact, not from the
    rows; the two files must describe the same experiment.
    """
    if len(deltas) != stats.n_runs:
        raise ArtifactError(
            f"deltas has {len(deltas)} rows but stats reports n_runs={stats.n_runs}; "
            "these artifacts are not from the same experiment"
        )
    d = deltas.delta
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if np.ptp(d) == 0.0:
        # constant differences: a single bin centered on the value
        ax.hist(d, bins=1, range=(d[0] - 0.5, d[0] + 0.5),
                color="C0", alpha=0.8, edgecolor="white")
    else:
        ax.hist(d, bins=bins, color="C0", alpha=0.8, edgecolor="white")
    ax.axvline(0.0, color="k", lw=0.8, ls=":")
    ax.axvline(stats.mean_delta_cost, color="C3", lw=1.6,
               label=f"mean {stats.mean_delta_cost:+.4f}")
    if stats.ci95 is not None:
        lo, hi = stats.ci95
        ax.axvspan(lo, hi, color="C3", alpha=0.18,
                   label=f"95% CI [{lo:+.4f}, {hi:+.4f}]")
    else:
        ax.annotate("95% CI: n/a", xy=(0.98, 0.82), xycoords="axes fraction",
                    ha="right", fontsize=9)
    note = f"n = {stats.n_runs}"
    if stats.n_failed:
        note += f" ({stats.n_failed} failed pairs excluded)"
    ax.annotate(note, xy=(0.98, 0.92), xycoords="axes fraction",
                ha="right", fontsize=9)
    ax.set_xlabel("paired cost difference (re-solving minus committed)")
    ax.set_ylabel("pairs")
    ax.legend(loc="upper left", fontsize=9)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def plot_convergence(trace: TraceTable, title: str | None = None):
    """Optimizer loss and gradient norm against the iteration counter."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(trace.iteration, trace.loss, color="C0", lw=1.4)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective", color="C0")
    ax.tick_params(axis="y", labelcolor="C0")
    ax.grid(alpha=0.25)
    ax2 = ax.twinx()
    # gradient norms span orders of magnitude; zeros would break the log axis
    gnorm = np.maximum(trace.grad_norm, np.finfo(float).tiny)
    ax2.semilogy(trace.iteration, gnorm, color="C1", lw=1.0, alpha=0.85)
    ax2.set_ylabel("gradient norm", color="C1")
    ax2.tick_params(axis="y", labelcolor="C1")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return fig


def save_figure(fig, out: str | Path) -> Path:
    """Write the figure as PNG or SVG (by extension) and close it."""
    out = Path(out)
    if out.suffix.lower() not in (".png", ".svg"):
        raise ArtifactError(f"{out}: unsupported image format (use .png or .svg)")
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out
