"""Command-line entry: render figures from artifact files.

Either point at declarative job files:

    plotkit render jobs/trajectories.json jobs/hist.json

or spell a single figure out with flags:

    plotkit trajectories --data run/plots_data.json --targets "0,-1;0,1" --out fig.png
    plotkit delta-cost-hist --deltas run/deltas.csv --stats run/stats.json --out hist.png

Exit codes: 0 on success, 1 on any input or usage error.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

if "matplotlib.pyplot" not in sys.modules:
    matplotlib.use("Agg")

from .artifacts import ArtifactError
from .job import PlotJob, load_job, render

__version__ = "0.1.0"


def _parse_targets(text: str) -> list[list[float]]:
    # "0,-1;0,1" -> [[0.0, -1.0], [0.0, 1.0]]
    targets = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ArtifactError(f"--targets: {chunk!r} is not an x,y pair")
        try:
            targets.append([float(parts[0]), float(parts[1])])
        except ValueError:
            raise ArtifactError(f"--targets: {chunk!r} is not an x,y pair") from None
    return targets


def _job_from_flags(args) -> PlotJob:
    style: dict[str, object] = {}
    if getattr(args, "title", None):
        style["title"] = args.title
    inputs: dict[str, object] = {}
    if args.cmd == "trajectories":
        if bool(args.data) == bool(args.runs):
            raise ArtifactError("trajectories: give exactly one of --data or --runs")
        if args.data:
            inputs["data"] = args.data
        else:
            inputs["runs"] = args.runs
        if args.types:
            style["types"] = [int(t) for t in args.types.split(",")]
        if args.targets:
            style["targets"] = _parse_targets(args.targets)
        if args.no_complete:
            style["no_complete"] = True
    elif args.cmd == "values":
        inputs["data"] = args.data
    elif args.cmd == "delta-cost-hist":
        inputs["deltas"] = args.deltas
        inputs["stats"] = args.stats
        style["bins"] = args.bins
    elif args.cmd == "convergence":
        inputs["trace"] = args.trace
    return PlotJob(kind=args.cmd, inputs=inputs, out=args.out, style=style)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="plotkit",
        description="Render figures from solver artifact files.",
    )
    ap.add_argument("--version", action="version", version=f"plotkit {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("render", help="render one or more job files")
    p.add_argument("jobs", nargs="+", help="plot_job JSON files")

    p = sub.add_parser("trajectories", help="planar paths, one panel per type")
    p.add_argument("--data", help="per-type comparison export (plots_data.json)")
    p.add_argument("--runs", action="append",
                   help="rollout file (trajectories.jsonl); repeatable")
    p.add_argument("--types", help="comma-separated type filter")
    p.add_argument("--targets", help="semicolon-separated x,y pairs to mark")
    p.add_argument("--no-complete", action="store_true",
                   help="omit the full-information reference paths")

    q = sub.add_parser("values", help="root-value comparison bars")
    q.add_argument("--data", required=True)

    h = sub.add_parser("delta-cost-hist", help="paired cost-difference histogram")
    h.add_argument("--deltas", required=True)
    h.add_argument("--stats", required=True)
    h.add_argument("--bins", type=int, default=40)

    c = sub.add_parser("convergence", help="optimizer loss and gradient trace")
    c.add_argument("--trace", required=True)

    for sp in (p, q, h, c):
        sp.add_argument("--out", required=True, help="output image (.png or .svg)")
        sp.add_argument("--title")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.cmd == "render":
            jobs = [load_job(j) for j in args.jobs]
        else:
            jobs = [_job_from_flags(args)]
        for job in jobs:
            out = render(job)
            print(f"wrote {out}")
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
