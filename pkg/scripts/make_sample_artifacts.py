#!/usr/bin/env python3
"""Regenerate the sample artifacts bundled with the plotting package.

Solves both bundled scenarios, then drives the command-line tool to emit
the documented artifact files (plots data, paired-experiment deltas and
stats, convergence trace) into the plotting package's sample directory.
The plotting side consumes only these files, never the solver.

  python3 scripts/make_sample_artifacts.py --dest plotkit/src/plotkit/sample_data
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

import numpy as np

import lqsignal as lq
from lqsignal.optimize import (
    OptimizerConfig,
    optimize,
    optimize_multistart,
    save_policy,
    save_trace,
    schedule_warm_starts,
)

REPO = Path(__file__).resolve().parent.parent


def cli(*args: object) -> None:
    cmd = [sys.executable, "-m", "lqsignal_cli"] + [str(a) for a in args]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dest", default=REPO / "plotkit" / "src" / "plotkit" / "sample_data",
                    type=Path)
    ap.add_argument("--runs", type=int, default=1600,
                    help="paired runs behind the delta-cost sample")
    args = ap.parse_args()

    pursuit_dir = args.dest / "pursuit"
    drone_dir = args.dest / "drone"
    rollout_dir = args.dest / "drone_rollouts"
    pursuit_dir.mkdir(parents=True, exist_ok=True)
    drone_dir.mkdir(parents=True, exist_ok=True)
    rollout_dir.mkdir(parents=True, exist_ok=True)

    # pursuit scenario: schedule multistart (single descent stalls at the
    # reveal-immediately basin), then per-type trajectory data for plotting
    spec = lq.hexner_scenario()
    lq.save_spec(spec, pursuit_dir / "spec.json")
    solved = optimize_multistart(
        spec, np.zeros(spec.n),
        OptimizerConfig(step_size=4.0, max_iters=2000, seed=0),
        starts=schedule_warm_starts(spec),
    )
    save_policy(solved, spec, pursuit_dir / "policy.json")
    save_trace(solved.trace, pursuit_dir / "trace.csv")
    cli("export-plots-data", pursuit_dir / "policy.json", pursuit_dir / "spec.json",
        "--out", pursuit_dir)

    # drone scenario: paired disturbance experiment behind the histogram
    spec = lq.drone_scenario()
    lq.save_spec(spec, drone_dir / "spec.json")
    lq.save_noise(lq.drone_noise(), drone_dir / "noise.json")
    solved = optimize(
        spec, np.zeros(spec.n),
        OptimizerConfig(step_size=4.0, max_iters=8000,
                        grad_tol=1e-6, loss_tol=1e-10, seed=0),
    )
    save_policy(solved, spec, drone_dir / "policy.json")
    cli("simulate", drone_dir / "policy.json", drone_dir / "spec.json",
        "--noise", drone_dir / "noise.json", "--resolve",
        "--runs", args.runs, "--seed", 0, "--save-trajectories", 0,
        "--out", drone_dir)

    # a handful of committed-policy rollouts under noise: exercises the
    # trajectory-lines reader without the expense of the paired experiment
    cli("simulate", drone_dir / "policy.json", drone_dir / "spec.json",
        "--noise", drone_dir / "noise.json",
        "--runs", 6, "--seed", 7, "--out", rollout_dir)

    print(f"sample artifacts written under {args.dest}")


if __name__ == "__main__":
    main()
