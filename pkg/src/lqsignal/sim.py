"""Monte Carlo rollouts of committed signaling policies.

A rollout draws the private type from the prior, then walks the signal tree:
at each step the informed player samples a branch from its type's row of the
current policy, both players apply that branch's affine feedback, and the
state advances with optional additive Gaussian noise.  In `resolve` mode the
remaining-horizon problem is re-optimized at every step (warm started from
the restriction of the policy currently in force) before acting.

Paired comparisons share one seed per run: the type draw, the branch
uniforms, and the noise sequence come from fixed sub-streams, so a resolved
and a non-resolved rollout with the same seed face identical randomness.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import GameSpec
from .optimize import OptimizerConfig, SolvedPolicy, optimize
from .riccati import ValueTree, WellPosednessError
from .tree import NodeId

TRAJECTORY_SCHEMA_VERSION = 1
STATS_SCHEMA_VERSION = 1
NOISE_SCHEMA_VERSION = 1

DELTA_CSV_FIELDS = (
    "run",
    "seed",
    "type_drawn",
    "cost_resolved",
    "cost_offline",
    "delta",
)


@dataclass
class NoiseModel:
    """Additive per-step state disturbance w_k ~ N(0, Sigma).

    `seed` is the default stream seed used when a rollout is not given an
    explicit one (batch drivers always pass explicit per-run seeds).
    """

    Sigma: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        self.Sigma = np.asarray(self.Sigma, dtype=float)
        n = self.Sigma.shape[0]
        if self.Sigma.shape != (n, n):
            raise ValueError("Sigma must be square")
        if not np.allclose(self.Sigma, self.Sigma.T, atol=1e-12):
            raise ValueError("Sigma must be symmetric")
        w, U = np.linalg.eigh(self.Sigma)
        if float(w.min()) < -1e-10:
            raise ValueError("Sigma must be positive semidefinite")
        # PSD square root; Sigma may be singular so Cholesky is not usable
        self._factor = U * np.sqrt(np.clip(w, 0.0, None))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self._factor @ rng.standard_normal(self.Sigma.shape[0])


@dataclass
class Trajectory:
    """One realized play of the game.

    A re-solve failure truncates the record at the failing step: the arrays
    stop there, `error` carries the reason, and realized_cost is NaN.
    """

    type_drawn: int
    states: np.ndarray
    u_actions: np.ndarray
    v_actions: np.ndarray
    branch_choices: np.ndarray
    beliefs: np.ndarray
    realized_cost: float
    seed: int
    resolved: bool
    resolve_times_ms: list[float] = field(default_factory=list)
    error: str | None = None


def trajectory_cost(traj: Trajectory, spec: GameSpec) -> float:
    """Recompute the realized cost of the informed player's type."""
    td = spec.types[traj.type_drawn]
    tau = spec.dynamics.tau
    total = 0.0
    for u, v in zip(traj.u_actions, traj.v_actions):
        total += 0.5 * tau * (u @ td.R @ u - v @ td.S @ v)
    xK = traj.states[-1]
    return float(total + 0.5 * xK @ td.Q @ xK + td.q @ xK + td.c)


def _sample_row(row: np.ndarray, u: float) -> int:
    idx = int(np.searchsorted(np.cumsum(row), u, side="right"))
    return min(idx, len(row) - 1)


def rollout(
    policy: SolvedPolicy,
    spec: GameSpec,
    x0: np.ndarray,
    noise: NoiseModel | None = None,
    resolve: bool = False,
    resolver_config: OptimizerConfig | None = None,
    seed: int | None = None,
    force_type: int | None = None,
) -> Trajectory:
    """Play one game under the committed policy, optionally re-solving.

    `force_type` pins the private type instead of sampling it from the
    prior (public beliefs still evolve by Bayes); used for per-type
    trajectory exports.
    """
    K = spec.horizon
    I = spec.num_types
    dyn = spec.dynamics
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if seed is None:
        seed = noise.seed if noise is not None else 0

    streams = np.random.SeedSequence(seed).spawn(2)
    rng_choice = np.random.default_rng(streams[0])
    rng_noise = np.random.default_rng(streams[1])

    if force_type is None:
        type_drawn = int(rng_choice.choice(I, p=spec.prior))
    else:
        type_drawn = int(force_type)
    td = spec.types[type_drawn]

    states = np.zeros((K + 1, dyn.n))
    u_actions = np.zeros((K, dyn.m1))
    v_actions = np.zeros((K, dyn.m2))
    branch_choices = np.zeros(K, dtype=int)
    beliefs = np.zeros((K + 1, I))
    states[0] = x0
    beliefs[0] = spec.prior

    resolve_times_ms: list[float] = []
    x = x0.copy()
    cur = policy
    local_path: tuple[int, ...] = ()
    cost = 0.0
    # default per-step budget: warm starts sit near a stationary point, so a
    # loose gradient tolerance with a large step finishes in a few iterations;
    # the cap only binds on the rare cold re-solve after an unlikely branch
    rcfg = resolver_config or OptimizerConfig(
        step_size=4.0, max_iters=200, grad_tol=1e-3, loss_tol=1e-8
    )
    # online play accounts for the disturbance: re-solves optimize the
    # stochastic value, while the committed policy was solved noiselessly
    rsigma = noise.Sigma if noise is not None and np.any(noise.Sigma != 0.0) else None

    for k in range(K):
        if resolve:
            warm = cur.signaling if k == 0 else cur.signaling.subtree(local_path)
            sub_spec = GameSpec(
                dynamics=spec.dynamics,
                types=spec.types,
                horizon=K - k,
                prior=beliefs[k],
                continuous=spec.continuous,
            )
            t0 = time.perf_counter()
            try:
                cur = optimize(sub_spec, x, rcfg, warm_start=warm, sigma=rsigma)
            except (WellPosednessError, np.linalg.LinAlgError) as exc:
                return Trajectory(
                    type_drawn=type_drawn,
                    states=states[: k + 1],
                    u_actions=u_actions[:k],
                    v_actions=v_actions[:k],
                    branch_choices=branch_choices[:k],
                    beliefs=beliefs[: k + 1],
                    realized_cost=float("nan"),
                    seed=seed,
                    resolved=True,
                    resolve_times_ms=resolve_times_ms,
                    error=f"re-solve failed at step {k}: {exc}",
                )
            resolve_times_ms.append(1e3 * (time.perf_counter() - t0))
            local_path = ()

        node = NodeId(k=len(local_path), omega=local_path)
        j = node.flat(I)
        row = cur.signaling.alpha[node.k][j, type_drawn]
        a = _sample_row(row, rng_choice.random())
        edge = cur.value_tree.edge_solution(node, a)
        u, v = edge.controls(x)

        cost += 0.5 * dyn.tau * (u @ td.R @ u - v @ td.S @ v)
        x = dyn.A @ x + dyn.B1 @ u + dyn.B2 @ v
        if noise is not None:
            x = x + noise.sample(rng_noise)

        local_path = local_path + (a,)
        child = NodeId(k=len(local_path), omega=local_path)
        beliefs[k + 1] = cur.belief_tree.beliefs[child.k][child.flat(I)]
        branch_choices[k] = a
        u_actions[k] = u
        v_actions[k] = v
        states[k + 1] = x

    xK = states[K]
    cost += 0.5 * xK @ td.Q @ xK + td.q @ xK + td.c
    return Trajectory(
        type_drawn=type_drawn,
        states=states,
        u_actions=u_actions,
        v_actions=v_actions,
        branch_choices=branch_choices,
        beliefs=beliefs,
        realized_cost=float(cost),
        seed=seed,
        resolved=resolve,
        resolve_times_ms=resolve_times_ms,
    )


def stochastic_value_correction(
    value_tree: ValueTree, Sigma: np.ndarray
) -> list[np.ndarray]:
    """Per-node value offsets under i.i.d. N(0, Sigma) additive state noise.

    Additive noise leaves the gains and the quadratic/linear coefficients
    untouched; only the constant term grows by (1/2) tr(P_child Sigma) each
    step, averaged with the surviving branch weights.  Returns one offset
    array per depth, indexed like the node arrays.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    K = value_tree.horizon
    out: list[np.ndarray] = [np.zeros(p.shape[0]) for p in value_tree.P]
    for k in range(K - 1, -1, -1):
        per_child = out[k + 1] + 0.5 * np.einsum(
            "nij,ji->n", value_tree.P[k + 1], Sigma
        )
        lam = value_tree.lam_norm[k]
        out[k] = np.einsum("na,na->n", lam, per_child.reshape(lam.shape))
    return out


@dataclass
class ExperimentStats:
    """Paired re-solve vs offline comparison over a batch of seeds.

    Δcost = cost(resolved) − cost(offline) under common random numbers, so a
    negative mean says re-solving helped.  CI fields are None when n < 2.
    """

    n_runs: int
    n_failed: int
    mean_delta_cost: float
    std_delta_cost: float | None
    ci_low: float | None
    ci_high: float | None
    mean_cost_resolved: float
    mean_cost_offline: float
    mean_resolve_ms: float
    std_resolve_ms: float
    median_resolve_ms: float


def batch_experiment(
    policy: SolvedPolicy,
    spec: GameSpec,
    x0: np.ndarray,
    noise: NoiseModel | None,
    n_runs: int,
    base_seed: int = 0,
    resolver_config: OptimizerConfig | None = None,
    seeds: list[int] | None = None,
    keep_trajectories: bool = False,
) -> tuple[ExperimentStats, list[dict], list[Trajectory]]:
    """Run paired rollouts, seeded base_seed + run index unless `seeds` given.

    Pairs whose re-solve arm fails are dropped from the statistics and counted
    in `n_failed`.  With keep_trajectories, both arms of every surviving pair
    are returned (offline first).
    """
    if seeds is None:
        seeds = [base_seed + run for run in range(n_runs)]
    records: list[dict] = []
    trajectories: list[Trajectory] = []
    deltas: list[float] = []
    times: list[float] = []
    n_failed = 0
    for run, seed in enumerate(seeds):
        off = rollout(policy, spec, x0, noise=noise, resolve=False, seed=seed)
        res = rollout(
            policy,
            spec,
            x0,
            noise=noise,
            resolve=True,
            resolver_config=resolver_config,
            seed=seed,
        )
        if res.error is not None:
            n_failed += 1
            continue
        delta = res.realized_cost - off.realized_cost
        deltas.append(delta)
        times.extend(res.resolve_times_ms)
        if keep_trajectories:
            trajectories.extend([off, res])
        records.append(
            {
                "run": run,
                "seed": seed,
                "type_drawn": res.type_drawn,
                "cost_resolved": res.realized_cost,
                "cost_offline": off.realized_cost,
                "delta": delta,
            }
        )
    if not deltas:
        raise RuntimeError("every paired run failed; no statistics to report")
    arr = np.asarray(deltas)
    mean = float(arr.mean())
    if len(arr) > 1:
        std = float(arr.std(ddof=1))
        half = 1.96 * std / np.sqrt(len(arr))
        ci_low, ci_high = mean - half, mean + half
    else:
        std = ci_low = ci_high = None
    stats = ExperimentStats(
        n_runs=len(arr),
        n_failed=n_failed,
        mean_delta_cost=mean,
        std_delta_cost=std,
        ci_low=ci_low,
        ci_high=ci_high,
        mean_cost_resolved=float(np.mean([r["cost_resolved"] for r in records])),
        mean_cost_offline=float(np.mean([r["cost_offline"] for r in records])),
        mean_resolve_ms=float(np.mean(times)),
        std_resolve_ms=float(np.std(times, ddof=1)) if len(times) > 1 else 0.0,
        median_resolve_ms=float(np.median(times)),
    )
    return stats, records, trajectories


def trajectory_document(traj: Trajectory) -> dict:
    return {
        "version": TRAJECTORY_SCHEMA_VERSION,
        "kind": "trajectory",
        "type_drawn": traj.type_drawn,
        "states": traj.states.tolist(),
        "u_actions": traj.u_actions.tolist(),
        "v_actions": traj.v_actions.tolist(),
        "branch_choices": traj.branch_choices.tolist(),
        "beliefs": traj.beliefs.tolist(),
        "realized_cost": traj.realized_cost,
        "seed": traj.seed,
        "resolved": traj.resolved,
        "resolve_times_ms": list(traj.resolve_times_ms),
        "error": traj.error,
    }


def save_trajectories(trajs: list[Trajectory], path: str | Path) -> None:
    """One JSON document per line."""
    lines = [json.dumps(trajectory_document(t)) for t in trajs]
    Path(path).write_text("\n".join(lines) + "\n")


def load_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        doc = json.loads(line)
        if doc.get("version") != TRAJECTORY_SCHEMA_VERSION or doc.get("kind") != "trajectory":
            raise ValueError(f"{path}:{lineno}: not a version-1 trajectory record")
        out.append(
            Trajectory(
                type_drawn=int(doc["type_drawn"]),
                states=np.asarray(doc["states"], dtype=float),
                u_actions=np.asarray(doc["u_actions"], dtype=float),
                v_actions=np.asarray(doc["v_actions"], dtype=float),
                branch_choices=np.asarray(doc["branch_choices"], dtype=int),
                beliefs=np.asarray(doc["beliefs"], dtype=float),
                realized_cost=float(doc["realized_cost"]),
                seed=int(doc["seed"]),
                resolved=bool(doc["resolved"]),
                resolve_times_ms=[float(t) for t in doc["resolve_times_ms"]],
                error=doc.get("error"),
            )
        )
    return out


def save_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Plot-ready per-step table; action/branch cells are empty at k = K."""
    K, n = traj.states.shape[0] - 1, traj.states.shape[1]
    m1 = traj.u_actions.shape[1]
    m2 = traj.v_actions.shape[1]
    I = traj.beliefs.shape[1]
    header = (
        ["k"]
        + [f"x{j}" for j in range(n)]
        + [f"u{j}" for j in range(m1)]
        + [f"v{j}" for j in range(m2)]
        + [f"p{j}" for j in range(I)]
        + ["branch"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(K + 1):
            row = [k] + [repr(v) for v in traj.states[k]]
            if k < K:
                row += [repr(v) for v in traj.u_actions[k]]
                row += [repr(v) for v in traj.v_actions[k]]
            else:
                row += [""] * (m1 + m2)
            row += [repr(v) for v in traj.beliefs[k]]
            row.append(int(traj.branch_choices[k]) if k < K else "")
            writer.writerow(row)


def stats_document(stats: ExperimentStats) -> dict:
    doc = {"version": STATS_SCHEMA_VERSION, "kind": "experiment_stats"}
    doc.update(stats.__dict__)
    # the interval travels as a pair; n_runs < 2 leaves it null
    del doc["ci_low"], doc["ci_high"]
    if stats.ci_low is None:
        doc["ci95"] = None
    else:
        doc["ci95"] = [stats.ci_low, stats.ci_high]
    return doc


def save_stats(stats: ExperimentStats, path: str | Path) -> None:
    Path(path).write_text(json.dumps(stats_document(stats), indent=2) + "\n")


def load_stats(path: str | Path) -> ExperimentStats:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != STATS_SCHEMA_VERSION or doc.get("kind") != "experiment_stats":
        raise ValueError(f"{path}: not a version-1 experiment_stats file")
    ci = doc.get("ci95")
    doc = dict(doc, ci_low=None if ci is None else ci[0], ci_high=None if ci is None else ci[1])
    return ExperimentStats(
        **{k: doc[k] for k in ExperimentStats.__dataclass_fields__}
    )


def save_deltas_csv(records: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DELTA_CSV_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec[k] for k in DELTA_CSV_FIELDS})


def load_deltas_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != DELTA_CSV_FIELDS:
            raise ValueError(f"{path}: unexpected delta CSV header")
        rows = []
        for rec in reader:
            rows.append(
                {
                    "run": int(rec["run"]),
                    "seed": int(rec["seed"]),
                    "type_drawn": int(rec["type_drawn"]),
                    "cost_resolved": float(rec["cost_resolved"]),
                    "cost_offline": float(rec["cost_offline"]),
                    "delta": float(rec["delta"]),
                }
            )
        return rows


def noise_document(noise: NoiseModel) -> dict:
    return {
        "version": NOISE_SCHEMA_VERSION,
        "kind": "noise_model",
        "Sigma": noise.Sigma.tolist(),
        "seed": noise.seed,
    }


def save_noise(noise: NoiseModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(noise_document(noise), indent=2) + "\n")


def load_noise(path: str | Path) -> NoiseModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != NOISE_SCHEMA_VERSION or doc.get("kind") != "noise_model":
        raise ValueError(f"{path}: not a version-1 noise_model file")
    return NoiseModel(Sigma=np.asarray(doc["Sigma"], dtype=float), seed=int(doc["seed"]))
