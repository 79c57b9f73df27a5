"""Gradient descent over branch logits of the committed signaling policy.

The outer problem min_phi V_root(x0; phi) is smooth but not convex, and every
exactly non-revealing policy is a stationary point: the belief martingale
makes first-order belief perturbations cancel.  The all-uniform start is
therefore a saddle for symmetric games, and the default initialization adds a
small seeded jitter to the logits so descent can leave it.  Set
`init_scale=0` to start exactly uniform.

Descent is plain gradient steps with optional backtracking (halve up to 30
times until the loss strictly decreases).  The returned policy is the best
iterate seen, not necessarily the last.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .backprop import tree_loss, tree_loss_grad
from .game import GameSpec, spec_sha256
from .riccati import ValueTree
from .tree import BeliefTree, SignalingPolicy

MAX_BACKTRACKS = 30


@dataclass
class OptimizerConfig:
    step_size: float = 0.1
    max_iters: int = 2000
    grad_tol: float = 1e-6
    loss_tol: float = 1e-10
    seed: int = 0
    init_scale: float = 1e-2  # jitter scale for the logit initialization
    backtracking: bool = True


@dataclass
class TraceRow:
    iter: int
    loss: float
    grad_norm: float
    step_size_used: float


@dataclass
class SolvedPolicy:
    signaling: SignalingPolicy
    belief_tree: BeliefTree
    value_tree: ValueTree
    root_value: float
    iterations: int
    grad_norm_final: float
    converged: bool
    x0: np.ndarray
    config: OptimizerConfig
    trace: list[TraceRow] = field(default_factory=list)


def _grad_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def _initial_logits(
    spec: GameSpec, config: OptimizerConfig
) -> list[np.ndarray]:
    I = spec.num_types
    rng = np.random.default_rng(config.seed)
    out = []
    for k in range(spec.horizon):
        shape = (I**k, I, I)
        if config.init_scale > 0:
            out.append(config.init_scale * rng.standard_normal(shape))
        else:
            out.append(np.zeros(shape))
    return out


def optimize(
    spec: GameSpec,
    x0: np.ndarray,
    config: OptimizerConfig | None = None,
    warm_start: SignalingPolicy | None = None,
    sigma: np.ndarray | None = None,
) -> SolvedPolicy:
    """Minimize the committed-policy root value at x0 over branch logits.

    `sigma` switches the objective to the stochastic value (expected per-step
    disturbance cost included); gains for fixed logits are unchanged, only
    the signaling schedule responds to the disturbance level.
    """
    config = config or OptimizerConfig()
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if warm_start is not None:
        logits = [L.copy() for L in warm_start.logits]
    else:
        logits = _initial_logits(spec, config)

    policy = SignalingPolicy.from_logits(logits)
    loss, grads, tree, vt = tree_loss_grad(policy, spec, x0, sigma=sigma)
    gnorm = _grad_norm(grads)
    best = (loss, policy, tree, vt)
    trace = [TraceRow(iter=0, loss=loss, grad_norm=gnorm, step_size_used=0.0)]
    converged = gnorm < config.grad_tol
    iters = 0

    while not converged and iters < config.max_iters:
        iters += 1
        eta = config.step_size
        accepted = None
        for _ in range(MAX_BACKTRACKS + 1):
            cand = SignalingPolicy.from_logits(
                [L - eta * g for L, g in zip(policy.logits, grads)]
            )
            cand_loss, cand_tree, cand_vt = tree_loss(cand, spec, x0, sigma=sigma)
            if not config.backtracking or cand_loss < loss:
                accepted = (cand, cand_loss, cand_tree, cand_vt)
                break
            eta *= 0.5
        if accepted is None:
            break  # stalled: no decrease within the backtracking budget

        policy, new_loss, tree, vt = accepted
        rel_change = abs(new_loss - loss) / max(1.0, abs(loss))
        loss = new_loss
        _, grads, tree, vt = tree_loss_grad(policy, spec, x0, tree=tree, vt=vt, sigma=sigma)
        gnorm = _grad_norm(grads)
        trace.append(
            TraceRow(iter=iters, loss=loss, grad_norm=gnorm, step_size_used=eta)
        )
        if loss < best[0]:
            best = (loss, policy, tree, vt)
        if gnorm < config.grad_tol or rel_change < config.loss_tol:
            converged = True

    best_loss, best_policy, best_tree, best_vt = best
    return SolvedPolicy(
        signaling=best_policy,
        belief_tree=best_tree,
        value_tree=best_vt,
        root_value=best_loss,
        iterations=iters,
        grad_norm_final=gnorm,
        converged=converged,
        x0=x0,
        config=config,
        trace=trace,
    )


def schedule_warm_starts(
    spec: GameSpec,
    magnitude: float = 3.0,
    jitter: float = 1e-2,
    seed: int = 0,
) -> list[SignalingPolicy]:
    """Reveal-at-step warm starts: non-revealing plus one per reveal depth.

    Each start is (near-)uniform everywhere except at one depth, where type
    i's row favors branch i with the given logit magnitude.  The family
    covers the schedule-shaped optima these games exhibit; the jitter breaks
    the non-revealing stationary manifold.
    """
    rng = np.random.default_rng(seed)
    I, K = spec.num_types, spec.horizon
    starts = []
    for k_r in [None] + list(range(K)):
        logits = [jitter * rng.standard_normal((I**k, I, I)) for k in range(K)]
        if k_r is not None:
            L = logits[k_r]
            for i in range(I):
                L[:, i, :] -= magnitude
                L[:, i, i] += 2 * magnitude
        starts.append(SignalingPolicy.from_logits(logits))
    return starts


def random_warm_starts(
    spec: GameSpec, scale: float = 1.0, count: int = 4, seed: int = 0
) -> list[SignalingPolicy]:
    """Free-form random logit starts, for optima without schedule structure."""
    rng = np.random.default_rng(seed)
    I, K = spec.num_types, spec.horizon
    return [
        SignalingPolicy.from_logits(
            [scale * rng.standard_normal((I**k, I, I)) for k in range(K)]
        )
        for _ in range(count)
    ]


def optimize_multistart(
    spec: GameSpec,
    x0: np.ndarray,
    config: OptimizerConfig | None = None,
    starts: list[SignalingPolicy] | None = None,
    pilot_iters: int = 150,
    sigma: np.ndarray | None = None,
) -> SolvedPolicy:
    """Pilot-run every warm start briefly, then fully optimize the best.

    The outer problem has distinct basins (reveal-now vs reveal-later
    schedules); a short pilot pass ranks them by achieved value and only the
    winner gets the full budget.  Deterministic given config.seed.
    """
    config = config or OptimizerConfig()
    if starts is None:
        starts = schedule_warm_starts(spec, seed=config.seed)
    if not starts:
        raise ValueError("optimize_multistart needs at least one warm start")
    pilot_cfg = replace(config, max_iters=min(pilot_iters, config.max_iters))
    pilots = [optimize(spec, x0, pilot_cfg, warm_start=w, sigma=sigma) for w in starts]
    best = min(pilots, key=lambda s: s.root_value)
    return optimize(spec, x0, config, warm_start=best.signaling, sigma=sigma)


def revelation_time(
    policy: SignalingPolicy, threshold: float, tau: float
) -> float | None:
    """First time k*tau at which some node's type rows differ by TV > threshold.

    Returns None when the policy never separates types that far.
    """
    for k, a in enumerate(policy.alpha):
        tv = 0.5 * np.sum(np.abs(a[:, :, None, :] - a[:, None, :, :]), axis=-1)
        if float(np.max(tv)) > threshold:
            return k * tau
    return None


# ---------------------------------------------------------------------------
# Policy file round-tripping.  Only the logits and run metadata are stored;
# the belief tree and value tree are recomputed deterministically on load.

POLICY_SCHEMA_VERSION = 1


def solved_policy_document(solved: SolvedPolicy, spec: GameSpec) -> dict:
    return {
        "version": POLICY_SCHEMA_VERSION,
        "kind": "solved_policy",
        "spec_sha256": spec_sha256(spec),
        "x0": solved.x0.tolist(),
        "config": asdict(solved.config),
        "root_value": solved.root_value,
        "iterations": solved.iterations,
        "grad_norm_final": solved.grad_norm_final,
        "converged": solved.converged,
        "logits": [L.tolist() for L in solved.signaling.logits],
    }


def save_policy(solved: SolvedPolicy, spec: GameSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(solved_policy_document(solved, spec)) + "\n")


def load_policy(path: str | Path, spec: GameSpec) -> SolvedPolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != POLICY_SCHEMA_VERSION or doc.get("kind") != "solved_policy":
        raise ValueError(f"{path}: not a version-{POLICY_SCHEMA_VERSION} policy file")
    have = spec_sha256(spec)
    if doc["spec_sha256"] != have:
        raise ValueError(
            f"{path}: policy was solved for a different spec "
            f"(hash {doc['spec_sha256'][:12]}.. vs {have[:12]}..)"
        )
    policy = SignalingPolicy.from_logits([np.asarray(L) for L in doc["logits"]])
    loss, tree, vt = tree_loss(policy, spec, np.asarray(doc["x0"], dtype=float))
    return SolvedPolicy(
        signaling=policy,
        belief_tree=tree,
        value_tree=vt,
        root_value=float(doc["root_value"]),
        iterations=int(doc["iterations"]),
        grad_norm_final=float(doc["grad_norm_final"]),
        converged=bool(doc["converged"]),
        x0=np.asarray(doc["x0"], dtype=float),
        config=OptimizerConfig(**doc["config"]),
        trace=[],
    )


def save_trace(trace: list[TraceRow], path: str | Path) -> None:
    """Per-iteration optimizer log as CSV (iter, loss, grad_norm, step_size_used)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "loss", "grad_norm", "step_size_used"])
        for row in trace:
            writer.writerow([row.iter, repr(row.loss), repr(row.grad_norm), repr(row.step_size_used)])
