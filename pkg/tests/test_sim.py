"""Rollouts, paired experiments, and artifact round-trips."""

import numpy as np
import pytest

import lqsignal as lq
from lqsignal.optimize import OptimizerConfig
from lqsignal.riccati import WellPosednessError
from lqsignal.sim import NoiseModel, batch_experiment, rollout, trajectory_cost
from lqsignal.tree import NodeId

from conftest import tiny_game

FAST = OptimizerConfig(step_size=0.5, max_iters=40, grad_tol=1e-6)


@pytest.fixture(scope="module")
def solved_tiny():
    spec = tiny_game(seed=3)
    solved = lq.optimize(spec, np.zeros(spec.n), FAST)
    return spec, solved


def test_noise_model_validation():
    with pytest.raises(ValueError, match="square"):
        NoiseModel(Sigma=np.zeros((2, 3)))
    with pytest.raises(ValueError, match="symmetric"):
        NoiseModel(Sigma=np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="positive semidefinite"):
        NoiseModel(Sigma=np.array([[-1.0, 0.0], [0.0, 1.0]]))


def test_noise_model_singular_ok(drone_sigma):
    # rank-deficient covariances are routine (disturbance on one player only)
    nm = NoiseModel(Sigma=drone_sigma)
    rng = np.random.default_rng(0)
    draws = np.stack([nm.sample(rng) for _ in range(2000)])
    assert np.max(np.abs(draws[:, :6].reshape(-1))) == 0.0
    assert np.var(draws[:, 6]) == pytest.approx(0.25, rel=0.2)


def test_rollout_shapes_and_beliefs(solved_tiny):
    spec, solved = solved_tiny
    traj = rollout(solved, spec, np.zeros(spec.n), seed=5)
    K, I = spec.horizon, spec.num_types
    assert traj.states.shape == (K + 1, spec.n)
    assert traj.u_actions.shape == (K, spec.m1)
    assert traj.v_actions.shape == (K, spec.m2)
    assert traj.beliefs.shape == (K + 1, I)
    assert np.allclose(traj.beliefs.sum(axis=1), 1.0)
    assert traj.error is None
    assert not traj.resolved
    assert traj.resolve_times_ms == []
    # beliefs walk the policy's own tree along the realized branches
    node = NodeId(k=0)
    for k in range(K):
        node = node.child(int(traj.branch_choices[k]))
        want = solved.belief_tree.beliefs[node.k][node.flat(I)]
        assert np.array_equal(traj.beliefs[k + 1], want)


def test_rollout_replay_is_bitwise(solved_tiny):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.01 * np.eye(spec.n))
    a = rollout(solved, spec, np.zeros(spec.n), noise=nm, seed=12)
    b = rollout(solved, spec, np.zeros(spec.n), noise=nm, seed=12)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.branch_choices, b.branch_choices)
    assert a.realized_cost == b.realized_cost
    c = rollout(solved, spec, np.zeros(spec.n), noise=nm, seed=13)
    assert not np.array_equal(a.states, c.states)


def test_rollout_cost_recompute(solved_tiny, rng):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.05 * np.eye(spec.n))
    for seed in range(4):
        traj = rollout(solved, spec, rng.standard_normal(spec.n), noise=nm, seed=seed)
        assert trajectory_cost(traj, spec) == pytest.approx(
            traj.realized_cost, abs=1e-10
        )


def test_zero_covariance_equals_no_noise(solved_tiny):
    spec, solved = solved_tiny
    x0 = np.ones(spec.n)
    clean = rollout(solved, spec, x0, noise=None, seed=9)
    zero = rollout(solved, spec, x0, noise=NoiseModel(Sigma=np.zeros((spec.n,) * 2)), seed=9)
    assert np.array_equal(clean.states, zero.states)
    assert clean.realized_cost == zero.realized_cost


def test_noiseless_dynamics_follow_the_plan(solved_tiny):
    spec, solved = solved_tiny
    dyn = spec.dynamics
    traj = rollout(solved, spec, np.ones(spec.n), seed=2)
    node = NodeId(k=0)
    for k in range(spec.horizon):
        a = int(traj.branch_choices[k])
        edge = solved.value_tree.edge_solution(node, a)
        u, v = edge.controls(traj.states[k])
        assert np.allclose(u, traj.u_actions[k], atol=1e-13)
        assert np.allclose(v, traj.v_actions[k], atol=1e-13)
        want = dyn.A @ traj.states[k] + dyn.B1 @ u + dyn.B2 @ v
        assert np.allclose(traj.states[k + 1], want, atol=1e-13)
        node = node.child(a)


def test_force_type_pins_the_draw(solved_tiny):
    spec, solved = solved_tiny
    for i in range(spec.num_types):
        traj = rollout(solved, spec, np.zeros(spec.n), seed=0, force_type=i)
        assert traj.type_drawn == i


def test_scalar_disturbance_offset():
    # one step, one type, P_child = Q = 2, Sigma = 1: offset is tr(2)/2 = 1
    from lqsignal.game import ContinuousDynamics, GameSpec, TypeData, discretize_dynamics

    cont = ContinuousDynamics(A_c=np.zeros((1, 1)), B1_c=np.eye(1), B2_c=np.eye(1))
    spec = GameSpec(
        dynamics=discretize_dynamics(cont, 0.1),
        types=[TypeData(R=np.eye(1), S=np.eye(1), Q=np.array([[2.0]]),
                        q=np.zeros(1), c=0.0)],
        horizon=1,
        prior=np.array([1.0]),
        continuous=cont,
    )
    pol = lq.SignalingPolicy.zeros(1, 1)
    tree = lq.forward_bayes_pass(pol, spec.prior)
    vt = lq.backward_pass(tree, spec)
    offsets = lq.stochastic_value_correction(vt, np.array([[1.0]]))
    assert offsets[0][0] == pytest.approx(1.0)
    assert offsets[1][0] == 0.0


def test_resolve_failure_truncates(monkeypatch, solved_tiny):
    spec, solved = solved_tiny
    import lqsignal.sim as sim_mod

    real = sim_mod.optimize
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] >= 2:
            raise WellPosednessError("H_vv lost definiteness at depth 0")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim_mod, "optimize", flaky)
    traj = rollout(solved, spec, np.zeros(spec.n), resolve=True, seed=0)
    assert traj.error is not None
    assert "re-solve failed at step 1" in traj.error
    assert np.isnan(traj.realized_cost)
    assert traj.states.shape[0] == 2  # x0 plus the one completed step
    assert traj.u_actions.shape[0] == 1


def test_batch_experiment_drops_failed_pairs(monkeypatch, solved_tiny):
    spec, solved = solved_tiny
    import lqsignal.sim as sim_mod

    real = sim_mod.optimize
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        # run 0 makes K calls; the first call of run 1 fails, aborting it
        if calls["n"] == spec.horizon + 1:
            raise WellPosednessError("injected")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim_mod, "optimize", flaky)
    stats, records, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), None, n_runs=3, resolver_config=FAST
    )
    assert stats.n_failed == 1
    assert stats.n_runs == 2
    assert [r["run"] for r in records] == [0, 2]


def test_batch_experiment_all_failed_raises(monkeypatch, solved_tiny):
    spec, solved = solved_tiny
    import lqsignal.sim as sim_mod

    def broken(*args, **kwargs):
        raise WellPosednessError("injected")

    monkeypatch.setattr(sim_mod, "optimize", broken)
    with pytest.raises(RuntimeError, match="every paired run failed"):
        batch_experiment(solved, spec, np.zeros(spec.n), None, n_runs=2)


def test_batch_experiment_repeated_seed(solved_tiny):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.02 * np.eye(spec.n))
    stats, records, trajs = batch_experiment(
        solved,
        spec,
        np.zeros(spec.n),
        nm,
        n_runs=2,
        resolver_config=FAST,
        seeds=[7, 7],
        keep_trajectories=True,
    )
    assert records[0]["delta"] == records[1]["delta"]
    assert stats.std_delta_cost == 0.0
    assert stats.ci_low == stats.ci_high == stats.mean_delta_cost
    # offline arm first in every kept pair
    assert [t.resolved for t in trajs] == [False, True, False, True]
    assert trajs[0].seed == trajs[1].seed == 7


def test_batch_experiment_single_run_has_no_ci(solved_tiny):
    spec, solved = solved_tiny
    stats, _, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), None, n_runs=1, resolver_config=FAST
    )
    assert stats.n_runs == 1
    assert stats.std_delta_cost is None
    assert stats.ci_low is None and stats.ci_high is None


def test_batch_experiment_deterministic(solved_tiny):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.02 * np.eye(spec.n))
    s1, r1, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), nm, n_runs=3, resolver_config=FAST
    )
    s2, r2, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), nm, n_runs=3, resolver_config=FAST
    )
    assert s1.mean_delta_cost == s2.mean_delta_cost
    assert [r["delta"] for r in r1] == [r["delta"] for r in r2]


def test_trajectory_round_trip(tmp_path, solved_tiny):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.01 * np.eye(spec.n))
    trajs = [
        rollout(solved, spec, np.zeros(spec.n), noise=nm, seed=s) for s in range(3)
    ]
    path = tmp_path / "trajectories.jsonl"
    lq.save_trajectories(trajs, path)
    back = lq.load_trajectories(path)
    assert len(back) == 3
    for a, b in zip(trajs, back):
        assert np.array_equal(a.states, b.states)
        assert a.realized_cost == b.realized_cost
        assert a.seed == b.seed
        assert b.error is None


def test_trajectory_load_fails_closed(tmp_path, solved_tiny):
    spec, solved = solved_tiny
    traj = rollout(solved, spec, np.zeros(spec.n), seed=0)
    path = tmp_path / "trajectories.jsonl"
    lq.save_trajectories([traj], path)
    import json

    doc = json.loads(path.read_text())
    doc["version"] = 2
    path.write_text(json.dumps(doc) + "\n")
    with pytest.raises(ValueError, match="not a version-1 trajectory record"):
        lq.load_trajectories(path)


def test_stats_round_trip(tmp_path, solved_tiny):
    spec, solved = solved_tiny
    nm = NoiseModel(Sigma=0.02 * np.eye(spec.n))
    stats, _, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), nm, n_runs=3, resolver_config=FAST
    )
    path = tmp_path / "stats.json"
    lq.save_stats(stats, path)
    back = lq.load_stats(path)
    assert back == stats

    solo, _, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), None, n_runs=1, resolver_config=FAST
    )
    lq.save_stats(solo, path)
    back = lq.load_stats(path)
    assert back.ci_low is None and back.std_delta_cost is None


def test_stats_load_fails_closed(tmp_path):
    path = tmp_path / "stats.json"
    path.write_text('{"version": 5, "kind": "experiment_stats"}')
    with pytest.raises(ValueError, match="not a version-1 experiment_stats"):
        lq.load_stats(path)


def test_deltas_csv_round_trip(tmp_path, solved_tiny):
    spec, solved = solved_tiny
    _, records, _ = batch_experiment(
        solved, spec, np.zeros(spec.n), None, n_runs=2, resolver_config=FAST
    )
    path = tmp_path / "deltas.csv"
    lq.save_deltas_csv(records, path)
    back = lq.load_deltas_csv(path)
    assert back == [{k: r[k] for k in back[0]} for r in records]
    path.write_text("run,seed\n0,1\n")
    with pytest.raises(ValueError, match="unexpected delta CSV header"):
        lq.load_deltas_csv(path)


def test_trajectory_csv_layout(tmp_path, solved_tiny):
    spec, solved = solved_tiny
    traj = rollout(solved, spec, np.zeros(spec.n), seed=1)
    path = tmp_path / "trajectory.csv"
    lq.save_trajectory_csv(traj, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == spec.horizon + 2  # header + K+1 rows
    header = lines[0].split(",")
    assert header[0] == "k" and header[-1] == "branch"
    last = lines[-1].split(",")
    assert last[-1] == ""  # no action at the terminal step


def test_noise_round_trip(tmp_path, drone_sigma):
    nm = NoiseModel(Sigma=drone_sigma, seed=4)
    path = tmp_path / "noise.json"
    lq.save_noise(nm, path)
    back = lq.load_noise(path)
    assert np.array_equal(back.Sigma, nm.Sigma)
    assert back.seed == 4
    import json

    doc = json.loads(path.read_text())
    doc["kind"] = "something_else"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="not a version-1 noise_model"):
        lq.load_noise(path)
