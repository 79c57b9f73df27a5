"""Spec model: discretization, validation, admissibility bounds, round-trips."""

import json

import numpy as np
import pytest

import lqsignal as lq
from lqsignal.game import (
    ContinuousDynamics,
    GameSpec,
    SpecFormatError,
    SpecValidationError,
    TypeData,
    discretize_dynamics,
    spec_from_document,
    _spec_document,
)


def test_discretize_double_integrator():
    # xdot = v, vdot = u: A = [[1, tau], [0, 1]] exactly, B picks up the
    # half-interval drift correction tau^2/2 in the position row
    cont = ContinuousDynamics(
        A_c=np.array([[0.0, 1.0], [0.0, 0.0]]),
        B1_c=np.array([[0.0], [1.0]]),
        B2_c=np.array([[0.0], [2.0]]),
    )
    dyn = discretize_dynamics(cont, tau=0.1)
    assert np.allclose(dyn.A, [[1.0, 0.1], [0.0, 1.0]])
    assert np.allclose(dyn.B1, [[0.005], [0.1]])
    assert np.allclose(dyn.B2, [[0.01], [0.2]])
    assert dyn.tau == 0.1


def test_discretize_rejects_bad_tau():
    cont = ContinuousDynamics(A_c=np.zeros((2, 2)), B1_c=np.eye(2), B2_c=np.eye(2))
    with pytest.raises(ValueError, match="tau must be positive"):
        discretize_dynamics(cont, tau=0.0)
    with pytest.raises(ValueError, match="tau must be positive"):
        discretize_dynamics(cont, tau=-0.5)


def test_discretize_rejects_shape_mismatch():
    cont = ContinuousDynamics(
        A_c=np.zeros((2, 3)), B1_c=np.zeros((2, 1)), B2_c=np.zeros((2, 1))
    )
    with pytest.raises(SpecValidationError, match="square"):
        discretize_dynamics(cont, tau=0.1)
    cont = ContinuousDynamics(
        A_c=np.zeros((2, 2)), B1_c=np.zeros((3, 1)), B2_c=np.zeros((2, 1))
    )
    with pytest.raises(SpecValidationError, match="B1_c"):
        discretize_dynamics(cont, tau=0.1)


def test_builtin_scenarios_validate(hexner, drone):
    for spec in (hexner, drone):
        report = lq.validate_game(spec)
        assert report.ok, report.violations
        assert spec.horizon == 10
        assert spec.dynamics.tau == pytest.approx(0.1)
        assert spec.num_types == 2
        assert np.allclose(np.sum(spec.prior), 1.0)


def _corrupt(spec, mutate):
    """Deep-ish copy through the document layer, then apply `mutate`."""
    doc = _spec_document(spec)
    fresh = spec_from_document(doc)
    mutate(fresh)
    return fresh


def test_validate_flags_indefinite_S(hexner):
    def mutate(s):
        s.types[0].S = np.zeros_like(s.types[0].S)

    report = lq.validate_game(_corrupt(hexner, mutate))
    assert any("S is not positive definite" in v for v in report.violations)


def test_validate_flags_asymmetric_R(hexner):
    def mutate(s):
        s.types[1].R = s.types[1].R + np.array([[0.0, 1e-6], [0.0, 0.0]])

    report = lq.validate_game(_corrupt(hexner, mutate))
    assert any("R is not symmetric" in v for v in report.violations)


def test_validate_flags_asymmetric_Q(hexner):
    def mutate(s):
        s.types[0].Q = s.types[0].Q.copy()
        s.types[0].Q[0, 1] += 1e-3

    report = lq.validate_game(_corrupt(hexner, mutate))
    assert any("Q is not symmetric" in v for v in report.violations)


def test_validate_flags_bad_prior(hexner):
    def mutate(s):
        s.prior = np.array([0.6, 0.6])

    report = lq.validate_game(_corrupt(hexner, mutate))
    assert any("prior sums to" in v for v in report.violations)

    def mutate2(s):
        s.prior = np.array([1.5, -0.5])

    report = lq.validate_game(_corrupt(hexner, mutate2))
    assert any("negative mass" in v for v in report.violations)

    def mutate3(s):
        s.prior = np.array([0.2, 0.3, 0.5])

    report = lq.validate_game(_corrupt(hexner, mutate3))
    assert any("3 entries for 2 types" in v for v in report.violations)


def test_validate_flags_shape_errors(hexner):
    def mutate(s):
        s.types[0].q = np.zeros(3)

    report = lq.validate_game(_corrupt(hexner, mutate))
    assert any("q has length 3" in v for v in report.violations)

    def mutate2(s):
        s.horizon = 0

    report = lq.validate_game(_corrupt(hexner, mutate2))
    assert any("horizon" in v for v in report.violations)


def test_size_caps():
    with pytest.raises(ValueError, match="exceeds the supported maximum"):
        GameSpec(
            dynamics=lq.DiscreteDynamics(np.eye(1), np.eye(1), np.eye(1), 0.1),
            types=[
                TypeData(R=np.eye(1), S=np.eye(1), Q=np.eye(1), q=np.zeros(1), c=0.0)
            ],
            horizon=17,
            prior=np.ones(1),
        )


def test_tau_star_bounds(hexner):
    # advisory bound: positive, capped at tau0, shrinks as the curvature
    # budget grows
    t1 = lq.tau_star(hexner, p_bar=1.0)
    t2 = lq.tau_star(hexner, p_bar=10.0)
    assert 0.0 < t2 <= t1 <= 1.0
    assert lq.tau_star(hexner, p_bar=1e-9) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="p_bar must be positive"):
        lq.tau_star(hexner, p_bar=0.0)


def test_tau_star_requires_continuous(hexner):
    spec = GameSpec(
        dynamics=hexner.dynamics,
        types=hexner.types,
        horizon=hexner.horizon,
        prior=hexner.prior,
        continuous=None,
    )
    with pytest.raises(ValueError, match="continuous"):
        lq.tau_star(spec, p_bar=1.0)


def test_separable_structure_holds_on_scenarios(hexner, drone):
    assert lq.separable_structure_check(hexner)
    assert lq.separable_structure_check(drone)


def test_separable_structure_rejects_coupling(hexner):
    def mutate(s):
        Q = s.types[0].Q.copy()
        Q[0, 4] = Q[4, 0] = 0.3  # cross term between the player blocks
        s.types[0].Q = Q

    assert not lq.separable_structure_check(_corrupt(hexner, mutate))


def test_spec_round_trip(tmp_path, drone):
    path = tmp_path / "spec.json"
    lq.save_spec(drone, path)
    back = lq.load_spec(path)
    assert lq.spec_sha256(back) == lq.spec_sha256(drone)
    assert np.array_equal(back.dynamics.A, drone.dynamics.A)
    assert np.array_equal(back.types[1].Q, drone.types[1].Q)
    assert back.horizon == drone.horizon


def test_load_spec_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"version": 1,,}')
    with pytest.raises(SpecFormatError, match="line 1"):
        lq.load_spec(path)


def test_load_spec_rejects_unknown_version(tmp_path, hexner):
    path = tmp_path / "spec.json"
    lq.save_spec(hexner, path)
    doc = json.loads(path.read_text())
    doc["version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(SpecFormatError, match="unsupported schema version"):
        lq.load_spec(path)


def test_load_spec_rejects_missing_field(tmp_path, hexner):
    path = tmp_path / "spec.json"
    lq.save_spec(hexner, path)
    doc = json.loads(path.read_text())
    del doc["prior"]
    path.write_text(json.dumps(doc))
    with pytest.raises(SpecFormatError, match="missing required field 'prior'"):
        lq.load_spec(path)


def test_load_spec_rejects_declared_size_mismatch(tmp_path, hexner):
    path = tmp_path / "spec.json"
    lq.save_spec(hexner, path)
    doc = json.loads(path.read_text())
    doc["n"] = 7
    path.write_text(json.dumps(doc))
    with pytest.raises(SpecFormatError, match="declared n=7"):
        lq.load_spec(path)


def test_load_spec_validate_flag(tmp_path, hexner):
    path = tmp_path / "spec.json"
    lq.save_spec(hexner, path)
    doc = json.loads(path.read_text())
    doc["prior"] = [0.7, 0.7]
    path.write_text(json.dumps(doc))
    with pytest.raises(SpecValidationError):
        lq.load_spec(path)
    spec = lq.load_spec(path, validate=False)
    assert np.allclose(spec.prior, [0.7, 0.7])


def test_spec_hash_sensitivity(hexner, drone):
    assert lq.spec_sha256(hexner) != lq.spec_sha256(drone)
    assert lq.spec_sha256(hexner) == lq.spec_sha256(lq.hexner_scenario())


def test_bundled_data_files_match_builders(hexner, drone):
    from lqsignal.data import data_path

    for name, spec in (("hexner", hexner), ("drone", drone)):
        shipped = lq.load_spec(data_path(f"{name}.json"))
        assert lq.spec_sha256(shipped) == lq.spec_sha256(spec)
