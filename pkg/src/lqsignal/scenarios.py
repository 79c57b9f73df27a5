"""Benchmark scenarios: two planar double integrators, one per player.

State layout is [p1x, p1y, v1x, v1y, p2x, p2y, v2x, v2y]; each player
accelerates their own integrator.  The minimizer privately knows which of two
terminal targets is live; both scenarios use horizon 10 at interval 0.1 with
a uniform prior.

`hexner_scenario`: targets (0, -1) and (0, +1), identical position weights.
The optimal behavior withholds the target roughly half the horizon, then
commits.

`drone_scenario`: landing zones (-1, -1) and (+1, +1) with type-dependent,
axis-skewed weights (type 1 homes on y, type 2 on x), and a maximizer whose
velocity channel the simulation harness perturbs with noise.
"""

from __future__ import annotations

import numpy as np

from .game import ContinuousDynamics, GameSpec, TypeData, discretize_dynamics
from .sim import NoiseModel

HORIZON = 10
TAU = 0.1


def _planar_double_integrators() -> ContinuousDynamics:
    A_p = np.zeros((4, 4))
    A_p[0, 2] = A_p[1, 3] = 1.0
    B_p = np.zeros((4, 2))
    B_p[2, 0] = B_p[3, 1] = 1.0
    A_c = np.block([[A_p, np.zeros((4, 4))], [np.zeros((4, 4)), A_p]])
    B1_c = np.vstack([B_p, np.zeros((4, 2))])
    B2_c = np.vstack([np.zeros((4, 2)), B_p])
    return ContinuousDynamics(A_c=A_c, B1_c=B1_c, B2_c=B2_c)


def _terminal_type(Q_tilde: np.ndarray, z: np.ndarray, theta: float,
                   R: np.ndarray, S: np.ndarray) -> TypeData:
    # (x1 - theta z)'Qt(x1 - theta z) - (x2 - theta z)'Qt(x2 - theta z)
    # expanded into the (1/2)x'Qx + q'x + c convention
    Q = 2.0 * np.block(
        [[Q_tilde, np.zeros((4, 4))], [np.zeros((4, 4)), -Q_tilde]]
    )
    q = 2.0 * np.concatenate([-theta * (Q_tilde @ z), theta * (Q_tilde @ z)])
    c = 0.0
    return TypeData(R=R, S=S, Q=Q, q=q, c=c)


def hexner_scenario() -> GameSpec:
    cont = _planar_double_integrators()
    dyn = discretize_dynamics(cont, TAU)
    Q_tilde = np.diag([1.0, 1.0, 0.0, 0.0])
    z = np.array([0.0, 1.0, 0.0, 0.0])
    R = np.diag([0.05, 0.025])
    S = np.diag([0.05, 0.1])
    types = [_terminal_type(Q_tilde, z, theta, R, S) for theta in (-1.0, 1.0)]
    return GameSpec(
        dynamics=dyn,
        types=types,
        horizon=HORIZON,
        prior=np.array([0.5, 0.5]),
        continuous=cont,
    )


def drone_scenario() -> GameSpec:
    cont = _planar_double_integrators()
    dyn = discretize_dynamics(cont, TAU)
    z = np.array([1.0, 1.0, 0.0, 0.0])
    R = np.diag([0.05, 0.025])
    S = np.diag([0.02, 0.04])
    Q_tildes = [np.diag([1.0, 20.0, 0.0, 0.0]), np.diag([20.0, 1.0, 0.0, 0.0])]
    types = [
        _terminal_type(Qt, z, theta, R, S)
        for Qt, theta in zip(Q_tildes, (-1.0, 1.0))
    ]
    return GameSpec(
        dynamics=dyn,
        types=types,
        horizon=HORIZON,
        prior=np.array([0.5, 0.5]),
        continuous=cont,
    )


def drone_noise() -> NoiseModel:
    """Per-step disturbance on the maximizer's velocity components."""
    sigma = np.zeros((8, 8))
    sigma[6, 6] = sigma[7, 7] = 0.25
    return NoiseModel(Sigma=sigma)
