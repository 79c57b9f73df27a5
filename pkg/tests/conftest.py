import numpy as np
import pytest

import lqsignal as lq
from lqsignal.verify import random_game, random_policy

# one line per acceptance gate, echoed after the test session so the
# measured numbers are visible even when capture is on
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hexner():
    return lq.hexner_scenario()


@pytest.fixture(scope="session")
def drone():
    return lq.drone_scenario()


@pytest.fixture(scope="session")
def drone_sigma():
    return lq.drone_noise().Sigma


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_game(rng):
    """Well-posed random instance, n=4, I=2, K=3."""
    return random_game(rng)


@pytest.fixture
def small_policy(rng, small_game):
    return random_policy(rng, small_game)


def tiny_game(seed: int = 0, n: int = 2, I: int = 2, K: int = 2):
    return random_game(np.random.default_rng(seed), n=n, I=I, K=K)


def scalar_v_instance(seed: int):
    """Random separable game with a scalar maximizer input.

    Scales are chosen so the one-shot node problem is strictly concave in v
    for every type and the maximizer stays well inside [-10, 10], which the
    dense-grid oracle needs.  Returns (spec, continuations, x, p_hat) with
    leaf continuations.
    """
    from lqsignal.game import ContinuousDynamics, GameSpec, TypeData, discretize_dynamics

    rng = np.random.default_rng(seed)
    tau = 0.1
    cont = ContinuousDynamics(
        A_c=np.diag(rng.uniform(-0.5, 0.5, size=2)),
        B1_c=np.array([[1.0], [0.0]]),
        B2_c=np.array([[0.0], [rng.uniform(0.5, 1.5)]]),
    )
    types = []
    for _ in range(2):
        types.append(
            TypeData(
                R=np.array([[1.0]]),
                S=np.array([[rng.uniform(0.5, 1.5)]]),
                Q=np.diag([rng.uniform(0.0, 2.0), -rng.uniform(0.0, 1.0)]),
                q=0.3 * rng.standard_normal(2),
                c=rng.standard_normal(),
            )
        )
    spec = GameSpec(
        dynamics=discretize_dynamics(cont, tau),
        types=types,
        horizon=2,
        prior=rng.dirichlet(np.array([5.0, 5.0])),
        continuous=cont,
    )
    continuations = [
        lq.QuadraticValue(P=t.Q, r=t.q, c=t.c) for t in spec.types
    ]
    x = np.clip(rng.standard_normal(2), -1.5, 1.5)
    p_hat = rng.standard_normal(2)
    return spec, continuations, x, p_hat
