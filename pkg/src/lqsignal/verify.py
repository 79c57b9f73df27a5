"""Randomized cross-check suites pitting fast routines against slow oracles.

Each suite draws its own instances from a named seed, runs a production
routine and an independent slow oracle on the same data, and records the
worst discrepancy.  These back the `verify` CLI subcommand; the negative
control deliberately corrupts one gradient entry to prove the harness can
actually fail.

Suites:
  grad    adjoint gradient vs central finite differences
  saddle  tree backward pass vs the flat stationary-point oracle
  lp      weight LP vs exact two-type breakpoint enumeration
  thm1    eliminated dual evaluation vs the explicit child-label LP
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .backprop import grad_fd, tree_loss_grad
from .dual import DualTree, fixed_tree_dual_value, lambda_lp, typewise_backward_pass
from .game import DiscreteDynamics, GameSpec, TypeData
from .oracles import brute_force_root_value, explicit_label_value, finite_dual_value_exact
from .riccati import WellPosednessError, backward_pass, evaluate_value
from .tree import NodeId, SignalingPolicy, forward_bayes_pass

GRAD_TOL = 1e-6
SADDLE_TOL = 1e-8
LP_TOL = 1e-9
THM1_TOL = 1e-8


@dataclass
class SuiteResult:
    name: str
    passed: bool
    cases: int
    max_err: float
    tol: float
    seconds: float
    detail: dict = field(default_factory=dict)

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "max_err": self.max_err,
            "tol": self.tol,
            "seconds": self.seconds,
            "detail": self.detail,
        }


def random_game(
    rng: np.random.Generator, n: int = 4, I: int = 2, K: int = 3, tau: float = 0.1
) -> GameSpec:
    """Draw a random instance, rescaling the maximizer penalty until the
    branch saddles stay well posed for typical policies."""
    for s_scale in (8.0, 16.0, 32.0, 64.0, 128.0, 256.0):
        A = np.eye(n) + 0.1 * rng.standard_normal((n, n))
        B1 = 0.5 * rng.standard_normal((n, 2))
        B2 = 0.5 * rng.standard_normal((n, 2))
        dyn = DiscreteDynamics(A=A, B1=B1, B2=B2, tau=tau)
        types = []
        for _ in range(I):
            Gq = 0.4 * rng.standard_normal((n, n))
            Gs = rng.standard_normal((2, 2))
            types.append(
                TypeData(
                    R=np.eye(2) * (0.5 + rng.random()),
                    S=s_scale * (Gs @ Gs.T / 2 + np.eye(2)),
                    Q=Gq @ Gq.T,
                    q=0.3 * rng.standard_normal(n),
                    c=float(rng.random()),
                )
            )
        spec = GameSpec(
            dynamics=dyn,
            types=types,
            horizon=K,
            prior=rng.dirichlet(5.0 * np.ones(I)),
        )
        try:
            for _ in range(3):
                probe = random_policy(rng, spec)
                backward_pass(forward_bayes_pass(probe, spec.prior), spec)
            return spec
        except WellPosednessError:
            continue
    raise RuntimeError("could not draw a well-posed instance")


def random_policy(
    rng: np.random.Generator, spec: GameSpec, scale: float = 0.5
) -> SignalingPolicy:
    I, K = spec.num_types, spec.horizon
    return SignalingPolicy.from_logits(
        [scale * rng.standard_normal((I**k, I, I)) for k in range(K)]
    )


def random_dual_tree(
    rng: np.random.Generator, spec: GameSpec, horizon: int
) -> DualTree:
    """Random prototypes with strictly positive branch weights."""
    I = spec.num_types
    b = I + 1
    v = [0.5 * rng.standard_normal((b**k, b, spec.m2)) for k in range(horizon)]
    lam = [rng.dirichlet(5.0 * np.ones(b), size=b**k) for k in range(horizon)]
    return DualTree(num_types=I, m2=spec.m2, v=v, lam=lam)


def suite_grad(seed: int, inject_bug: bool = False) -> SuiteResult:
    """Hand adjoints against central differences on small random instances."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    detail: dict = {}
    cases = 10
    for case in range(cases):
        spec = random_game(rng, n=4, I=2, K=3)
        policy = random_policy(rng, spec)
        x0 = rng.standard_normal(spec.n)
        _, grads, _, _ = tree_loss_grad(policy, spec, x0)
        if inject_bug and case == 0:
            grads[0] = grads[0].copy()
            grads[0].reshape(-1)[0] += 1e-3
        fd = grad_fd(policy, x0, spec, h=1e-5)
        num = max(float(np.max(np.abs(g - f))) for g, f in zip(grads, fd))
        den = 1.0 + max(float(np.max(np.abs(f))) for f in fd)
        err = num / den
        if err > worst:
            worst = err
            if err > GRAD_TOL and not detail:
                detail = {"suite": "grad", "seed": seed, "case": case, "err": err}
    return SuiteResult(
        name="grad",
        passed=worst < GRAD_TOL,
        cases=cases,
        max_err=worst,
        tol=GRAD_TOL,
        seconds=time.perf_counter() - t0,
        detail=detail,
    )


def suite_saddle(seed: int, inject_bug: bool = False) -> SuiteResult:
    """Tree backward pass vs the flat all-edges stationary solve."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    detail: dict = {}
    cases = 0
    for K in (1, 2):
        for n in (2, 3, 4):
            for _ in range(2):
                spec = random_game(rng, n=n, I=2, K=K)
                policy = random_policy(rng, spec)
                x0 = rng.standard_normal(spec.n)
                tree = forward_bayes_pass(policy, spec.prior)
                vt = backward_pass(tree, spec)
                fast = evaluate_value(vt.root, x0)
                slow = brute_force_root_value(policy, spec, x0)
                err = abs(fast - slow) / (1.0 + abs(slow))
                cases += 1
                if err > worst:
                    worst = err
                    if err > SADDLE_TOL and not detail:
                        detail = {
                            "suite": "saddle", "seed": seed,
                            "K": K, "n": n, "case": cases - 1, "err": err,
                        }
    return SuiteResult(
        name="saddle",
        passed=worst < SADDLE_TOL,
        cases=cases,
        max_err=worst,
        tol=SADDLE_TOL,
        seconds=time.perf_counter() - t0,
        detail=detail,
    )


def suite_lp(seed: int, inject_bug: bool = False) -> SuiteResult:
    """Epigraph weight LP vs exact breakpoint enumeration, two types."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    detail: dict = {}
    cases = 100
    for case in range(cases):
        M = int(rng.integers(1, 7))
        costs = rng.standard_normal((2, M))
        p_hat = rng.standard_normal(2)
        fast = lambda_lp(p_hat, costs).value
        slow = finite_dual_value_exact(p_hat, costs)
        err = abs(fast - slow) / (1.0 + abs(slow))
        if err > worst:
            worst = err
            if err > LP_TOL and not detail:
                detail = {"suite": "lp", "seed": seed, "case": case, "err": err}
    return SuiteResult(
        name="lp",
        passed=worst < LP_TOL,
        cases=cases,
        max_err=worst,
        tol=LP_TOL,
        seconds=time.perf_counter() - t0,
        detail=detail,
    )


def suite_thm1(seed: int, inject_bug: bool = False) -> SuiteResult:
    """Eliminated dual evaluation vs the explicit child-label LP."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    detail: dict = {}
    cases = 50
    root = NodeId(k=0)
    for case in range(cases):
        if case % 10 == 0:
            spec = random_game(rng, n=3, I=2, K=2)
            dt = random_dual_tree(rng, spec, horizon=2)
            ct = typewise_backward_pass(dt, spec)
        x = rng.standard_normal(spec.n)
        p_hat = rng.standard_normal(2)
        fast = fixed_tree_dual_value(ct, root, x, p_hat).value
        slow = explicit_label_value(dt, spec, x, p_hat)
        err = abs(fast - slow) / (1.0 + abs(slow))
        if err > worst:
            worst = err
            if err > THM1_TOL and not detail:
                detail = {"suite": "thm1", "seed": seed, "case": case, "err": err}
    return SuiteResult(
        name="thm1",
        passed=worst < THM1_TOL,
        cases=cases,
        max_err=worst,
        tol=THM1_TOL,
        seconds=time.perf_counter() - t0,
        detail=detail,
    )


SUITES = {
    "grad": suite_grad,
    "saddle": suite_saddle,
    "lp": suite_lp,
    "thm1": suite_thm1,
}


def run_suites(
    names: list[str] | None = None,
    seed: int = 0,
    inject_bug: bool = False,
) -> list[SuiteResult]:
    """Run the named suites (all by default) on child seeds of `seed`."""
    if names is None:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    child_seed = {
        name: int(ss.generate_state(1)[0]) for name, ss in zip(SUITES, children)
    }
    return [SUITES[n](child_seed[n], inject_bug=inject_bug) for n in names]
