"""Exact policy gradient of the root value by reverse-mode sweeps.

The root value is a deterministic function of the branch logits: softmax ->
belief recursion -> branch saddles -> weighted aggregation.  Every step is a
small closed-form matrix operation, so the adjoints are derived by hand per
update instead of taping through an autodiff framework.  Two sweeps:

1. Value sweep (root to leaves): push adjoints of the node coefficients
   (P, r, c) through aggregation and through each branch solve, reusing the
   stored H^-1, B'P+A, B'r+.  This yields raw branch-weight adjoints and the
   belief adjoints induced by the posterior-averaged penalties R_bar, S_bar
   and the leaf averages.
2. Belief sweep (leaves to root): fold the posterior and weight adjoints back
   through Bayes' rule and the weight definition, finishing with the softmax
   Jacobian to land on the logits.

Key identities used for W = H^-1 (all inner products are Frobenius):

    d(G' W G) : Gbar += W G (Pbar + Pbar'),  Wbar += G Pbar G'
    d(G' W g) : Gbar += (W g) rbar',         Wbar += G rbar g'
    d(g' W g) : gbar += 2 cbar W g,          Wbar += cbar g g'
    dW = -W dH W  =>  Hbar = -W Wbar W

Branches below the weight floor are excluded from aggregation in the forward
pass; consistently, they receive zero weight adjoint and their posterior copy
passes the belief adjoint straight to the parent.
"""

from __future__ import annotations

import numpy as np

from .game import GameSpec
from .riccati import ValueTree, _sym, backward_pass, evaluate_value
from .tree import BeliefTree, SignalingPolicy, forward_bayes_pass, softmax_rows


def tree_loss(
    policy: SignalingPolicy,
    spec: GameSpec,
    x0: np.ndarray,
    sigma: np.ndarray | None = None,
) -> tuple[float, BeliefTree, ValueTree]:
    """Root value of the committed policy at x0 (forward passes only).

    `sigma` switches the objective to the stochastic value (per-step
    disturbance covariance folded into the constants).
    """
    tree = forward_bayes_pass(policy, spec.prior)
    vt = backward_pass(tree, spec, Sigma=sigma)
    return evaluate_value(vt.root, x0), tree, vt


def tree_loss_grad(
    policy: SignalingPolicy,
    spec: GameSpec,
    x0: np.ndarray,
    tree: BeliefTree | None = None,
    vt: ValueTree | None = None,
    sigma: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray], BeliefTree, ValueTree]:
    """Root value and its exact gradient with respect to the branch logits.

    Pass `tree` and `vt` to reuse forward passes already computed for this
    exact policy (e.g. by a line search); only the adjoint sweeps run then.
    `sigma` must match the value used to build `vt`.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if tree is None:
        tree = forward_bayes_pass(policy, spec.prior)
    if vt is None:
        vt = backward_pass(tree, spec, Sigma=sigma)
    loss = evaluate_value(vt.root, x0)

    I = spec.num_types
    K = tree.horizon
    n = spec.n
    m1 = spec.m1
    dyn = spec.dynamics
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    B = np.concatenate([B1, B2], axis=1)
    st = spec.stacked()

    # ---- sweep 1: value adjoints, root to leaves -------------------------
    Pb = _sym(0.5 * np.outer(x0, x0))[None, :, :]
    rb = x0[None, :]
    cb = np.ones(1)
    lam_bar_raw: list[np.ndarray] = []
    pbar: list[np.ndarray | None] = [None] * (K + 1)
    pbar[0] = np.zeros((1, I))

    for k in range(K):
        e = vt.edges[k]
        N = tree.beliefs[k].shape[0]
        w = tree.lam_norm[k]                      # (N, I)
        pruned = tree.pruned[k]
        PaR = e.P.reshape(N, I, n, n)
        raR = e.r.reshape(N, I, n)
        caR = e.c.reshape(N, I)

        # aggregation: node = sum_a w_a * branch_a
        lt_bar = (
            np.einsum("nij,naij->na", Pb, PaR)
            + np.einsum("ni,nai->na", rb, raR)
            + cb[:, None] * caR
        )
        surv = np.where(pruned, 0.0, tree.lam[k])
        s = np.sum(surv, axis=1)
        inner = np.einsum("na,na->n", w, lt_bar)
        lam_bar_raw.append(
            np.where(pruned, 0.0, (lt_bar - inner[:, None]) / s[:, None])
        )

        Pab = (w[:, :, None, None] * Pb[:, None]).reshape(N * I, n, n)
        rab = (w[:, :, None] * rb[:, None]).reshape(N * I, n)
        cab = (w * cb[:, None]).reshape(N * I)

        # branch solve: adjoints through P^a, r^a, c^a
        Gbar = e.K @ (2.0 * Pab) + np.einsum("ei,ej->eij", e.kappa, rab)
        gbar = np.einsum("eij,ej->ei", e.K, rab) + cab[:, None] * e.kappa
        Gr = np.einsum("eij,ej->ei", e.G, rab)
        Wbar = -(
            e.G @ Pab @ np.swapaxes(e.G, 1, 2)
            + np.einsum("ei,ej->eij", Gr, e.g)
            + 0.5 * cab[:, None, None] * np.einsum("ei,ej->eij", e.g, e.g)
        )
        Hbar = -(e.Hinv @ Wbar @ e.Hinv)

        Pb = _sym(A @ Pab @ A.T + B @ Gbar @ A.T + B @ Hbar @ B.T)
        if sigma is not None:
            # stochastic constant 0.5*tr(P_child sigma) pulls on the child P
            Pb = Pb + 0.5 * cab[:, None, None] * sigma[None]
        rb = np.einsum("ij,ej->ei", A, rab) + np.einsum("ij,ej->ei", B, gbar)
        cb = cab

        Rbar_adj = tau * Hbar[:, :m1, :m1]
        Sbar_adj = -tau * Hbar[:, m1:, m1:]
        pbar[k + 1] = np.einsum("euv,iuv->ei", Rbar_adj, st["R"]) + np.einsum(
            "euv,iuv->ei", Sbar_adj, st["S"]
        )

    # leaf averages
    pbar[K] += (
        np.einsum("njk,ijk->ni", Pb, st["Q"])
        + rb @ st["q"].T
        + cb[:, None] * st["c"][None, :]
    )

    # ---- sweep 2: belief adjoints, leaves to root ------------------------
    grads: list[np.ndarray | None] = [None] * K
    for k in range(K - 1, -1, -1):
        N = tree.beliefs[k].shape[0]
        alpha = policy.alpha[k]                   # (N, i, a)
        lam = tree.lam[k]
        pruned = tree.pruned[k]
        p = tree.beliefs[k]
        pcv = tree.beliefs[k + 1].reshape(N, I, I)    # (n, branch, type)
        pbc = pbar[k + 1].reshape(N, I, I)

        lam_safe = np.where(pruned, 1.0, lam)
        bayes_lam = -np.einsum("nai,nai->na", pbc, pcv) / lam_safe
        lam_tot = lam_bar_raw[k] + np.where(pruned, 0.0, bayes_lam)

        live = np.where(pruned, 0.0, 1.0 / lam_safe)  # (n, a)
        pbc_ia = np.swapaxes(pbc, 1, 2)               # (n, type, branch)
        alpha_bar = pbc_ia * p[:, :, None] * live[:, None, :] + lam_tot[
            :, None, :
        ] * p[:, :, None]

        pb_here = (
            np.einsum("nia,nia->ni", pbc_ia * live[:, None, :], alpha)
            + np.einsum("na,nia->ni", lam_tot, alpha)
            + np.einsum("nai,na->ni", pbc, np.where(pruned, 1.0, 0.0))
        )
        pbar[k] += pb_here

        dot = np.einsum("nia,nia->ni", alpha_bar, alpha)
        grads[k] = alpha * (alpha_bar - dot[:, :, None])

    return loss, grads, tree, vt


def loss(policy: SignalingPolicy, x0: np.ndarray, spec: GameSpec) -> float:
    """Root value of the committed policy at x0."""
    value, _, _ = tree_loss(policy, spec, x0)
    return value


def grad_loss(
    policy: SignalingPolicy, x0: np.ndarray, spec: GameSpec
) -> list[np.ndarray]:
    """Exact reverse-mode gradient of loss with respect to the logits."""
    _, grads, _, _ = tree_loss_grad(policy, spec, x0)
    return grads


def grad_fd(
    policy: SignalingPolicy,
    x0: np.ndarray,
    spec: GameSpec,
    h: float = 1e-5,
    sigma: np.ndarray | None = None,
) -> list[np.ndarray]:
    """Central-difference gradient; the independent check for the sweeps."""
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    grads = []
    for k, L in enumerate(policy.logits):
        g = np.zeros_like(L)
        flat = L.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            for sign in (+1.0, -1.0):
                bumped = [M.copy() for M in policy.logits]
                bumped[k].reshape(-1)[idx] += sign * h
                val, _, _ = tree_loss(
                    SignalingPolicy(
                        logits=bumped, alpha=[softmax_rows(M) for M in bumped]
                    ),
                    spec,
                    x0,
                    sigma=sigma,
                )
                gflat[idx] += sign * val
        grads.append(g / (2.0 * h))
    return grads
