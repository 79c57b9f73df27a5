"""Dual-side machinery: typewise cost recursions on a fixed maximizer tree.

The maximizer's side of the game works with a vector of per-type budgets
("labels") instead of a belief.  Against a fixed tree of maximizer prototypes
v and branch weights lam, the label optimization collapses: the dual value at
a node is max_i { p_hat_i - J_i(x) } where each J_i solves an ordinary
one-player LQ recursion for type i along the tree.  This module implements

  * typewise_backward_pass: the per-type recursions (quadratic closure),
  * fixed_tree_dual_value: the max-form evaluation with tie reporting,
  * lambda_lp: the finite-candidate weight LP in epigraph form,
  * deterministic_cost_vector / support_function: the one-shot node problem
    where the maximizer commits a single deterministic v,
  * dual_node_value: concave maximization of q'p_hat - sigma(q) over the
    simplex (golden section for two types, projected gradient above),
  * column_generation: master LP over a growing candidate set with
    support-function pricing.

Branch alphabets have I+1 symbols by default (one more than types), matching
the revelation structure the label game needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import GameSpec
from .lp import small_lp_solve
from .riccati import QuadraticValue, evaluate_value
from .tree import NodeId

TIE_TOL = 1e-12
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class IndefiniteSupportError(RuntimeError):
    """Mixed curvature M(q) failed to be negative definite."""


class TypewiseCurvatureError(RuntimeError):
    """tau R_i + B1' P+ B1 lost positive definiteness for some type."""


@dataclass
class DualTree:
    """Fixed prototypes and branch weights, one (I+1)-ary level per step.

    v[k] has shape (N_k, b, m2) and lam[k] shape (N_k, b) with N_k = b^k.
    """

    num_types: int
    m2: int
    v: list[np.ndarray]
    lam: list[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.v)

    @property
    def branching(self) -> int:
        return self.v[0].shape[1] if self.v else self.num_types + 1

    @staticmethod
    def uniform(spec: GameSpec, horizon: int | None = None) -> "DualTree":
        """Zero prototypes, uniform weights, alphabet of I+1 symbols."""
        I = spec.num_types
        b = I + 1
        K = spec.horizon if horizon is None else horizon
        v = [np.zeros((b**k, b, spec.m2)) for k in range(K)]
        lam = [np.full((b**k, b), 1.0 / b) for k in range(K)]
        return DualTree(num_types=I, m2=spec.m2, v=v, lam=lam)


@dataclass
class TypewiseCostTree:
    """Per-type quadratic continuation costs J_i on every dual-tree node.

    Besides the node costs J, the per-edge branch costs C (stage against the
    committed prototype plus continuation, u already minimized out) are kept so
    that J at a node is recoverable as the lam-weighted sum of its edge C's.
    """

    spec: GameSpec
    branching: int
    P: list[np.ndarray]  # P[k]: (I, N_k, n, n)
    r: list[np.ndarray]
    c: list[np.ndarray]
    C_P: list[np.ndarray]  # C_P[k]: (I, E_k, n, n), child-indexed edge costs
    C_r: list[np.ndarray]
    C_c: list[np.ndarray]
    K_u: list[np.ndarray]  # K_u[k]: (I, E_k, m1, n), child-indexed
    kappa_u: list[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.K_u)

    def node_cost(self, type_index: int, node: NodeId) -> QuadraticValue:
        j = node.flat(self.branching)
        return QuadraticValue(
            P=self.P[node.k][type_index, j],
            r=self.r[node.k][type_index, j],
            c=float(self.c[node.k][type_index, j]),
        )

    def edge_cost(self, type_index: int, node: NodeId, branch: int) -> QuadraticValue:
        e = node.flat(self.branching) * self.branching + branch
        return QuadraticValue(
            P=self.C_P[node.k][type_index, e],
            r=self.C_r[node.k][type_index, e],
            c=float(self.C_c[node.k][type_index, e]),
        )

    def continuations(self, node: NodeId) -> list[QuadraticValue]:
        return [self.node_cost(i, node) for i in range(self.spec.num_types)]


def typewise_backward_pass(dual_tree: DualTree, spec: GameSpec) -> TypewiseCostTree:
    """Solve the per-type minimizer recursions against the fixed tree.

    Types never couple: each J_i is an independent LQ backward pass in which
    the maximizer input is pinned to the tree prototypes.
    """
    I = spec.num_types
    b = dual_tree.branching
    K = dual_tree.horizon
    dyn = spec.dynamics
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    n = dyn.n
    st = spec.stacked()

    num_leaves = b**K
    P = [None] * (K + 1)
    r = [None] * (K + 1)
    c = [None] * (K + 1)
    P[K] = np.broadcast_to(st["Q"][:, None], (I, num_leaves, n, n)).copy()
    r[K] = np.broadcast_to(st["q"][:, None], (I, num_leaves, n)).copy()
    c[K] = np.broadcast_to(st["c"][:, None], (I, num_leaves)).copy()
    K_u: list[np.ndarray | None] = [None] * K
    kappa_u: list[np.ndarray | None] = [None] * K
    C_P: list[np.ndarray | None] = [None] * K
    C_r: list[np.ndarray | None] = [None] * K
    C_c: list[np.ndarray | None] = [None] * K

    for k in range(K - 1, -1, -1):
        v = dual_tree.v[k].reshape(-1, spec.m2)  # (E, m2), child-indexed
        Pp, rp, cp = P[k + 1], r[k + 1], c[k + 1]
        Bv = v @ B2.T  # (E, n): B2 v
        PA = Pp @ A
        PBv = np.einsum("ienm,em->ien", Pp, Bv)
        e_vec = PBv + rp  # P+ B2 v + r+
        H = tau * st["R"][:, None] + np.einsum("nu,ienm,mw->ieuw", B1, Pp, B1)
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise TypewiseCurvatureError(
                f"tau R_i + B1' P+ B1 not positive definite at depth {k}"
            ) from None
        W = np.linalg.inv(H)
        G1 = np.einsum("nu,ienm->ieum", B1, PA)  # B1' P+ A
        d0 = np.einsum("nu,ien->ieu", B1, e_vec)  # B1' (P+ B2 v + r+)
        Ku = -np.einsum("ieuw,iewm->ieum", W, G1)
        ku = -np.einsum("ieuw,iew->ieu", W, d0)
        K_u[k] = Ku
        kappa_u[k] = ku

        Pi = np.einsum("nm,ienw->iemw", A, PA) + np.einsum("ieum,ieuw->iemw", G1, Ku)
        Pi = 0.5 * (Pi + np.swapaxes(Pi, -1, -2))
        rho = np.einsum("nm,ien->iem", A, e_vec) + np.einsum("ieum,ieu->iem", G1, ku)
        gamma = (
            -0.5 * tau * np.einsum("eu,iuw,ew->ie", v, st["S"], v)
            + 0.5 * np.einsum("en,ien->ie", Bv, PBv)
            + np.einsum("ien,en->ie", rp, Bv)
            + cp
            + 0.5 * np.einsum("ieu,ieu->ie", d0, ku)
        )

        C_P[k] = Pi
        C_r[k] = rho
        C_c[k] = gamma

        N = v.shape[0] // b
        lamk = dual_tree.lam[k]  # (N, b)
        P[k] = np.einsum("na,inauw->inuw", lamk, Pi.reshape(I, N, b, n, n))
        r[k] = np.einsum("na,inau->inu", lamk, rho.reshape(I, N, b, n))
        c[k] = np.einsum("na,ina->in", lamk, gamma.reshape(I, N, b))

    return TypewiseCostTree(
        spec=spec, branching=b, P=P, r=r, c=c,
        C_P=C_P, C_r=C_r, C_c=C_c, K_u=K_u, kappa_u=kappa_u,
    )


@dataclass
class DualNodeEvaluation:
    value: float
    argmax: int
    active: list[int]


def fixed_tree_dual_value(
    cost_tree: TypewiseCostTree, node: NodeId, x: np.ndarray, p_hat: np.ndarray
) -> DualNodeEvaluation:
    """max_i { p_hat_i - J_i(x) } at a tree node; ties go to the smallest i."""
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    vals = np.array(
        [
            p_hat[i] - evaluate_value(cost_tree.node_cost(i, node), x)
            for i in range(cost_tree.spec.num_types)
        ]
    )
    best = float(np.max(vals))
    active = [i for i in range(vals.size) if vals[i] >= best - TIE_TOL * (1 + abs(best))]
    return DualNodeEvaluation(value=best, argmax=active[0], active=active)


@dataclass
class LambdaLPResult:
    lam: np.ndarray
    value: float
    q: np.ndarray  # optimal dual point on the type simplex


def lambda_lp(p_hat: np.ndarray, costs: np.ndarray) -> LambdaLPResult:
    """min over weights lam in the simplex of max_i (p_hat_i - (costs lam)_i).

    `costs` is I x M: one column of per-type costs per candidate.  Solved in
    epigraph form; the returned q is the dual optimum over types, which
    satisfies value = q'p_hat - max_a q'costs[:, a] (strong duality).
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    I, M = costs.shape
    if p_hat.size != I:
        raise ValueError(f"p_hat has {p_hat.size} entries for {I} cost rows")
    # variables: (lam_1..lam_M, s); rows: -costs[i]·lam - s <= -p_hat_i
    c = np.zeros(M + 1)
    c[M] = 1.0
    A_ub = np.hstack([-costs, -np.ones((I, 1))])
    b_ub = -p_hat
    A_eq = np.zeros((1, M + 1))
    A_eq[0, :M] = 1.0
    sol = small_lp_solve(c, A_eq=A_eq, b_eq=[1.0], A_ub=A_ub, b_ub=b_ub,
                         free_vars=(M,))
    lam = sol.x[:M]
    value = float(sol.x[M])
    q = -sol.duals_ub
    # internal consistency: duality gap and complementary slackness
    gap = abs(value - (sol.duals_ub @ b_ub + float(sol.duals_eq[0])))
    if gap > 1e-9 * (1 + abs(value)):
        raise RuntimeError(f"duality gap {gap:.2e} exceeds tolerance")
    slack = A_ub @ sol.x - b_ub
    comp = np.max(np.abs(q * slack))
    if comp > 1e-9 * (1 + abs(value)):
        raise RuntimeError(f"complementary slackness residual {comp:.2e}")
    return LambdaLPResult(lam=lam, value=value, q=q)


# ---------------------------------------------------------------------------
# One-shot node problem: the maximizer commits a single deterministic v


def cost_vector_coefficients(
    x: np.ndarray, continuations: list[QuadraticValue], spec: GameSpec
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-type quadratics C_i(x; v) = (1/2) v'M_i v + b_i'v + a_i.

    The minimizer's best response to the committed v is already folded in
    via the type-i inner solve.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    dyn = spec.dynamics
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    I = spec.num_types
    m2 = spec.m2
    M = np.empty((I, m2, m2))
    bvec = np.empty((I, m2))
    avec = np.empty(I)
    Ax = A @ x
    for i, cont in enumerate(continuations):
        t = spec.types[i]
        Pp, rp, cp = cont.P, cont.r, cont.c
        H = tau * t.R + B1.T @ Pp @ B1
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise TypewiseCurvatureError(
                f"tau R + B1' P+ B1 not positive definite for type {i}"
            ) from None
        W = np.linalg.inv(H)
        T = B1.T @ Pp @ B2  # m1 x m2
        e = Pp @ Ax + rp
        d = B1.T @ e
        M[i] = -tau * t.S + B2.T @ Pp @ B2 - T.T @ W @ T
        M[i] = 0.5 * (M[i] + M[i].T)
        bvec[i] = B2.T @ e - T.T @ (W @ d)
        avec[i] = 0.5 * Ax @ Pp @ Ax + rp @ Ax + cp - 0.5 * d @ W @ d
    return M, bvec, avec


def deterministic_cost_vector(
    x: np.ndarray, v: np.ndarray, continuations: list[QuadraticValue], spec: GameSpec
) -> np.ndarray:
    """Evaluate the per-type costs of committing v at state x."""
    v = np.asarray(v, dtype=float).reshape(-1)
    M, bvec, avec = cost_vector_coefficients(x, continuations, spec)
    return 0.5 * np.einsum("u,iuw,w->i", v, M, v) + bvec @ v + avec


def support_function(
    q: np.ndarray,
    x: np.ndarray,
    continuations: list[QuadraticValue],
    spec: GameSpec,
) -> tuple[float, np.ndarray]:
    """sigma(q) = sup_v q'C(x; v) with its maximizer, when M(q) < 0."""
    q = np.asarray(q, dtype=float).reshape(-1)
    M, bvec, avec = cost_vector_coefficients(x, continuations, spec)
    Mq = np.einsum("i,iuw->uw", q, M)
    bq = q @ bvec
    aq = float(q @ avec)
    try:
        np.linalg.cholesky(-Mq)
    except np.linalg.LinAlgError:
        raise IndefiniteSupportError(
            "mixed curvature M(q) is not negative definite"
        ) from None
    v_star = -np.linalg.solve(Mq, bq)
    return aq + 0.5 * float(bq @ v_star), v_star


def _project_simplex(y: np.ndarray) -> np.ndarray:
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, y.size + 1) > css)[0][-1]
    return np.maximum(y - css[rho] / (rho + 1.0), 0.0)


def dual_node_value(
    x: np.ndarray,
    p_hat: np.ndarray,
    continuations: list[QuadraticValue],
    spec: GameSpec,
    tol: float = 1e-10,
    restarts: int = 20,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """max over q in the type simplex of q'p_hat - sigma(q).

    Concave in q on the feasible region {M(q) < 0}; infeasible q count as
    -inf.  Two types reduce to a scalar golden-section search; more types use
    projected gradient ascent from seeded restarts (the gradient is
    p_hat - C(x; v*(q)) by the envelope identity).  Raises
    IndefiniteSupportError when no feasible q is found at all.
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    I = spec.num_types
    Mcoef, bcoef, acoef = cost_vector_coefficients(x, continuations, spec)

    def psi(q: np.ndarray) -> tuple[float, np.ndarray | None]:
        Mq = np.einsum("i,iuw->uw", q, Mcoef)
        try:
            np.linalg.cholesky(-Mq)
        except np.linalg.LinAlgError:
            return -np.inf, None
        bq = q @ bcoef
        v_star = -np.linalg.solve(Mq, bq)
        sigma = float(q @ acoef) + 0.5 * float(bq @ v_star)
        return float(q @ p_hat) - sigma, v_star

    if I == 1:
        val, v_star = psi(np.ones(1))
        if not np.isfinite(val):
            raise IndefiniteSupportError("type curvature not negative definite")
        return val, np.ones(1)

    if I == 2:
        f = lambda t: psi(np.array([t, 1.0 - t]))[0]
        # coarse scan brackets the feasible interval before golden section;
        # psi is concave there, -inf outside
        grid = np.linspace(0.0, 1.0, 65)
        fg = np.array([f(t) for t in grid])
        if not np.any(np.isfinite(fg)):
            raise IndefiniteSupportError("no feasible q on the simplex edge")
        j = int(np.argmax(fg))
        lo = grid[max(j - 1, 0)]
        hi = grid[min(j + 1, grid.size - 1)]
        t1 = hi - GOLDEN * (hi - lo)
        t2 = lo + GOLDEN * (hi - lo)
        f1, f2 = f(t1), f(t2)
        while hi - lo > tol:
            if f1 < f2:
                lo, t1, f1 = t1, t2, f2
                t2 = lo + GOLDEN * (hi - lo)
                f2 = f(t2)
            else:
                hi, t2, f2 = t2, t1, f1
                t1 = hi - GOLDEN * (hi - lo)
                f1 = f(t1)
        best_t, best_val = grid[j], fg[j]
        for cand in (0.5 * (lo + hi), lo, hi, t1, t2):
            val = f(cand)
            if val > best_val:
                best_t, best_val = cand, val
        return float(best_val), np.array([best_t, 1.0 - best_t])

    rng = np.random.default_rng(seed)
    best_val, best_q = -np.inf, None
    for trial in range(restarts):
        q = np.full(I, 1.0 / I) if trial == 0 else rng.dirichlet(np.ones(I))
        val, v_star = psi(q)
        if not np.isfinite(val):
            continue
        step = 0.1
        for _ in range(500):
            grad = p_hat - (
                0.5 * np.einsum("u,iuw,w->i", v_star, Mcoef, v_star)
                + bcoef @ v_star
                + acoef
            )
            cand = _project_simplex(q + step * grad)
            cand_val, cand_v = psi(cand)
            if cand_val > val:
                q, val, v_star = cand, cand_val, cand_v
                step = min(step * 1.5, 1.0)
            else:
                step *= 0.5
                if step < 1e-14:
                    break
        if val > best_val:
            best_val, best_q = val, q
    if best_q is None:
        raise IndefiniteSupportError("no feasible q found over all restarts")
    return float(best_val), best_q


@dataclass
class ColumnGenResult:
    value: float
    lam: np.ndarray
    candidates: np.ndarray  # (M, m2)
    costs: np.ndarray  # (I, M)
    q: np.ndarray
    converged: bool
    pricing_failed: bool
    added: int
    history: list[float] = field(default_factory=list)  # master value per round


def column_generation(
    x: np.ndarray,
    p_hat: np.ndarray,
    continuations: list[QuadraticValue],
    spec: GameSpec,
    initial_candidates: list[np.ndarray] | None = None,
    max_cols: int = 25,
    tol: float = 1e-8,
) -> ColumnGenResult:
    """Grow the candidate set with support-function pricing until optimal.

    The master value never increases across rounds; termination is declared
    when pricing at the master's dual optimum improves on the finite-set
    support by less than `tol`.  `max_cols` caps the total number of columns
    ever considered (initial plus priced).  Before a new column is admitted,
    candidates the master left at zero weight are dropped: the incumbent
    mixture stays feasible, so the value sequence is still monotone, and the
    working set stays as small as the optimal mixture's support.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    if initial_candidates is None:
        initial_candidates = [np.zeros(spec.m2)]
    cands = [np.asarray(v, dtype=float).reshape(-1) for v in initial_candidates]
    cols = [deterministic_cost_vector(x, v, continuations, spec) for v in cands]
    added = 0
    pricing_failed = False
    converged = False
    history: list[float] = []
    while True:
        costs = np.stack(cols, axis=1)
        master = lambda_lp(p_hat, costs)
        history.append(master.value)
        try:
            sigma, v_star = support_function(master.q, x, continuations, spec)
        except IndefiniteSupportError:
            pricing_failed = True
            break
        incumbent = float(np.max(master.q @ costs))
        if sigma - incumbent < tol:
            converged = True
            break
        if len(initial_candidates) + added >= max_cols:
            break
        keep = master.lam > 1e-12
        if not keep.all():
            cands = [v for v, k in zip(cands, keep) if k]
            cols = [c for c, k in zip(cols, keep) if k]
        cands.append(v_star)
        cols.append(deterministic_cost_vector(x, v_star, continuations, spec))
        added += 1
    return ColumnGenResult(
        value=master.value,
        lam=master.lam,
        candidates=np.stack(cands),
        costs=np.stack(cols, axis=1),
        q=master.q,
        converged=converged,
        pricing_failed=pricing_failed,
        added=added,
        history=history,
    )


# ---------------------------------------------------------------------------
# Dual-tree file round-tripping


def dual_tree_to_document(tree: DualTree) -> dict:
    return {
        "version": 1,
        "num_types": tree.num_types,
        "m2": tree.m2,
        "horizon": tree.horizon,
        "branching": tree.branching,
        "levels": [
            {"v": tree.v[k].tolist(), "lambda": tree.lam[k].tolist()}
            for k in range(tree.horizon)
        ],
    }


def save_dual_tree(tree: DualTree, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dual_tree_to_document(tree)) + "\n")


def load_dual_tree(path: str | Path) -> DualTree:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported dual-tree schema version")
    v = [np.asarray(level["v"], dtype=float) for level in doc["levels"]]
    lam = [np.asarray(level["lambda"], dtype=float) for level in doc["levels"]]
    return DualTree(num_types=int(doc["num_types"]), m2=int(doc["m2"]), v=v, lam=lam)
