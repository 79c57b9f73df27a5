"""Slow independent oracles for the verification suites and tests.

The production modules lean on closed-form Riccati algebra and eliminated
label optimizations.  Everything here recomputes the same quantities the dumb
way: objectives that are exactly quadratic get reconstructed by probing a
handful of points and solving one linear system, and the label optimizations
are posed as explicit LPs over full trees.  Agreement between the two routes
is the evidence that the fast route is right, so nothing in this module may
share solve code with the module it checks.

All tree enumerations are exponential in the horizon by construction; these
oracles are meant for K <= 2 cross-checks, not production use.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable

import numpy as np

from .dual import DualTree, cost_vector_coefficients
from .game import GameSpec
from .lp import small_lp_solve
from .riccati import QuadraticValue, evaluate_value
from .tree import SignalingPolicy

__all__ = [
    "quad_probe",
    "quadratic_stationary_value",
    "brute_force_root_value",
    "typewise_path_costs",
    "explicit_label_value",
    "one_node_label_lp",
    "finite_dual_value_exact",
    "direct_cost_vector",
    "support_grid",
]


def quad_probe(
    f: Callable[[np.ndarray], float], dim: int, h: float = 0.5
) -> tuple[np.ndarray, np.ndarray, float]:
    """Recover (M, b, c) of an exactly quadratic f(z) = c + b'z + z'Mz/2.

    Central differences at +-h give b and the diagonal, pair probes at
    h(e_i + e_j) the off-diagonal; all identities are exact for quadratics
    up to roundoff.
    """
    if h <= 0:
        raise ValueError("probe step h must be positive")
    c = float(f(np.zeros(dim)))
    fp = np.empty(dim)
    fm = np.empty(dim)
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = h
        fp[i] = f(e)
        fm[i] = f(-e)
    b = (fp - fm) / (2.0 * h)
    M = np.zeros((dim, dim))
    np.fill_diagonal(M, (fp - 2.0 * c + fm) / h**2)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros(dim)
            e[i] = h
            e[j] = h
            M[i, j] = M[j, i] = (float(f(e)) - fp[i] - fp[j] + c) / h**2
    return M, b, c


def quadratic_stationary_value(
    f: Callable[[np.ndarray], float], dim: int, h: float = 0.5
) -> tuple[float, np.ndarray]:
    """Value and location of the unique stationary point of a quadratic.

    For a saddle this is the saddle value; for a convex problem the minimum.
    Raises LinAlgError when the reconstructed Hessian is singular.
    """
    M, b, c = quad_probe(f, dim, h)
    z = np.linalg.solve(M, -b)
    return c + 0.5 * float(b @ z), z


# ---------------------------------------------------------------------------
# Signaling-tree commitment value, the flat way


def brute_force_root_value(
    policy: SignalingPolicy, spec: GameSpec, x0: np.ndarray
) -> float:
    """Commitment value at the root by one flat stationary-point solve.

    Stacks one (u, v) pair per tree edge, writes the reach-weighted cost over
    all branch words as a single quadratic in the stack, and reads the saddle
    value off the stationary point.  Every branch weight must be strictly
    positive so the stacked Hessian stays nonsingular.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    I = spec.num_types
    K = policy.horizon
    dyn = spec.dynamics
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    m1, m2 = spec.m1, spec.m2
    st = spec.stacked()

    # plain Bayes down the whole tree, no pruning floor
    post = [np.asarray(spec.prior, dtype=float)[None, :]]
    lam: list[np.ndarray] = []
    for k in range(K):
        p = post[k]
        a = policy.alpha[k]
        w = np.einsum("ni,nia->na", p, a)
        if np.min(w) <= 0.0:
            raise ValueError("oracle needs strictly positive branch weights")
        child = np.swapaxes(a * p[:, :, None] / w[:, None, :], 1, 2).reshape(-1, I)
        post.append(child)
        lam.append(w)

    stride = m1 + m2
    base = [0]
    for k in range(K):
        base.append(base[-1] + I ** (k + 1))
    dim = stride * base[-1]
    words = list(itertools.product(range(I), repeat=K))

    def total_cost(z: np.ndarray) -> float:
        total = 0.0
        for word in words:
            x = x0
            reach = 1.0
            cost = 0.0
            node = 0
            for k, a in enumerate(word):
                child = node * I + a
                slot = (base[k] + child) * stride
                u = z[slot : slot + m1]
                v = z[slot + m1 : slot + stride]
                pc = post[k + 1][child]
                Rbar = np.einsum("i,iuw->uw", pc, st["R"])
                Sbar = np.einsum("i,iuw->uw", pc, st["S"])
                cost += 0.5 * tau * (u @ Rbar @ u - v @ Sbar @ v)
                reach *= lam[k][node, a]
                x = A @ x + B1 @ u + B2 @ v
                node = child
            pl = post[K][node]
            cost += (
                0.5 * x @ np.einsum("i,iuw->uw", pl, st["Q"]) @ x
                + (pl @ st["q"]) @ x
                + float(pl @ st["c"])
            )
            total += reach * cost
        return total

    value, _ = quadratic_stationary_value(total_cost, dim)
    return value


# ---------------------------------------------------------------------------
# Label-game oracles on a fixed prototype tree


def typewise_path_costs(
    dual_tree: DualTree, spec: GameSpec, x: np.ndarray, type_index: int
) -> tuple[float, np.ndarray]:
    """One type's control problem on the fixed tree, solved flat.

    Returns (value, leaf_costs): the reach-weighted total, and the unweighted
    accumulated cost along each leaf word evaluated at the stacked stationary
    controls.  Branch weights must be strictly positive.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    dyn = spec.dynamics
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    m1 = spec.m1
    b = dual_tree.branching
    K = dual_tree.horizon
    t = spec.types[type_index]

    base = [0]
    for k in range(K):
        base.append(base[-1] + b ** (k + 1))
    dim = m1 * base[-1]
    words = list(itertools.product(range(b), repeat=K))

    reach = np.ones(1)
    for k in range(K):
        if np.min(dual_tree.lam[k]) <= 0.0:
            raise ValueError("oracle needs strictly positive branch weights")
        reach = (reach[:, None] * dual_tree.lam[k]).reshape(-1)

    def path_cost(z: np.ndarray, word: tuple[int, ...]) -> float:
        xk = x
        cost = 0.0
        node = 0
        for k, a in enumerate(word):
            child = node * b + a
            slot = (base[k] + child) * m1
            u = z[slot : slot + m1]
            v = dual_tree.v[k][node, a]
            cost += 0.5 * tau * (u @ t.R @ u - v @ t.S @ v)
            xk = A @ xk + B1 @ u + B2 @ v
            node = child
        return cost + 0.5 * xk @ t.Q @ xk + t.q @ xk + t.c

    def total(z: np.ndarray) -> float:
        return float(
            sum(w * path_cost(z, word) for w, word in zip(reach, words))
        )

    value, z_star = quadratic_stationary_value(total, dim)
    leaf_costs = np.array([path_cost(z_star, word) for word in words])
    return value, leaf_costs


def explicit_label_value(
    dual_tree: DualTree, spec: GameSpec, x: np.ndarray, p_hat: np.ndarray
) -> float:
    """Root label-game value by one explicit LP over the whole tree.

    The definitional form: free child labels at every node tied together by
    barycenter constraints, one epigraph scalar per leaf, leaf data from
    typewise_path_costs.  No elimination is performed anywhere.
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    I = spec.num_types
    b = dual_tree.branching
    K = dual_tree.horizon
    lam = dual_tree.lam

    D = np.stack(
        [typewise_path_costs(dual_tree, spec, x, i)[1] for i in range(I)]
    )  # (I, b^K)

    # variable layout: labels for depths 1..K in flat node order, then s per leaf
    label_base = {}
    off = 0
    for k in range(1, K + 1):
        label_base[k] = off
        off += (b**k) * I
    s_base = off
    nvar = off + b**K

    reach = np.ones(1)
    for k in range(K):
        reach = (reach[:, None] * lam[k]).reshape(-1)

    cvec = np.zeros(nvar)
    cvec[s_base:] = reach

    rows_eq = []
    rhs_eq = []
    for i in range(I):
        row = np.zeros(nvar)
        for a in range(b):
            row[label_base[1] + a * I + i] = lam[0][0, a]
        rows_eq.append(row)
        rhs_eq.append(p_hat[i])
    for k in range(1, K):
        for j in range(b**k):
            for i in range(I):
                row = np.zeros(nvar)
                row[label_base[k] + j * I + i] = -1.0
                for a in range(b):
                    row[label_base[k + 1] + (j * b + a) * I + i] = lam[k][j, a]
                rows_eq.append(row)
                rhs_eq.append(0.0)

    rows_ub = []
    rhs_ub = []
    for j in range(b**K):
        for i in range(I):
            row = np.zeros(nvar)
            row[label_base[K] + j * I + i] = 1.0
            row[s_base + j] = -1.0
            rows_ub.append(row)
            rhs_ub.append(D[i, j])

    sol = small_lp_solve(
        cvec,
        A_eq=np.array(rows_eq),
        b_eq=np.array(rhs_eq),
        A_ub=np.array(rows_ub),
        b_ub=np.array(rhs_ub),
        free_vars=tuple(range(nvar)),
    )
    return float(cvec @ sol.x)


def one_node_label_lp(
    p_hat: np.ndarray, lam: np.ndarray, costs: np.ndarray
) -> float:
    """Single-node child-label LP: inf over labels of the weighted epigraph max.

    costs[i, a] is the type-i cost of branch a.  The eliminated closed form
    predicts the value max_i(p_hat_i - (costs @ lam)_i).
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    I, b = costs.shape
    nvar = b * I + b  # labels then s
    cvec = np.zeros(nvar)
    cvec[b * I :] = lam
    A_eq = np.zeros((I, nvar))
    for i in range(I):
        for a in range(b):
            A_eq[i, a * I + i] = lam[a]
    rows_ub = []
    rhs_ub = []
    for a in range(b):
        for i in range(I):
            row = np.zeros(nvar)
            row[a * I + i] = 1.0
            row[b * I + a] = -1.0
            rows_ub.append(row)
            rhs_ub.append(costs[i, a])
    sol = small_lp_solve(
        cvec,
        A_eq=A_eq,
        b_eq=p_hat,
        A_ub=np.array(rows_ub),
        b_ub=np.array(rhs_ub),
        free_vars=tuple(range(nvar)),
    )
    return float(cvec @ sol.x)


def finite_dual_value_exact(p_hat: np.ndarray, costs: np.ndarray) -> float:
    """Exact max over the simplex of q'p_hat - max_a q'c^a, two types only.

    With q = (t, 1-t) the objective is piecewise linear in t; kinks happen
    where the candidate upper envelope switches lines, so evaluating every
    pairwise crossing plus the endpoints is exact.
    """
    p_hat = np.asarray(p_hat, dtype=float).reshape(-1)
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    if costs.shape[0] != 2:
        raise ValueError("breakpoint oracle handles exactly two types")
    d = costs[0] - costs[1]  # q'c^a = t*d_a + costs[1, a]
    ts = [0.0, 1.0]
    M = costs.shape[1]
    for a in range(M):
        for a2 in range(a + 1, M):
            dd = d[a] - d[a2]
            if abs(dd) > 1e-14:
                t = (costs[1, a2] - costs[1, a]) / dd
                if 0.0 < t < 1.0:
                    ts.append(float(t))
    best = -np.inf
    for t in ts:
        q = np.array([t, 1.0 - t])
        best = max(best, float(q @ p_hat) - float(np.max(q @ costs)))
    return best


# ---------------------------------------------------------------------------
# One-shot node problem oracles


def direct_cost_vector(
    x: np.ndarray,
    v: np.ndarray,
    continuations: list[QuadraticValue],
    spec: GameSpec,
) -> np.ndarray:
    """Per-type committed-v costs with the inner u-solve done by probing.

    Each type's objective is quadratic in u; reconstruct it, solve the
    stationary system, evaluate.  Cross-checks the closed coefficient route.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    dyn = spec.dynamics
    B1, tau = dyn.B1, dyn.tau
    base = dyn.A @ x + dyn.B2 @ v
    out = np.empty(spec.num_types)
    for i, cont in enumerate(continuations):
        t = spec.types[i]

        def inner(u: np.ndarray) -> float:
            xp = base + B1 @ u
            return 0.5 * tau * (u @ t.R @ u - v @ t.S @ v) + evaluate_value(cont, xp)

        out[i], _ = quadratic_stationary_value(inner, spec.m1)
    return out


def support_grid(
    q: np.ndarray,
    x: np.ndarray,
    continuations: list[QuadraticValue],
    spec: GameSpec,
    lo: float = -10.0,
    hi: float = 10.0,
    step: float = 1e-3,
) -> tuple[float, float]:
    """Dense scalar-v grid maximization of q'C(x; v).

    The candidate costs use the production quadratic coefficients (those are
    spot-checked separately by direct_cost_vector); the grid independently
    locates the maximizer and its value.
    """
    if spec.m2 != 1:
        raise ValueError("grid oracle handles scalar v only")
    q = np.asarray(q, dtype=float).reshape(-1)
    M, bvec, avec = cost_vector_coefficients(x, continuations, spec)
    num = int(round((hi - lo) / step)) + 1
    g = np.linspace(lo, hi, num)
    vals = q @ (
        0.5 * M[:, 0, 0, None] * g**2 + bvec[:, 0, None] * g + avec[:, None]
    )
    j = int(np.argmax(vals))
    return float(vals[j]), float(g[j])
