"""Backward value recursion over the belief tree.

For a fixed signaling policy the continuation value at every tree node is an
exact quadratic V(x) = (1/2) x'P x + r'x + c.  Leaves average the type costs
under the leaf posterior.  Each branch solves a one-step saddle over the
stacked control w = (u, v) with curvature

    H = blkdiag(tau R_bar, -tau S_bar) + B' P+ B,   B = [B1 B2],

which is well posed iff H_uu > 0 and H_vv < 0; both are verified by Cholesky
at every branch.  Node values are the branch-weight average of branch values,
with pruned-branch weight redistributed over surviving siblings.

The intermediates (H^-1, B'P+A, B'r+) of every branch are retained on the
value tree: the policy-gradient sweep reuses them instead of re-deriving.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .game import DiscreteDynamics, GameSpec
from .tree import BeliefTree, NodeId


class WellPosednessError(RuntimeError):
    """One-step saddle curvature lost definiteness at some branch."""


@dataclass
class QuadraticValue:
    """V(x) = (1/2) x'P x + r'x + c."""

    P: np.ndarray
    r: np.ndarray
    c: float

    def __post_init__(self) -> None:
        self.P = np.asarray(self.P, dtype=float)
        self.r = np.asarray(self.r, dtype=float).reshape(-1)
        self.c = float(self.c)


def evaluate_value(value: QuadraticValue, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(0.5 * x @ value.P @ x + value.r @ x + value.c)


@dataclass
class EdgeSolution:
    """Saddle solution of one branch: affine feedback for both players."""

    K_u: np.ndarray
    kappa_u: np.ndarray
    K_v: np.ndarray
    kappa_v: np.ndarray
    H: np.ndarray
    value: QuadraticValue

    def controls(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(-1)
        return self.K_u @ x + self.kappa_u, self.K_v @ x + self.kappa_v


def leaf_value(posterior: np.ndarray, spec: GameSpec) -> QuadraticValue:
    """Terminal cost averaged under the leaf posterior."""
    st = spec.stacked()
    p = np.asarray(posterior, dtype=float).reshape(-1)
    return QuadraticValue(
        P=np.einsum("i,ijk->jk", p, st["Q"]),
        r=np.einsum("i,ij->j", p, st["q"]),
        c=float(p @ st["c"]),
    )


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _check_definite(H: np.ndarray, m1: int, depth: int | None = None) -> None:
    """Cholesky-verify H_uu > 0 and -H_vv > 0 for a batch of branches."""
    for sign, name, block in (
        (1.0, "H_uu", H[..., :m1, :m1]),
        (-1.0, "H_vv", H[..., m1:, m1:]),
    ):
        try:
            np.linalg.cholesky(sign * block)
        except np.linalg.LinAlgError:
            eigs = np.linalg.eigvalsh(sign * block)
            bad = int(np.argmin(eigs[..., 0]))
            where = f" at depth {depth}" if depth is not None else ""
            raise WellPosednessError(
                f"{name} lost definiteness{where} (branch row {bad}, "
                f"min eigenvalue {sign * eigs.reshape(-1, eigs.shape[-1])[bad, 0]:.3e});"
                " reduce tau or check the cost structure"
            ) from None


@dataclass
class _EdgeBatch:
    """All branch quantities at one depth, indexed by child node."""

    H: np.ndarray       # (E, m, m)
    Hinv: np.ndarray    # (E, m, m)
    G: np.ndarray       # (E, m, n)  B' P+ A
    g: np.ndarray       # (E, m)     B' r+
    K: np.ndarray       # (E, m, n)  stacked gains, -Hinv G
    kappa: np.ndarray   # (E, m)
    P: np.ndarray       # (E, n, n)  branch value coefficients
    r: np.ndarray       # (E, n)
    c: np.ndarray       # (E,)


def _solve_edges(
    P_next: np.ndarray,
    r_next: np.ndarray,
    c_next: np.ndarray,
    R_bar: np.ndarray,
    S_bar: np.ndarray,
    dyn: DiscreteDynamics,
    depth: int | None = None,
    Sigma: np.ndarray | None = None,
) -> _EdgeBatch:
    A, B1, B2, tau = dyn.A, dyn.B1, dyn.B2, dyn.tau
    m1, m2 = dyn.m1, dyn.m2
    B = np.concatenate([B1, B2], axis=1)
    E = P_next.shape[0]

    PA = P_next @ A
    G = B.T @ PA
    g = r_next @ B
    H = B.T @ (P_next @ B)
    H[:, :m1, :m1] += tau * R_bar
    H[:, m1:, m1:] -= tau * S_bar
    _check_definite(H, m1, depth)
    Hinv = np.linalg.inv(H)

    K = -(Hinv @ G)
    kappa = -np.einsum("eij,ej->ei", Hinv, g)
    Gt = np.swapaxes(G, 1, 2)
    P_edge = _sym(A.T @ PA + Gt @ K)
    r_edge = r_next @ A + np.einsum("eij,ej->ei", np.swapaxes(K, 1, 2), g)
    c_edge = c_next + 0.5 * np.einsum("ej,ej->e", g, kappa)
    if Sigma is not None:
        # zero-mean disturbance on the step: only the constant picks up the
        # expected quadratic cost; gains are certainty-equivalent
        c_edge = c_edge + 0.5 * np.einsum("eij,ij->e", P_next, Sigma)
    assert P_edge.shape == (E, dyn.n, dyn.n)
    return _EdgeBatch(H=H, Hinv=Hinv, G=G, g=g, K=K, kappa=kappa,
                      P=P_edge, r=r_edge, c=c_edge)


def solve_edge(
    child: QuadraticValue,
    R_bar: np.ndarray,
    S_bar: np.ndarray,
    dyn: DiscreteDynamics,
) -> EdgeSolution:
    """One-step saddle against a known continuation value."""
    batch = _solve_edges(
        child.P[None], child.r[None], np.array([child.c]),
        np.asarray(R_bar, dtype=float)[None], np.asarray(S_bar, dtype=float)[None],
        dyn,
    )
    m1 = dyn.m1
    return EdgeSolution(
        K_u=batch.K[0, :m1],
        kappa_u=batch.kappa[0, :m1],
        K_v=batch.K[0, m1:],
        kappa_v=batch.kappa[0, m1:],
        H=batch.H[0],
        value=QuadraticValue(P=batch.P[0], r=batch.r[0], c=float(batch.c[0])),
    )


def aggregate_node(
    branch_values: list[QuadraticValue], weights: np.ndarray
) -> QuadraticValue:
    """Weight-average branch values into a node value."""
    w = np.asarray(weights, dtype=float)
    P = _sym(sum(wi * v.P for wi, v in zip(w, branch_values)))
    r = sum(wi * v.r for wi, v in zip(w, branch_values))
    c = float(sum(wi * v.c for wi, v in zip(w, branch_values)))
    return QuadraticValue(P=P, r=r, c=c)


@dataclass
class ValueTree:
    """Node value coefficients and branch solutions for a whole belief tree.

    Node arrays are indexed like the belief tree; branch arrays at depth k are
    indexed by the child node at depth k+1.
    """

    spec: GameSpec
    P: list[np.ndarray]
    r: list[np.ndarray]
    c: list[np.ndarray]
    edges: list[_EdgeBatch]
    lam_norm: list[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.edges)

    @property
    def root(self) -> QuadraticValue:
        return QuadraticValue(P=self.P[0][0], r=self.r[0][0], c=float(self.c[0][0]))

    def node_value(self, node: NodeId) -> QuadraticValue:
        j = node.flat(self.spec.num_types)
        return QuadraticValue(
            P=self.P[node.k][j], r=self.r[node.k][j], c=float(self.c[node.k][j])
        )

    def edge_solution(self, node: NodeId, branch: int) -> EdgeSolution:
        m1 = self.spec.m1
        child = node.child(branch).flat(self.spec.num_types)
        e = self.edges[node.k]
        return EdgeSolution(
            K_u=e.K[child, :m1],
            kappa_u=e.kappa[child, :m1],
            K_v=e.K[child, m1:],
            kappa_v=e.kappa[child, m1:],
            H=e.H[child],
            value=QuadraticValue(P=e.P[child], r=e.r[child], c=float(e.c[child])),
        )


def backward_pass(
    tree: BeliefTree, spec: GameSpec, Sigma: np.ndarray | None = None
) -> ValueTree:
    """Solve every branch saddle from the leaves up to the root.

    With `Sigma` set, every step's continuation constant absorbs the expected
    disturbance cost 0.5*tr(P_child Sigma), i.e. the stochastic value of the
    same game; P, r and all gains are unchanged.
    """
    I = spec.num_types
    K = tree.horizon
    st = spec.stacked()
    dyn = spec.dynamics

    P = [None] * (K + 1)
    r = [None] * (K + 1)
    c = [None] * (K + 1)
    leaf_p = tree.beliefs[K]
    P[K] = np.einsum("ni,ijk->njk", leaf_p, st["Q"])
    r[K] = leaf_p @ st["q"]
    c[K] = leaf_p @ st["c"]

    edges: list[_EdgeBatch | None] = [None] * K
    for k in range(K - 1, -1, -1):
        post = tree.beliefs[k + 1]
        R_bar = np.einsum("ei,ijk->ejk", post, st["R"])
        S_bar = np.einsum("ei,ijk->ejk", post, st["S"])
        batch = _solve_edges(
            P[k + 1], r[k + 1], c[k + 1], R_bar, S_bar, dyn, depth=k, Sigma=Sigma
        )
        edges[k] = batch
        w = tree.lam_norm[k]
        n = dyn.n
        P[k] = _sym(np.einsum("na,naij->nij", w, batch.P.reshape(-1, I, n, n)))
        r[k] = np.einsum("na,nai->ni", w, batch.r.reshape(-1, I, n))
        c[k] = np.einsum("na,na->n", w, batch.c.reshape(-1, I))

    return ValueTree(
        spec=spec, P=P, r=r, c=c, edges=edges, lam_norm=list(tree.lam_norm)
    )


def complete_info_solve(
    spec: GameSpec, type_index: int
) -> tuple[list[QuadraticValue], list[EdgeSolution]]:
    """Value and gains when the maximizer knows the type outright.

    Plain two-player LQ recursion with the single type's costs; used as the
    full-information baseline.
    """
    t = spec.types[type_index]
    values = [QuadraticValue(P=t.Q, r=t.q, c=t.c)]
    gains: list[EdgeSolution] = []
    for _ in range(spec.horizon):
        sol = solve_edge(values[0], t.R, t.S, spec.dynamics)
        values.insert(0, sol.value)
        gains.insert(0, sol)
    return values, gains


def value_tree_to_document(vt: ValueTree, tree: BeliefTree) -> dict:
    """Diagnostic JSON: per-node coefficients and per-branch gains."""
    I = vt.spec.num_types
    m1 = vt.spec.m1
    nodes = []
    for k in range(vt.horizon + 1):
        for j in range(vt.P[k].shape[0]):
            nodes.append(
                {
                    "k": k,
                    "omega": NodeId.from_flat(k, j, I).label(),
                    "P": vt.P[k][j].tolist(),
                    "r": vt.r[k][j].tolist(),
                    "c": float(vt.c[k][j]),
                }
            )
    branches = []
    for k in range(vt.horizon):
        e = vt.edges[k]
        for child in range(e.K.shape[0]):
            branches.append(
                {
                    "k": k,
                    "child": NodeId.from_flat(k + 1, child, I).label(),
                    "pruned": bool(tree.pruned[k].reshape(-1)[child]),
                    "K_u": e.K[child, :m1].tolist(),
                    "kappa_u": e.kappa[child, :m1].tolist(),
                    "K_v": e.K[child, m1:].tolist(),
                    "kappa_v": e.kappa[child, m1:].tolist(),
                }
            )
    return {
        "version": 1,
        "root_value_at_zero": float(vt.c[0][0]),
        "nodes": nodes,
        "branches": branches,
    }


def save_value_tree(vt: ValueTree, tree: BeliefTree, path: str | Path) -> None:
    Path(path).write_text(json.dumps(value_tree_to_document(vt, tree)) + "\n")
