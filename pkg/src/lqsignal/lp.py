"""Dense two-phase simplex for the small LPs arising at dual-tree nodes.

Problems here have a handful of rows (at most the number of types plus two in
routine use), so a textbook tableau method with Bland's rule is plenty and
keeps the solver dependency-free.  Variables are nonnegative unless listed in
`free_vars` (those are split internally).

Dual multipliers are returned in the convention y = c_B' B^-1: inequality
rows of a minimization get y_ub <= 0, and strong duality reads
c'x* = y_ub'b_ub + y_eq'b_eq.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class LPInfeasibleError(RuntimeError):
    """No point satisfies the constraints."""


class LPUnboundedError(RuntimeError):
    """The objective decreases without bound."""


@dataclass
class LPSolution:
    x: np.ndarray
    value: float
    duals_ub: np.ndarray
    duals_eq: np.ndarray


def _simplex(c: np.ndarray, A: np.ndarray, b: np.ndarray, basis: list[int]):
    """Phase-2 simplex on min c'x, Ax = b, x >= 0 from a feasible basis."""
    m, n = A.shape
    basis = list(basis)
    for _ in range(20000):
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        entering = -1
        for j in range(n):
            if j not in basis and reduced[j] < -PIVOT_TOL:
                entering = j
                break  # Bland's rule: smallest eligible index
        if entering < 0:
            x = np.zeros(n)
            x[basis] = xB
            return x, basis, y
        d = np.linalg.solve(B, A[:, entering])
        ratios = np.full(m, np.inf)
        pos = d > PIVOT_TOL
        ratios[pos] = xB[pos] / d[pos]
        if not np.any(pos):
            raise LPUnboundedError("objective unbounded below")
        leave_row = min(
            (i for i in range(m) if pos[i]),
            key=lambda i: (ratios[i], basis[i]),
        )
        basis[leave_row] = entering
    raise RuntimeError("simplex failed to terminate")


def small_lp_solve(
    c: np.ndarray,
    A_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    A_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    free_vars: tuple[int, ...] = (),
) -> LPSolution:
    """min c'x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0 off free_vars."""
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).reshape(-1)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).reshape(-1)
    n_ub, n_eq = A_ub.shape[0], A_eq.shape[0]

    # split free variables, append slacks for the inequality rows
    split = list(free_vars)
    A = np.vstack([A_ub, A_eq])
    b = np.concatenate([b_ub, b_eq])
    cols = [A]
    c_full = [c]
    if split:
        cols.append(-A[:, split])
        c_full.append(-c[split])
    slack = np.vstack([np.eye(n_ub), np.zeros((n_eq, n_ub))])
    cols.append(slack)
    c_full.append(np.zeros(n_ub))
    A_std = np.hstack(cols)
    c_std = np.concatenate(c_full)

    flip = np.where(b < 0, -1.0, 1.0)
    A_std = A_std * flip[:, None]
    b_std = b * flip

    m, n_std = A_std.shape
    # phase 1: artificial start
    A1 = np.hstack([A_std, np.eye(m)])
    c1 = np.concatenate([np.zeros(n_std), np.ones(m)])
    basis = list(range(n_std, n_std + m))
    x1, basis, _ = _simplex(c1, A1, b_std, basis)
    if float(c1 @ x1) > FEAS_TOL:
        raise LPInfeasibleError(f"phase-1 residual {float(c1 @ x1):.3e}")
    # pivot remaining artificials out where possible
    for row, j in enumerate(list(basis)):
        if j >= n_std:
            B = A1[:, basis]
            tab = np.linalg.solve(B, A_std)
            cand = np.where(np.abs(tab[row]) > PIVOT_TOL)[0]
            cand = [jj for jj in cand if jj not in basis]
            if cand:
                basis[row] = int(cand[0])
    keep = [i for i, j in enumerate(basis) if j < n_std]
    if len(keep) < m:
        # rows still held by artificials are redundant; drop them
        rows = keep
        A_std = A_std[rows]
        b_std = b_std[rows]
        flip = flip[rows]
        basis = [basis[i] for i in rows]
        m = len(rows)

    x_std, basis, y = _simplex(c_std, A_std, b_std, basis)

    x = x_std[:n]
    if split:
        x = x.copy()
        x[split] -= x_std[n : n + len(split)]
    y_orig = np.zeros(n_ub + n_eq)
    row_ids = keep if len(keep) < n_ub + n_eq else list(range(n_ub + n_eq))
    for local, orig in enumerate(row_ids):
        y_orig[orig] = y[local] * flip[local]
    return LPSolution(
        x=x,
        value=float(c @ x),
        duals_ub=y_orig[:n_ub],
        duals_eq=y_orig[n_ub:],
    )
