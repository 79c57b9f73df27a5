"""Game data model: dynamics, type-indexed costs, and spec file round-tripping.

A game instance couples shared linear dynamics with a finite family of
quadratic cost structures ("types"), one of which is drawn privately for the
minimizing player at the start of play.  Spec files carry the continuous-time
dynamics plus a sampling interval; discretization happens on load so that
solver code only ever sees the discrete matrices.

Conventions: stage cost for type i is (tau/2) * (u'R_i u - v'S_i v) and the
terminal cost is (1/2) x'Q_i x + q_i'x + c_i.  R_i and S_i must be symmetric
positive definite; Q_i is symmetric but typically indefinite (the minimizer's
target term minus the maximizer's).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_TYPES = 8
MAX_HORIZON = 16

SYMMETRY_TOL = 1e-12
SIMPLEX_TOL = 1e-12
ZERO_BLOCK_TOL = 1e-12
PSD_EIG_TOL = 1e-10


class SpecFormatError(ValueError):
    """Raised when a spec file cannot be parsed into a game instance."""


class SpecValidationError(ValueError):
    """Raised when a parsed spec violates the game-model contract."""


@dataclass
class ContinuousDynamics:
    """Continuous-time plant: xdot = A_c x + B1_c u + B2_c v."""

    A_c: np.ndarray
    B1_c: np.ndarray
    B2_c: np.ndarray

    def __post_init__(self) -> None:
        self.A_c = np.asarray(self.A_c, dtype=float)
        self.B1_c = np.asarray(self.B1_c, dtype=float)
        self.B2_c = np.asarray(self.B2_c, dtype=float)


@dataclass
class DiscreteDynamics:
    """One-step transition x+ = A x + B1 u + B2 v at sampling interval tau."""

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        self.A = np.asarray(self.A, dtype=float)
        self.B1 = np.asarray(self.B1, dtype=float)
        self.B2 = np.asarray(self.B2, dtype=float)
        self.tau = float(self.tau)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m1(self) -> int:
        return self.B1.shape[1]

    @property
    def m2(self) -> int:
        return self.B2.shape[1]


@dataclass
class TypeData:
    """Cost data for one private type."""

    R: np.ndarray  # m1 x m1, symmetric PD
    S: np.ndarray  # m2 x m2, symmetric PD
    Q: np.ndarray  # n x n, symmetric (indefinite in general)
    q: np.ndarray  # n
    c: float

    def __post_init__(self) -> None:
        self.R = np.asarray(self.R, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        self.c = float(self.c)


@dataclass
class GameSpec:
    """Complete game instance over a fixed horizon.

    `continuous` retains the pre-discretization plant when the spec was built
    from one; it is needed to write spec files back out and to evaluate the
    interval-admissibility bound.
    """

    dynamics: DiscreteDynamics
    types: list[TypeData]
    horizon: int
    prior: np.ndarray
    continuous: ContinuousDynamics | None = None

    def __post_init__(self) -> None:
        self.prior = np.asarray(self.prior, dtype=float).reshape(-1)
        self.horizon = int(self.horizon)
        if len(self.types) > MAX_TYPES:
            raise ValueError(
                f"{len(self.types)} types exceeds the supported maximum of {MAX_TYPES}"
            )
        if self.horizon > MAX_HORIZON:
            raise ValueError(
                f"horizon {self.horizon} exceeds the supported maximum of {MAX_HORIZON}"
            )

    @property
    def n(self) -> int:
        return self.dynamics.n

    @property
    def m1(self) -> int:
        return self.dynamics.m1

    @property
    def m2(self) -> int:
        return self.dynamics.m2

    @property
    def num_types(self) -> int:
        return len(self.types)

    # Stacked copies of the per-type data, shaped for batched tree updates.
    def stacked(self) -> dict[str, np.ndarray]:
        if not hasattr(self, "_stacked"):
            self._stacked = {
                "R": np.stack([t.R for t in self.types]),
                "S": np.stack([t.S for t in self.types]),
                "Q": np.stack([t.Q for t in self.types]),
                "q": np.stack([t.q for t in self.types]),
                "c": np.array([t.c for t in self.types]),
            }
        return self._stacked


@dataclass
class ValidationReport:
    """List of human-readable contract violations; empty means valid."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def discretize_dynamics(cont: ContinuousDynamics, tau: float) -> DiscreteDynamics:
    """First-order-hold style discretization of the continuous plant.

    A = I + tau A_c, and each input matrix picks up the half-interval drift
    correction B = tau B_c + A_c B_c tau^2 / 2.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    A_c, B1_c, B2_c = cont.A_c, cont.B1_c, cont.B2_c
    n = A_c.shape[0]
    if A_c.ndim != 2 or A_c.shape[1] != n:
        raise SpecValidationError(f"A_c must be square, got shape {A_c.shape}")
    for name, B in (("B1_c", B1_c), ("B2_c", B2_c)):
        if B.ndim != 2 or B.shape[0] != n:
            raise SpecValidationError(
                f"{name} has {B.shape[0] if B.ndim == 2 else '?'} rows "
                f"but A_c is {n}x{n}"
            )
    A = np.eye(n) + tau * A_c
    B1 = tau * B1_c + (tau**2 / 2.0) * (A_c @ B1_c)
    B2 = tau * B2_c + (tau**2 / 2.0) * (A_c @ B2_c)
    return DiscreteDynamics(A=A, B1=B1, B2=B2, tau=tau)


def _is_symmetric(M: np.ndarray) -> bool:
    return M.shape[0] == M.shape[1] and np.max(np.abs(M - M.T)) <= SYMMETRY_TOL


def _is_pd(M: np.ndarray) -> bool:
    # Cholesky with zero tolerance: semidefinite inputs are rejected.
    try:
        np.linalg.cholesky(M)
        return True
    except np.linalg.LinAlgError:
        return False


def validate_game(spec: GameSpec) -> ValidationReport:
    """Check the structural contract; returns a report instead of raising."""
    bad: list[str] = []
    dyn = spec.dynamics
    n, m1, m2 = dyn.n, dyn.m1, dyn.m2

    if dyn.A.shape != (n, n):
        bad.append(f"A must be square, got shape {dyn.A.shape}")
    if dyn.B1.shape[0] != n:
        bad.append(f"B1 has {dyn.B1.shape[0]} rows but A is {n}x{n}")
    if dyn.B2.shape[0] != n:
        bad.append(f"B2 has {dyn.B2.shape[0]} rows but A is {n}x{n}")
    if dyn.tau <= 0:
        bad.append(f"tau must be positive, got {dyn.tau}")
    if spec.horizon < 1:
        bad.append(f"horizon must be at least 1, got {spec.horizon}")
    if len(spec.types) < 1:
        bad.append("at least one type is required")

    if spec.prior.shape != (len(spec.types),):
        bad.append(
            f"prior has {spec.prior.shape[0]} entries for {len(spec.types)} types"
        )
    else:
        total = float(np.sum(spec.prior))
        if abs(total - 1.0) > SIMPLEX_TOL:
            bad.append(f"prior sums to {total} (expected 1 within {SIMPLEX_TOL})")
        if np.any(spec.prior < -SIMPLEX_TOL):
            bad.append(f"prior has negative mass: {spec.prior.tolist()}")

    for i, t in enumerate(spec.types):
        label = f"types[{i}]"
        if t.R.shape != (m1, m1):
            bad.append(f"{label}.R has shape {t.R.shape}, expected ({m1}, {m1})")
        elif not _is_symmetric(t.R):
            bad.append(f"{label}.R is not symmetric")
        elif not _is_pd(t.R):
            bad.append(f"{label}.R is not positive definite")
        if t.S.shape != (m2, m2):
            bad.append(f"{label}.S has shape {t.S.shape}, expected ({m2}, {m2})")
        elif not _is_symmetric(t.S):
            bad.append(f"{label}.S is not symmetric")
        elif not _is_pd(t.S):
            bad.append(f"{label}.S is not positive definite")
        if t.Q.shape != (n, n):
            bad.append(f"{label}.Q has shape {t.Q.shape}, expected ({n}, {n})")
        elif not _is_symmetric(t.Q):
            bad.append(f"{label}.Q is not symmetric")
        if t.q.shape != (n,):
            bad.append(f"{label}.q has length {t.q.shape[0]}, expected {n}")

    return ValidationReport(violations=bad)


def tau_star(spec: GameSpec, p_bar: float, tau0: float = 1.0) -> float:
    """Conservative sampling-interval bound guaranteeing edge well-posedness.

    Below the returned interval the per-branch inner problem is strictly
    convex in u and strictly concave in v whenever the value curvature stays
    below `p_bar` in spectral norm.  The bound is advisory: separable games
    (see `separable_structure_check`) are well-posed at any interval, and the
    backward pass independently verifies definiteness at every branch.
    """
    if p_bar <= 0:
        raise ValueError(f"p_bar must be positive, got {p_bar}")
    if tau0 <= 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    if spec.continuous is None:
        raise ValueError("tau_star requires the continuous dynamics to be present")
    cont = spec.continuous
    r_lo = min(float(np.linalg.eigvalsh(t.R)[0]) for t in spec.types)
    s_lo = min(float(np.linalg.eigvalsh(t.S)[0]) for t in spec.types)
    beta = []
    for B_c in (cont.B1_c, cont.B2_c):
        beta.append(
            np.linalg.norm(B_c, 2) + np.linalg.norm(cont.A_c @ B_c, 2) * tau0 / 2.0
        )
    return float(min(r_lo / (p_bar * beta[0] ** 2), s_lo / (p_bar * beta[1] ** 2), tau0))


def _check_split(spec: GameSpec, n1: int) -> bool:
    dyn = spec.dynamics
    n = dyn.n
    A, B1, B2 = dyn.A, dyn.B1, dyn.B2
    if np.max(np.abs(A[:n1, n1:])) > ZERO_BLOCK_TOL:
        return False
    if np.max(np.abs(A[n1:, :n1])) > ZERO_BLOCK_TOL:
        return False
    if np.max(np.abs(B1[n1:, :])) > ZERO_BLOCK_TOL:
        return False
    if np.max(np.abs(B2[:n1, :])) > ZERO_BLOCK_TOL:
        return False
    for t in spec.types:
        if np.max(np.abs(t.Q[:n1, n1:])) > ZERO_BLOCK_TOL:
            return False
        if np.max(np.abs(t.Q[n1:, :n1])) > ZERO_BLOCK_TOL:
            return False
        if np.linalg.eigvalsh(t.Q[:n1, :n1])[0] < -PSD_EIG_TOL:
            return False
        if np.linalg.eigvalsh(-t.Q[n1:, n1:])[0] < -PSD_EIG_TOL:
            return False
    return True


def separable_structure_check(spec: GameSpec) -> bool:
    """True when the state splits into a minimizer block and a maximizer block.

    Looks for a partition under which A is block diagonal, each player only
    drives their own block, and every Q is diag(Q1, -Q2) with both Q1 and Q2
    positive semidefinite.  Games with this structure are well-posed at any
    sampling interval and their value curvature keeps the sign-block pattern.
    """
    return any(_check_split(spec, n1) for n1 in range(1, spec.dynamics.n))


# ---------------------------------------------------------------------------
# Spec file round-tripping (schema version 1)

SCHEMA_VERSION = 1


def _spec_document(spec: GameSpec) -> dict:
    if spec.continuous is None:
        raise ValueError("cannot serialize a spec without continuous dynamics")
    return {
        "version": SCHEMA_VERSION,
        "n": spec.n,
        "m1": spec.m1,
        "m2": spec.m2,
        "K": spec.horizon,
        "tau": spec.dynamics.tau,
        "A_c": spec.continuous.A_c.tolist(),
        "B1_c": spec.continuous.B1_c.tolist(),
        "B2_c": spec.continuous.B2_c.tolist(),
        "prior": spec.prior.tolist(),
        "types": [
            {
                "R": t.R.tolist(),
                "S": t.S.tolist(),
                "Q": t.Q.tolist(),
                "q": t.q.tolist(),
                "c": t.c,
            }
            for t in spec.types
        ],
    }


def save_spec(spec: GameSpec, path: str | Path) -> None:
    doc = _spec_document(spec)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def _require(doc: dict, key: str, where: str = "spec"):
    if key not in doc:
        raise SpecFormatError(f"{where} is missing required field '{key}'")
    return doc[key]


def spec_from_document(doc: dict) -> GameSpec:
    version = _require(doc, "version")
    if version != SCHEMA_VERSION:
        raise SpecFormatError(
            f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})"
        )
    cont = ContinuousDynamics(
        A_c=np.asarray(_require(doc, "A_c"), dtype=float),
        B1_c=np.asarray(_require(doc, "B1_c"), dtype=float),
        B2_c=np.asarray(_require(doc, "B2_c"), dtype=float),
    )
    tau = float(_require(doc, "tau"))
    dyn = discretize_dynamics(cont, tau)
    declared = {k: int(_require(doc, k)) for k in ("n", "m1", "m2")}
    actual = {"n": dyn.n, "m1": dyn.m1, "m2": dyn.m2}
    for k in declared:
        if declared[k] != actual[k]:
            raise SpecFormatError(
                f"declared {k}={declared[k]} but matrices imply {k}={actual[k]}"
            )
    types = []
    for i, tdoc in enumerate(_require(doc, "types")):
        where = f"types[{i}]"
        types.append(
            TypeData(
                R=np.asarray(_require(tdoc, "R", where), dtype=float),
                S=np.asarray(_require(tdoc, "S", where), dtype=float),
                Q=np.asarray(_require(tdoc, "Q", where), dtype=float),
                q=np.asarray(_require(tdoc, "q", where), dtype=float),
                c=float(_require(tdoc, "c", where)),
            )
        )
    return GameSpec(
        dynamics=dyn,
        types=types,
        horizon=int(_require(doc, "K")),
        prior=np.asarray(_require(doc, "prior"), dtype=float),
        continuous=cont,
    )


def load_spec(path: str | Path, validate: bool = True) -> GameSpec:
    """Parse a version-1 spec file, discretizing the dynamics on the way in."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecFormatError(
            f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(doc, dict):
        raise SpecFormatError(f"{path}: top level must be an object")
    spec = spec_from_document(doc)
    if validate:
        report = validate_game(spec)
        if not report.ok:
            raise SpecValidationError(f"{path}: " + "; ".join(report.violations))
    return spec


def spec_sha256(spec: GameSpec) -> str:
    """Stable content hash used to bind solved policies to their spec."""
    doc = _spec_document(spec)
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
