"""Cone-constrained quadratic programs and their sensitivity to data perturbations.

The model problem is

    minimize  1/2 u'Au - f'u   over  {u : Bu >= 0}  or  {u : Bu = 0}

with A symmetric positive definite and B of full row rank.  Solving the
primal-dual saddle point of the Lagrangian L(u, lam) = 1/2 u'Au - f'u -
lam'Bu gives the multiplier lam needed to differentiate the optimal value
along a one-parameter family (A + s*A1, B + s*B1, f + s*f1).  The module
also provides the central-difference quotient of the optimal value, used
throughout the test suite as the independent check of that derivative.

All operations are pure functions of immutable inputs and safe to call
concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    MaxIterations,
    NotPositiveDefinite,
    RankDeficientB,
)

__all__ = [
    "ConeKind",
    "ConeQP",
    "PerturbationDirection",
    "SaddlePoint",
    "solve_saddle_point",
    "objective_value",
    "lagrangian_value",
    "shape_derivative",
    "perturbed_qp",
    "fd_derivative",
    "check_lbb",
    "load_qp",
    "save_qp",
]

_SYM_RTOL = 1e-12
_RANK_RTOL = 1e-10


class ConeKind(enum.Enum):
    INEQUALITY = "inequality"  # feasible set {u : Bu >= 0}
    EQUALITY = "equality"      # feasible set {u : Bu = 0}


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-d array, got shape {a.shape}")
    return a


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d array, got shape {v.shape}")
    return v


def _check_symmetric(a: np.ndarray, name: str) -> None:
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > _SYM_RTOL * scale:
        raise DimensionMismatch(f"{name} must be symmetric")


def _cholesky_or_raise(a: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix A failed the Cholesky test") from None


@dataclass(frozen=True)
class ConeQP:
    """Quadratic program 1/2 u'Au - f'u over a polyhedral cone Bu >= 0 or Bu = 0.

    A must be symmetric positive definite (its smallest eigenvalue is the
    strong-monotony constant) and B must have full row rank m <= n (its
    smallest singular value controls uniqueness of the multiplier).
    """

    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    cone: ConeKind = ConeKind.INEQUALITY

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        f = _as_vector(self.f, "f")
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch("A must be square")
        if B.shape[1] != n or f.shape[0] != n:
            raise DimensionMismatch("B and f must match the dimension of A")
        _check_symmetric(A, "A")
        _cholesky_or_raise(A)
        sigma = np.linalg.svd(B, compute_uv=False)
        m = B.shape[0]
        if m > n or sigma.size == 0 or sigma[-1] <= _RANK_RTOL * max(1.0, sigma[0]):
            raise RankDeficientB("B must have full row rank m <= n")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "f", f)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True)
class PerturbationDirection:
    """First-order data perturbation (A1, B1, f1) of a ConeQP."""

    A1: np.ndarray
    B1: np.ndarray
    f1: np.ndarray

    def __post_init__(self):
        A1 = _as_matrix(self.A1, "A1")
        B1 = _as_matrix(self.B1, "B1")
        f1 = _as_vector(self.f1, "f1")
        _check_symmetric(A1, "A1")
        object.__setattr__(self, "A1", A1)
        object.__setattr__(self, "B1", B1)
        object.__setattr__(self, "f1", f1)

    def check_against(self, qp: ConeQP) -> None:
        if self.A1.shape != qp.A.shape or self.B1.shape != qp.B.shape:
            raise DimensionMismatch("perturbation shapes do not match the QP")
        if self.f1.shape != qp.f.shape:
            raise DimensionMismatch("f1 does not match the QP dimension")


@dataclass(frozen=True)
class SaddlePoint:
    """Primal minimizer, multiplier, terminal working set and KKT residual."""

    u: np.ndarray
    lam: np.ndarray
    active_set: frozenset[int] | None = None  # inequality case only, 0-based
    kkt_residual: float = 0.0


def objective_value(qp: ConeQP, u) -> float:
    """Quadratic objective 1/2 u'Au - f'u."""
    u = _as_vector(u, "u")
    if u.shape[0] != qp.n:
        raise DimensionMismatch("u does not match the QP dimension")
    return float(0.5 * u @ qp.A @ u - qp.f @ u)


def lagrangian_value(qp: ConeQP, u, lam) -> float:
    """Lagrangian 1/2 u'Au - f'u - lam'Bu; equals the objective at a saddle point."""
    u = _as_vector(u, "u")
    lam = _as_vector(lam, "lam")
    if lam.shape[0] != qp.m:
        raise DimensionMismatch("lam does not match the number of constraints")
    return objective_value(qp, u) - float(lam @ (qp.B @ u))


def _solve_kkt(A: np.ndarray, B: np.ndarray, f: np.ndarray):
    """Solve the bordered system [[A, -B'], [-B, 0]] (u, lam) = (f, 0).

    The bordered matrix is symmetric indefinite; B may be a row subset of
    the full constraint matrix (always full row rank here).
    """
    n = A.shape[0]
    m = B.shape[0]
    if m == 0:
        return np.linalg.solve(A, f), np.zeros(0)
    K = np.zeros((n + m, n + m))
    K[:n, :n] = A
    K[:n, n:] = -B.T
    K[n:, :n] = -B
    rhs = np.concatenate([f, np.zeros(m)])
    sol = scipy.linalg.solve(K, rhs, assume_a="sym")
    return sol[:n], sol[n:]


def _kkt_residual(qp: ConeQP, u: np.ndarray, lam: np.ndarray) -> float:
    r_mom = float(np.linalg.norm(qp.A @ u - qp.f - qp.B.T @ lam))
    bu = qp.B @ u
    if qp.cone is ConeKind.EQUALITY:
        return max(r_mom, float(np.linalg.norm(bu)))
    r_feas = float(max(0.0, -bu.min(initial=0.0)))
    r_dual = float(max(0.0, -lam.min(initial=0.0)))
    r_comp = float(abs(lam @ bu))
    return max(r_mom, r_feas, r_dual, r_comp)


def solve_saddle_point(qp: ConeQP, max_iter: int = 200) -> SaddlePoint:
    """Solve the primal-dual saddle point of the cone QP.

    Equality cone: one symmetric indefinite solve of the bordered KKT
    system.  Inequality cone: primal active-set iteration starting from
    the feasible origin; blocking constraints enter by lowest index and
    constraints leave by most negative multiplier (lowest index on ties),
    with ``max_iter`` as the cycling guard.
    """
    if qp.cone is ConeKind.EQUALITY:
        u, lam = _solve_kkt(qp.A, qp.B, qp.f)
        res = _kkt_residual(qp, u, lam)
        return SaddlePoint(u=u, lam=lam, active_set=None, kkt_residual=res)

    n, m = qp.n, qp.m
    f_scale = 1.0 + float(np.linalg.norm(qp.f))
    step_tol = 1e-12 * f_scale
    mult_tol = 1e-11 * f_scale
    u = np.zeros(n)
    working: list[int] = []

    for _ in range(max_iter):
        rows = np.array(sorted(working), dtype=int)
        u_star, lam_w = _solve_kkt(qp.A, qp.B[rows] if rows.size else qp.B[:0], qp.f)
        p = u_star - u
        if np.linalg.norm(p, np.inf) <= step_tol * (1.0 + np.linalg.norm(u, np.inf)):
            if lam_w.size == 0 or lam_w.min() >= -mult_tol:
                lam = np.zeros(m)
                lam[rows] = lam_w
                res = _kkt_residual(qp, u_star, lam)
                return SaddlePoint(
                    u=u_star,
                    lam=lam,
                    active_set=frozenset(int(i) for i in rows),
                    kkt_residual=res,
                )
            drop = int(rows[np.argmin(lam_w)])  # argmin takes the lowest index on ties
            working.remove(drop)
            continue
        # Step toward the working-set minimizer, stopping at the first
        # blocking constraint (lowest index wins on equal ratios).
        bu = qp.B @ u
        bp = qp.B @ p
        alpha = 1.0
        block = None
        for i in range(m):
            if i in working:
                continue
            if bp[i] < -1e-14 * f_scale:
                ratio = max(0.0, bu[i]) / (-bp[i])
                if ratio < alpha - 1e-15:
                    alpha = ratio
                    block = i
        u = u + alpha * p
        if block is not None:
            working.append(block)
    raise MaxIterations(f"active-set iteration did not settle in {max_iter} steps")


def shape_derivative(qp: ConeQP, direction: PerturbationDirection, sp: SaddlePoint) -> float:
    """First-order change of the optimal value along the data perturbation.

    Evaluates 1/2 u'A1 u - f1'u - lam'B1 u at the solved saddle point.
    """
    direction.check_against(qp)
    u, lam = sp.u, sp.lam
    return float(0.5 * u @ direction.A1 @ u - direction.f1 @ u - lam @ (direction.B1 @ u))


def perturbed_qp(qp: ConeQP, direction: PerturbationDirection, s: float) -> ConeQP:
    """The QP with data (A + s*A1, B + s*B1, f + s*f1), same cone.

    Raises NotPositiveDefinite or RankDeficientB when s leaves the
    admissible interval of the perturbation.
    """
    direction.check_against(qp)
    return ConeQP(
        A=qp.A + s * direction.A1,
        B=qp.B + s * direction.B1,
        f=qp.f + s * direction.f1,
        cone=qp.cone,
    )


def fd_derivative(qp: ConeQP, direction: PerturbationDirection, s: float) -> float:
    """Central-difference quotient of the optimal value at step s.

    Solves the perturbed problems at +s and -s and returns
    (E(+s) - E(-s)) / (2 s).  Independent of ``shape_derivative``: it only
    uses the solver and the objective.
    """
    if s == 0.0:
        raise ValueError("central difference requires s != 0")
    qp_plus = perturbed_qp(qp, direction, s)
    qp_minus = perturbed_qp(qp, direction, -s)
    e_plus = objective_value(qp_plus, solve_saddle_point(qp_plus).u)
    e_minus = objective_value(qp_minus, solve_saddle_point(qp_minus).u)
    return (e_plus - e_minus) / (2.0 * s)


def check_lbb(qp: ConeQP) -> float:
    """Discrete inf-sup constant: smallest singular value of B L^{-T}, A = L L'.

    Positive exactly when the multiplier is unique.
    """
    L = _cholesky_or_raise(qp.A)
    # B L^{-T} has transpose L^{-1} B', a triangular solve.
    M = scipy.linalg.solve_triangular(L, qp.B.T, lower=True).T
    return float(np.linalg.svd(M, compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# Text-file instance format
#
#   cone-qp v1
#   cone equality|inequality
#   A <n> <n>
#   <n rows of n floats>
#   B <m> <n>
#   f <n>
#   <one row of n floats>
#   A1/B1/f1 blocks (optional, all three or none)

_HEADER = "cone-qp v1"


def save_qp(path, qp: ConeQP, direction: PerturbationDirection | None = None) -> None:
    """Write an instance (and optional perturbation) in the text format."""

    def rows(name: str, a: np.ndarray) -> list[str]:
        a = np.atleast_2d(a)
        out = [f"{name} {a.shape[0]} {a.shape[1]}"]
        out += [" ".join(f"{v:.17g}" for v in row) for row in a]
        return out

    lines = [_HEADER, f"cone {qp.cone.value}"]
    lines += rows("A", qp.A)
    lines += rows("B", qp.B)
    lines += [f"f {qp.n}", " ".join(f"{v:.17g}" for v in qp.f)]
    if direction is not None:
        lines += rows("A1", direction.A1)
        lines += rows("B1", direction.B1)
        lines += [f"f1 {qp.n}", " ".join(f"{v:.17g}" for v in direction.f1)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_qp(path) -> tuple[ConeQP, PerturbationDirection | None]:
    """Read an instance file written by :func:`save_qp` (or by hand)."""
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"{path}: expected header '{_HEADER}'")
    pos = 1
    blocks: dict[str, np.ndarray] = {}
    cone = None
    while pos < len(lines):
        head = lines[pos].split()
        pos += 1
        if head[0] == "cone":
            cone = ConeKind(head[1])
            continue
        name = head[0]
        if name in ("f", "f1"):
            n = int(head[1])
            vals = np.array([float(t) for t in lines[pos].split()])
            pos += 1
            if vals.size != n:
                raise ValueError(f"{path}: block {name} expects {n} values")
            blocks[name] = vals
        elif name in ("A", "B", "A1", "B1"):
            r, c = int(head[1]), int(head[2])
            data = []
            for _ in range(r):
                data.append([float(t) for t in lines[pos].split()])
                pos += 1
            a = np.array(data)
            if a.shape != (r, c):
                raise ValueError(f"{path}: block {name} expects shape {(r, c)}")
            blocks[name] = a
        else:
            raise ValueError(f"{path}: unknown block '{name}'")
    if cone is None or not {"A", "B", "f"} <= blocks.keys():
        raise ValueError(f"{path}: incomplete instance (need cone, A, B, f)")
    qp = ConeQP(A=blocks["A"], B=blocks["B"], f=blocks["f"], cone=cone)
    direction = None
    if {"A1", "B1", "f1"} <= blocks.keys():
        direction = PerturbationDirection(A1=blocks["A1"], B1=blocks["B1"], f1=blocks["f1"])
        direction.check_against(qp)
    elif {"A1", "B1", "f1"} & blocks.keys():
        raise ValueError(f"{path}: perturbation needs all of A1, B1, f1")
    return qp, direction
