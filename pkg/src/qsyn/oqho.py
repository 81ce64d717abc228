"""Open quantum harmonic oscillators in position-momentum form.

A system is described by a CCR matrix ``theta`` together with the triple
``(D, M, R)``: feedthrough, field coupling and Hamiltonian.  The helpers here
move between that description and plain state-space data, test physical
realizability in the frequency domain, and close coherent feedback loops at
the ``(D, M, R)`` level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrumError,
    DimensionError,
    IllPosedInterconnectionError,
    NotPhysicallyRealizableError,
    SingularEquationError,
    ValidationError,
)
from .linalg import _jmat0, is_singular, is_symplectic_orthogonal, solve_sylvester
from .lti import FrequencyGrid, PartitionedPlant, StateSpace, freqresp

__all__ = [
    "OqhoParams",
    "PrReport",
    "realize",
    "check_physical_realizability",
    "recover_theta",
    "extract_dmr",
    "close_loop_dmr",
    "check_ito_feedthrough",
    "nondemolition_residual",
    "random_oqho",
    "PartitionedPlant",
]

_PARAM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OqhoParams:
    theta: np.ndarray
    D: np.ndarray
    M: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        d = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = theta.shape[0] if theta.size else 0
        m = d.shape[0]
        theta = theta.reshape(n, n)
        mm = np.asarray(self.M, dtype=float).reshape(m, n)
        r = np.asarray(self.R, dtype=float).reshape(n, n)
        for name, val in (("theta", theta), ("D", d), ("M", mm), ("R", r)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    def validate(self, tol: float = _PARAM_TOL) -> None:
        n, m = self.n, self.m
        if n % 2 or m % 2:
            raise ValidationError(f"state and field dimensions must be even (n={n}, m={m})")
        if self.D.shape != (m, m):
            raise ValidationError("feedthrough must be square")
        if n:
            scale = max(1.0, np.linalg.norm(self.theta))
            if np.linalg.norm(self.theta + self.theta.T) > tol * scale:
                raise ValidationError("theta is not skew-symmetric")
            if is_singular(self.theta):
                raise ValidationError("theta is singular")
            if np.linalg.norm(self.R - self.R.T) > tol * max(1.0, np.linalg.norm(self.R)):
                raise ValidationError("R is not symmetric")
        if not is_symplectic_orthogonal(self.D, tol):
            raise ValidationError("D is not orthogonal symplectic")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("theta", "D", "M", "R")}

    @classmethod
    def from_dict(cls, d: dict) -> "OqhoParams":
        return cls(d["theta"], d["D"], d["M"], d["R"])


def realize(params: OqhoParams) -> StateSpace:
    """State-space data of an oscillator::

        B = 2 theta M^T
        A = 2 theta R - (1/2) B J B^T theta^{-1}
        C = -D J B^T theta^{-1}
    """
    params.validate()
    n, m = params.n, params.m
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((m, 0)), params.D)
    j = _jmat0(m)
    ti = np.linalg.inv(params.theta)
    b = 2.0 * params.theta @ params.M.T
    a = 2.0 * params.theta @ params.R - 0.5 * b @ j @ b.T @ ti
    c = -params.D @ j @ b.T @ ti
    return StateSpace(a, b, c, params.D)


def nondemolition_residual(sys: StateSpace, theta) -> float:
    """``||C theta + D J B^T||_F``."""
    if sys.n == 0:
        return 0.0
    j = _jmat0(sys.inputs)
    return float(np.linalg.norm(sys.C @ theta + sys.D @ j @ sys.B.T))


@dataclass(frozen=True)
class PrReport:
    jj_residual_max: float
    dual_residual_max: float
    feedthrough_orth_residual: float
    feedthrough_sympl_residual: float
    tol: float
    theta_recovered: np.ndarray | None = None

    @property
    def residual(self) -> float:
        return max(self.jj_residual_max, self.dual_residual_max)

    @property
    def verdict(self) -> bool:
        return self.residual <= self.tol and self.feedthrough_orth_residual <= self.tol

    def __bool__(self) -> bool:
        return self.verdict

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "jj_residual": self.jj_residual_max,
            "dual_residual": self.dual_residual_max,
            "feedthrough_orth_residual": self.feedthrough_orth_residual,
            "feedthrough_sympl_residual": self.feedthrough_sympl_residual,
            "tol": self.tol,
        }


def _jj_residuals(vals: np.ndarray, j: np.ndarray) -> tuple[float, float]:
    vh = np.conj(np.swapaxes(vals, 1, 2))
    # relative to |G|^2 so that near-axis poles do not inflate roundoff
    scale = np.maximum(1.0, np.linalg.norm(vals, 2, axis=(1, 2)) ** 2)
    primal = np.linalg.norm(vh @ j @ vals - j, axis=(1, 2)) / scale
    dual = np.linalg.norm(vals @ j @ vh - j, axis=(1, 2)) / scale
    return float(primal.max(initial=0.0)), float(dual.max(initial=0.0))


def check_physical_realizability(
    sys: StateSpace, grid: FrequencyGrid | None = None, tol: float = 1e-8
) -> PrReport:
    """Frequency-domain PR test: (J, J)-unitarity on the grid plus orthogonal ``D``.

    Both ``G* J G = J`` and the dual ``G J G* = J`` are evaluated; the report
    carries the larger of each over all grid points, each divided by
    ``max(1, ||G(i w)||^2)``.
    """
    if sys.inputs != sys.outputs or sys.inputs % 2:
        raise DimensionError("PR check needs a square system with an even number of channels")
    grid = grid or FrequencyGrid.default()
    m = sys.inputs
    j = _jmat0(m)
    vals = freqresp(sys, grid.omegas)
    jj, dual = _jj_residuals(vals, j)
    if grid.include_infinity:
        jj_inf, dual_inf = _jj_residuals(sys.D[None].astype(complex), j)
        jj, dual = max(jj, jj_inf), max(dual, dual_inf)
    rep = is_symplectic_orthogonal(sys.D, tol) if m else None
    return PrReport(
        jj_residual_max=jj,
        dual_residual_max=dual,
        feedthrough_orth_residual=rep.orthogonality_residual if rep else 0.0,
        feedthrough_sympl_residual=rep.symplectic_residual if rep else 0.0,
        tol=tol,
    )


def recover_theta(sys: StateSpace, tol: float = 1e-8) -> np.ndarray:
    """CCR matrix of a minimal PR realization.

    Solves ``A^T X + X A = -C^T J C``; for a PR realization ``X`` is skew,
    satisfies ``C = D J B^T X``, and the CCR matrix is ``-X^{-1}``.
    """
    n = sys.n
    if n == 0:
        return np.zeros((0, 0))
    j = _jmat0(sys.inputs)
    try:
        x = solve_sylvester(sys.A.T, sys.A, -sys.C.T @ j @ sys.C)
    except SingularEquationError as exc:
        raise DegenerateSpectrumError("spec(A) intersects spec(-A); theta is not unique") from exc
    xn = max(np.linalg.norm(x), np.finfo(float).tiny)
    if np.linalg.norm(x + x.T) > tol * xn:
        raise NotPhysicallyRealizableError("Lyapunov solution is not skew-symmetric")
    scale = max(1.0, np.linalg.norm(sys.C))
    if np.linalg.norm(sys.C - sys.D @ j @ sys.B.T @ x) > tol * scale:
        raise NotPhysicallyRealizableError("C != D J B^T X: realization is not PR")
    x = 0.5 * (x - x.T)
    if is_singular(x):
        raise NotPhysicallyRealizableError("recovered CCR matrix is singular (realization not minimal?)")
    theta = -np.linalg.inv(x)
    return 0.5 * (theta - theta.T)


def _hamiltonian(a, b, theta, j) -> np.ndarray:
    ti = np.linalg.inv(theta)
    r = 0.5 * (ti @ a - 0.5 * ti @ b @ j @ b.T @ ti.T)
    return 0.5 * (r + r.T)


def extract_dmr(sys: StateSpace, tol: float = 1e-8) -> OqhoParams:
    """Recover ``(theta, D, M, R)`` from a minimal PR realization."""
    theta = recover_theta(sys, tol)
    m = sys.inputs
    if sys.n == 0:
        return OqhoParams(theta, sys.D, np.zeros((m, 0)), np.zeros((0, 0)))
    j = _jmat0(m)
    mm = -0.5 * sys.B.T @ np.linalg.inv(theta)
    r = _hamiltonian(sys.A, sys.B, theta, j)
    return OqhoParams(theta, sys.D, mm, r)


def close_loop_dmr(
    plant: OqhoParams, partition: tuple[int, int, int, int], ctrl: OqhoParams
) -> OqhoParams:
    """Coherent feedback loop of two oscillators, returned as ``(theta, D, M, R)``.

    ``partition = (m_r, m_u, p_z, p_y)`` splits the plant fields as in the
    partitioned plant.  The closed-loop Hamiltonian is
    ``diag(R1, R2) + Rhat`` with the explicit ``Rhat`` blocks below.
    """
    m_r, m_u, p_z, p_y = partition
    plant.validate()
    ctrl.validate()
    if m_r + m_u != plant.m or p_z + p_y != plant.m:
        raise DimensionError("partition does not match the plant field dimension")
    if ctrl.m != m_u or m_u != p_y:
        raise DimensionError("controller width must equal the loop channel width")
    if m_r != p_z:
        raise DimensionError("closed loop must be square (m_r == p_z)")

    t1, t2 = plant.theta, ctrl.theta
    n1, n2 = plant.n, ctrl.n
    b1 = 2.0 * t1 @ plant.M.T
    b2 = 2.0 * t2 @ ctrl.M.T
    b11, b12 = b1[:, :m_r], b1[:, m_r:]
    d1, d2 = plant.D, ctrl.D
    d11, d12 = d1[:p_z, :m_r], d1[:p_z, m_r:]
    d21, d22 = d1[p_z:, :m_r], d1[p_z:, m_r:]

    loop = np.eye(m_u) - d2 @ d22
    if is_singular(loop):
        raise IllPosedInterconnectionError("I - D2 D22 is singular")
    dl = np.linalg.inv(loop)

    d = d11 + d12 @ dl @ d2 @ d21
    b = np.vstack([b11 + b12 @ dl @ d2 @ d21, b2 @ (d21 + d22 @ dl @ d2 @ d21)])
    theta = np.zeros((n1 + n2, n1 + n2))
    theta[:n1, :n1] = t1
    theta[n1:, n1:] = t2
    n = n1 + n2
    if n == 0:
        return OqhoParams(theta, d, np.zeros((m_r, 0)), np.zeros((0, 0)))
    mm = -0.5 * b.T @ np.linalg.inv(theta)

    jr, ju = _jmat0(m_r), _jmat0(m_u)
    ti1 = np.linalg.inv(t1) if n1 else np.zeros((0, 0))
    ti2 = np.linalg.inv(t2) if n2 else np.zeros((0, 0))
    rhat11 = 0.25 * ti1 @ (
        b12 @ dl @ d2 @ d21 @ jr @ b11.T
        - b11 @ jr @ d21.T @ d2.T @ dl.T @ b12.T
        + b12 @ dl @ d2 @ d22 @ ju @ b12.T
        - b12 @ ju @ d22.T @ d2.T @ dl.T @ b12.T
    ) @ ti1.T
    rhat21 = 0.25 * ti2 @ b2 @ (
        d22 @ dl @ d2 @ d21 @ jr @ b11.T
        + d21 @ jr @ b11.T
        + d22 @ dl @ d2 @ d22 @ ju @ b12.T
        + d22 @ ju @ b12.T
        - ju @ d2.T @ dl.T @ b12.T
    ) @ ti1.T
    rhat22 = 0.25 * ti2 @ b2 @ (d22 @ dl @ d2 @ ju - ju @ d2.T @ dl.T @ d22.T) @ b2.T @ ti2.T

    r = np.zeros((n, n))
    r[:n1, :n1] = plant.R + rhat11
    r[n1:, n1:] = ctrl.R + rhat22
    r[n1:, :n1] = rhat21
    r[:n1, n1:] = rhat21.T
    return OqhoParams(theta, d, mm, 0.5 * (r + r.T))


def check_ito_feedthrough(d, tol: float = 1e-8) -> bool:
    """``D (I + iJ_m) D^T = I + iJ_p`` for a ``p x m`` feedthrough (``p <= m``)."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    p, m = d.shape
    if p > m or p % 2 or m % 2:
        return False
    lhs = d @ (np.eye(m) + 1j * _jmat0(m)) @ d.T
    return bool(np.linalg.norm(lhs - (np.eye(p) + 1j * _jmat0(p))) <= tol)


def random_oqho(n: int, m: int, rng: np.random.Generator, theta=None, scale: float = 1.0) -> OqhoParams:
    """Random valid oscillator: ``theta = Sigma J Sigma^T`` unless given, Gaussian ``M`` and ``R``."""
    from .linalg import random_symplectic_orthogonal

    if theta is None:
        if n:
            sig = np.eye(n) + 0.3 * rng.standard_normal((n, n))
            theta = sig @ _jmat0(n) @ sig.T
        else:
            theta = np.zeros((0, 0))
    r = rng.standard_normal((n, n)) * scale
    r = 0.5 * (r + r.T)
    mm = rng.standard_normal((m, n)) * scale
    d = random_symplectic_orthogonal(m, rng)
    return OqhoParams(theta, d, mm, r)
