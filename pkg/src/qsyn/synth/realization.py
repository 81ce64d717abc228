"""Rational refit of grid-valued ``Q``, admissibility certificates and the
state-space form of the constraint."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConditioningError, DimensionError, ValidationError
from ..linalg import _jmat0, solve_sylvester
from ..lti import (
    FrequencyGrid,
    GridFunction,
    StateSpace,
    _controllable_part,
    is_hurwitz,
    minimal,
    sample,
    spectral_abscissa,
    vstack,
)
from ..oqho import check_physical_realizability
from ..youla import CoprimeFactors, ControllerMfd, assemble_controller, check_internal_stability
from .constraint import ConstraintData, compute_constraint_data, constraint_residual

__all__ = [
    "RationalFit",
    "fit_rational_q",
    "Certificate",
    "certify_admissible",
    "PrStateSpaceReport",
    "youla_ss_pr_check",
]


@dataclass(frozen=True, eq=False)
class RationalFit:
    sys: StateSpace
    residual: float
    condition: float


def default_fit_poles(order: int, wmin: float = 0.1, wmax: float = 100.0) -> np.ndarray:
    return -np.geomspace(wmin, wmax, order) if order else np.zeros(0)


def fit_rational_q(
    q: GridFunction,
    poles=None,
    order: int = 4,
    mask=None,
    symmetry_tol: float = 1e-8,
    max_condition: float = 1e12,
) -> RationalFit:
    """Least-squares fit ``Q(s) ~ Q_inf + sum_k Q_k / (s - p_k)`` with real coefficients.

    Real and imaginary parts of every sample give separate equations; the
    value at infinity, when present, pins ``Q_inf``.  ``mask`` restricts the
    frequencies used.  The realization has one ``p_k I`` block per pole and is
    reduced with :func:`minimal`.
    """
    if q.symmetry_residual() > symmetry_tol * max(1.0, float(np.max(np.abs(q.values), initial=0.0))):
        raise ValidationError("samples are not real-rational (Q(-iw) != conj Q(iw))")
    poles = default_fit_poles(order) if poles is None else np.asarray(poles, dtype=float).ravel()
    if np.any(poles >= 0):
        raise ValidationError("fit poles must be stable (negative reals)")
    p, m = q.shape
    w = q.grid.omegas
    sel = np.ones(w.size, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    w = w[sel]
    vals = q.values[sel]
    k = poles.size
    if w.size < max(2 * k * p * m, k + 1):
        raise ValidationError(f"{w.size} frequencies are too few for {k} poles at size {p}x{m}")

    basis = np.ones((w.size, k + 1), dtype=complex)
    if k:
        basis[:, 1:] = 1.0 / (1j * w[:, None] - poles[None, :])
    rows = [basis.real, basis.imag]
    rhs = [vals.real.reshape(w.size, -1), vals.imag.reshape(w.size, -1)]
    if q.value_at_infinity is not None:
        inf_row = np.zeros((1, k + 1))
        inf_row[0, 0] = 1.0
        rows.append(inf_row * np.sqrt(w.size))
        rhs.append(np.asarray(q.value_at_infinity, dtype=float).reshape(1, -1) * np.sqrt(w.size))
    a = np.vstack(rows)
    b = np.vstack(rhs)
    cond = float(np.linalg.cond(a))
    if not np.isfinite(cond) or cond > max_condition:
        raise ConditioningError(f"fit basis is ill-conditioned (condition number {cond:.3g})")
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    coef = coef.reshape(k + 1, p, m)

    d = coef[0]
    if k:
        am = np.kron(np.diag(poles), np.eye(m))
        bm = np.kron(np.ones((k, 1)), np.eye(m))
        cm = np.hstack(list(coef[1:]))
        sys = minimal(StateSpace(am, bm, cm, d))
    else:
        sys = StateSpace(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), d)
    fitted = basis @ coef.reshape(k + 1, -1)
    resid = float(np.max(np.linalg.norm((fitted.reshape(vals.shape) - vals), axis=(1, 2)), initial=0.0))
    return RationalFit(sys, resid, cond)


@dataclass(frozen=True, eq=False)
class Certificate:
    stable: bool
    q_abscissa: float
    well_posed: bool
    well_posedness_margin: float
    constraint_ok: bool
    constraint_residual: float
    k_inf_orthogonal: bool
    k_inf_orthogonality_residual: float
    controller_pr: bool
    controller_pr_residual: float
    closed_loop_stable: bool
    closed_loop_abscissa: float
    controller: StateSpace | None
    tol: float

    @property
    def checks(self) -> dict:
        return {
            "q_stable": self.stable,
            "well_posed": self.well_posed,
            "constraint": self.constraint_ok,
            "k_inf_orthogonal": self.k_inf_orthogonal,
            "controller_pr_and_stabilizing": self.controller_pr and self.closed_loop_stable,
        }

    @property
    def admissible(self) -> bool:
        return all(self.checks.values())

    def __bool__(self) -> bool:
        return self.admissible

    def as_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "checks": self.checks,
            "residuals": {
                "q_abscissa": self.q_abscissa,
                "well_posedness_margin": self.well_posedness_margin,
                "constraint": self.constraint_residual,
                "k_inf_orthogonality": self.k_inf_orthogonality_residual,
                "controller_pr": self.controller_pr_residual,
                "closed_loop_abscissa": self.closed_loop_abscissa,
            },
            "tol": self.tol,
        }


def certify_admissible(
    qss: StateSpace,
    f: CoprimeFactors,
    grid: FrequencyGrid | None = None,
    tol: float = 1e-6,
    cd: ConstraintData | None = None,
) -> Certificate:
    """Check membership of ``Q`` in the admissible class.

    (i) ``Q`` stable, (ii) ``(V + N Q)(inf)`` nonsingular, (iii) constraint
    residual on the grid, (iv) ``K(inf)`` orthogonal, (v) the assembled
    controller is physically realizable and internally stabilizing.
    """
    grid = grid or FrequencyGrid.default()
    mu = f.mu
    if qss.shape != (mu, mu):
        raise DimensionError("Q has the wrong size")
    absc = spectral_abscissa(qss.A)
    stable = bool(absc < 0)
    margin = float(np.linalg.svd(f.V.D + f.N.D @ qss.D, compute_uv=False)[-1])
    well_posed = margin > 1e-10

    cres = np.inf
    if stable:
        cd = cd or compute_constraint_data(f, grid)
        cres = constraint_residual(sample(qss, grid), cd, include_infinity=True)

    orth = np.inf
    pr_res = np.inf
    cl_absc = np.inf
    k = None
    if stable and well_posed:
        k = assemble_controller(ControllerMfd(f, qss))
        orth = float(np.linalg.norm(k.D.T @ k.D - np.eye(mu)))
        pr = check_physical_realizability(k, grid, tol)
        pr_res = max(pr.residual, pr.feedthrough_orth_residual)
        cl = check_internal_stability(f.p22, k)
        cl_absc = cl.abscissa
    return Certificate(
        stable=stable,
        q_abscissa=float(absc),
        well_posed=well_posed,
        well_posedness_margin=margin,
        constraint_ok=bool(cres <= tol),
        constraint_residual=float(cres),
        k_inf_orthogonal=bool(orth <= tol),
        k_inf_orthogonality_residual=float(orth),
        controller_pr=bool(pr_res <= tol),
        controller_pr_residual=float(pr_res),
        closed_loop_stable=bool(cl_absc < 0),
        closed_loop_abscissa=float(cl_absc),
        controller=k,
        tol=tol,
    )


@dataclass(frozen=True, eq=False)
class PrStateSpaceReport:
    feedthrough_residual: float
    coupling_residual: float
    theta: np.ndarray
    order: int

    @property
    def residual(self) -> float:
        return max(self.feedthrough_residual, self.coupling_residual)


def _stacked_t(qss: StateSpace, f: CoprimeFactors) -> StateSpace:
    """Realization of ``T = [U + M Q; V + N Q]``."""
    if f.structured:
        p22 = f.p22
        at = p22.A + p22.B @ f.F
        ct = p22.C + p22.D @ f.F
        nq, n = qss.n, at.shape[0]
        b2, d22 = p22.B, p22.D
        a = np.zeros((nq + 2 * n, nq + 2 * n))
        a[:nq, :nq] = qss.A
        a[nq:nq + n, :nq] = b2 @ qss.C
        a[nq:nq + n, nq:nq + n] = at
        a[nq + n:, nq + n:] = at
        b = np.vstack([qss.B, b2 @ qss.D, -f.L])
        c = np.block([[qss.C, f.F, f.F], [d22 @ qss.C, ct, ct]])
        d = np.vstack([qss.D, d22 @ qss.D + np.eye(d22.shape[0])])
        return StateSpace(a, b, c, d)
    return vstack(f.U, f.V) + vstack(f.M, f.N) @ qss


def youla_ss_pr_check(qss: StateSpace, f: CoprimeFactors, tol: float = 1e-9) -> PrStateSpaceReport:
    """State-space test of the constraint on ``Q``.

    With ``T = [U + M Q; V + N Q]`` and ``J_T = diag(J, -J)`` the constraint
    reads ``T~ J_T T = 0``.  On the controllable part of ``T``, solve
    ``Theta A + A* Theta + C* J_T C = 0`` and report ``||D* J_T D||`` and
    ``||B* Theta + D* J_T C||``.
    """
    if not is_hurwitz(qss.A):
        raise ValidationError("Q must be stable")
    t = _stacked_t(qss, f)
    t = _controllable_part(t, tol)
    mu = f.mu
    j = _jmat0(mu)
    jt = np.block([[j, np.zeros((mu, mu))], [np.zeros((mu, mu)), -j]])
    d_res = float(np.linalg.norm(t.D.T @ jt @ t.D))
    if t.n == 0:
        return PrStateSpaceReport(d_res, 0.0, np.zeros((0, 0)), 0)
    theta = solve_sylvester(t.A.T, t.A, -t.C.T @ jt @ t.C)
    b_res = float(np.linalg.norm(t.B.T @ theta + t.D.T @ jt @ t.C))
    return PrStateSpaceReport(d_res, b_res, theta, t.n)
