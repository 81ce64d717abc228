"""Projected gradient descent for the coherent weighted H2 problem.

Each iteration takes the pointwise gradient, projects it onto the tangent
space of the constraint at every frequency of the passband, steps, and
pulls the result back onto the constraint set with Newton corrections.
The step is halved until the cost does not increase.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InitializationError, ProjectionSingularError
from ..linalg import nearest_symplectic_orthogonal, random_symplectic_orthogonal, is_singular
from ..lti import GridFunction, PartitionedPlant, freqresp
from ..youla import CoprimeFactors
from .constraint import (
    ConstraintData,
    _constraint,
    constraint_residual,
    newton_correction,
    project_tangent_batch,
    unstabilizability_check,
)
from .cost import AffineClosedLoop, h2_cost

__all__ = [
    "SynthesisProblem",
    "PgdOptions",
    "SynthesisState",
    "PgdResult",
    "passband_mask",
    "init_q_static",
    "InitResult",
    "pgd_run",
    "controller_from_q_inf",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SynthesisProblem:
    plant: PartitionedPlant
    factors: CoprimeFactors
    acl: AffineClosedLoop
    cd: ConstraintData

    @property
    def grid(self):
        return self.acl.grid


@dataclass(frozen=True)
class PgdOptions:
    alpha: float = 0.1
    max_iters: int = 200
    tol: float = 1e-8
    seed: int = 0
    passband_fraction: float = 1e-3
    residual_tol: float = 1e-6
    newton_tol: float = 1e-10
    newton_max: int = 8
    max_halvings: int = 20
    precondition: bool = True
    init_attempts: int = 64


@dataclass(frozen=True, eq=False)
class SynthesisState:
    Q: GridFunction
    cost: float
    constraint_residual: float
    alpha: float
    iteration: int
    mask: np.ndarray


@dataclass(frozen=True, eq=False)
class PgdResult:
    state: SynthesisState
    history: list = field(default_factory=list)
    converged: bool = False
    message: str = ""
    skipped_frequencies: int = 0


def passband_mask(acl: AffineClosedLoop, fraction: float = 1e-3) -> np.ndarray:
    """Frequencies where ``sigma_max(W_out(i w))`` is at least ``fraction`` of its grid peak."""
    vals = freqresp(acl.W_out, acl.grid.omegas)
    if vals.shape[1] == 0:
        return np.ones(len(acl.grid), dtype=bool)
    s = np.linalg.svd(vals, compute_uv=False)[:, 0]
    mask = s >= fraction * s.max()
    return mask & mask[acl.grid.mirror_index]


def _symmetrize(q: np.ndarray, mirror: np.ndarray) -> np.ndarray:
    return 0.5 * (q + np.conj(q[mirror]))


def _masked_residual(q, cd: ConstraintData, mask) -> float:
    c = _constraint(q[mask], cd.Phi.values[mask], cd.Lambda.values[mask], cd.Pi.values[mask])
    return float(np.max(np.linalg.norm(c, axis=(1, 2)), initial=0.0))


def _correct(q, cd: ConstraintData, mask, opts: PgdOptions):
    res = _masked_residual(q, cd, mask)
    for _ in range(opts.newton_max):
        if res <= opts.newton_tol:
            break
        q_new = newton_correction(q, cd.Phi.values, cd.Lambda.values, cd.Pi.values, mask)
        res_new = _masked_residual(q_new, cd, mask)
        if not np.isfinite(res_new) or res_new >= res:
            break
        q, res = q_new, res_new
    return q, res


# -- initialization -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InitResult:
    Q: GridFunction | None
    residual: float
    K_inf: np.ndarray | None
    message: str

    @property
    def ok(self) -> bool:
        return self.Q is not None


def controller_from_q_inf(f: CoprimeFactors, q_inf) -> np.ndarray:
    """``K(inf) = (U + M Q)(V + N Q)^{-1}`` at infinity."""
    num = f.U.D + f.M.D @ q_inf
    den = f.V.D + f.N.D @ q_inf
    return np.linalg.solve(den.T, num.T).T


def _q_from_k_inf(f: CoprimeFactors, k_inf) -> np.ndarray | None:
    lhs = f.M.D - k_inf @ f.N.D
    if is_singular(lhs):
        return None
    return np.linalg.solve(lhs, k_inf @ f.V.D - f.U.D)


def init_q_static(
    f: CoprimeFactors, cd: ConstraintData, seed: int = 0, attempts: int = 64, init_tol: float = 1e-8
) -> InitResult:
    """Search for a constant ``Q`` that satisfies the constraint on the whole grid.

    ``Q = 0`` is tried first; after that, random feedthroughs ``K_inf`` in
    ``Sp (intersect) O`` are drawn and ``(M - K_inf N)(inf) Q = (K_inf V - U)(inf)``
    is solved for a constant ``Q``.  Failure is returned, not raised.
    """
    grid = cd.grid
    mu = f.mu
    rng = np.random.default_rng(seed)
    best = (np.inf, None)

    def attempt(qc):
        q = GridFunction.constant(grid, qc)
        return constraint_residual(q, cd, include_infinity=True), q

    candidates = [np.zeros((mu, mu))]
    for _ in range(attempts):
        k = random_symplectic_orthogonal(mu, rng)
        qc = _q_from_k_inf(f, k)
        if qc is not None:
            candidates.append(qc)
    for qc in candidates:
        if is_singular(f.V.D + f.N.D @ qc):
            continue
        res, q = attempt(qc)
        if res < best[0]:
            best = (res, q)
        if res <= init_tol:
            k_inf = controller_from_q_inf(f, qc)
            return InitResult(q, res, k_inf, "constant Q satisfies the constraint")
    verdict = unstabilizability_check(f.p22, grid)
    msg = f"no constant Q found (best residual {best[0]:.3g})"
    if verdict.positive:
        msg += "; " + verdict.explanation
    return InitResult(None, float(best[0]), None, msg)


# -- driver -------------------------------------------------------------------


def _preconditioner(acl: AffineClosedLoop, usable) -> np.ndarray:
    t1 = np.linalg.eigvalsh(acl.hatT1.values)[:, -1]
    t2 = np.linalg.eigvalsh(acl.hatT2.values)[:, -1]
    curv = t1 * t2
    s = np.zeros_like(curv)
    good = usable & (curv > 1e-300)
    s[good] = 1.0 / curv[good]
    return s


def _finalize_infinity(f: CoprimeFactors, q: np.ndarray, grid, mask) -> np.ndarray:
    idx = np.flatnonzero(mask)
    top = idx[np.argmax(np.abs(grid.omegas[idx]))]
    q_inf = q[top].real.copy()
    try:
        k_inf = controller_from_q_inf(f, q_inf)
    except np.linalg.LinAlgError:
        return q_inf
    k_pol = nearest_symplectic_orthogonal(k_inf)
    if np.linalg.norm(k_inf - k_pol) < 0.1:
        q_new = _q_from_k_inf(f, k_pol)
        if q_new is not None:
            return q_new
    return q_inf


def pgd_run(problem: SynthesisProblem, q0: GridFunction | None = None, options: PgdOptions | None = None) -> PgdResult:
    """Constrained descent on ``E(Q)`` over the passband frequencies.

    ``q0`` must satisfy the constraint (to ``residual_tol``, after at most a
    few Newton corrections); when omitted, :func:`init_q_static` is used.
    The value at infinity is set from the highest passband frequency and,
    if the resulting ``K(inf)`` is within 0.1 of ``Sp (intersect) O``, replaced by
    the one coming from its orthogonal polar factor.
    """
    opts = options or PgdOptions()
    acl, cd, f = problem.acl, problem.cd, problem.factors
    grid = acl.grid
    mirror = grid.mirror_index
    if q0 is None:
        init = init_q_static(f, cd, opts.seed, opts.init_attempts)
        if not init.ok:
            raise InitializationError(init.message)
        q0 = init.Q
    mask = passband_mask(acl, opts.passband_fraction)

    q = _symmetrize(q0.values.copy(), mirror)
    q, res = _correct(q, cd, mask, opts)
    if res > opts.residual_tol:
        raise InitializationError(f"initial Q violates the constraint (residual {res:.3g})")
    qf = q0.with_values(q, q0.value_at_infinity)
    cost = h2_cost(qf, acl, check=True)

    history = [{"iteration": 0, "cost": cost, "residual": res, "alpha": 0.0, "step": 0.0}]
    converged = False
    message = "iteration limit reached"
    it = 0
    skipped = 0
    for it in range(1, opts.max_iters + 1):
        g = 2.0 * (acl.hatT0.values + acl.hatT1.values @ q @ acl.hatT2.values)
        w = cd.Lambda.values + cd.Pi.values @ q
        x, ok = project_tangent_batch(g, 1j * w)
        usable = ok & mask
        skipped = int(np.sum(mask & ~ok))
        if not np.any(usable):
            raise ProjectionSingularError("projection is singular at every passband frequency")
        scale = _preconditioner(acl, usable) if opts.precondition else usable.astype(float)
        d = -scale[:, None, None] * x

        a = opts.alpha
        accepted = False
        for _ in range(opts.max_halvings + 1):
            qc = _symmetrize(q + a * d, mirror)
            qc, rc = _correct(qc, cd, mask, opts)
            ec = h2_cost(qf.with_values(qc, qf.value_at_infinity), acl, check=False)
            if rc <= opts.residual_tol and ec <= cost:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            converged = True
            message = "no descent step found (stationary to working precision)"
            it -= 1
            break
        step = float(np.max(np.linalg.norm((qc - q)[mask], axis=(1, 2)), initial=0.0))
        q, cost, res = qc, ec, rc
        history.append({"iteration": it, "cost": cost, "residual": res, "alpha": a, "step": step})
        log.debug("iter %d  E=%.10g  res=%.3g  alpha=%.3g  step=%.3g", it, cost, res, a, step)
        if step < opts.tol:
            converged = True
            message = "step below tolerance"
            break

    q_inf = _finalize_infinity(f, q, grid, mask) if grid.include_infinity else None
    qf = q0.with_values(q, q_inf)
    state = SynthesisState(qf, cost, res, opts.alpha, it, mask)
    return PgdResult(state, history, converged, message, skipped)
