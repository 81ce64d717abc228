"""The (J, J)-unitarity constraint on the Youla parameter, sampled on a grid.

With ``K = (U + M Q)(V + N Q)^{-1}`` the controller is (J, J)-unitary iff::

    Phi + Q~ Lambda - Lambda~ Q + Q~ Pi Q = 0
    Phi    = U~ J U - V~ J V
    Lambda = M~ J U - N~ J V
    Pi     = M~ J M - N~ J N

``Phi`` and ``Pi`` are skew-Hermitian on the imaginary axis (``J`` is skew),
and so is the whole left-hand side.  Its variation in the direction ``X``
is ``X* W - W* X`` with ``W = Lambda + Pi Q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ProjectionSingularError
from ..linalg import _jmat0
from ..lti import FrequencyGrid, GridFunction, StateSpace, freqresp
from ..youla import CoprimeFactors

__all__ = [
    "ConstraintData",
    "compute_constraint_data",
    "constraint_values",
    "constraint_residual",
    "NoGoVerdict",
    "unstabilizability_check",
    "project_tangent",
    "project_tangent_batch",
    "newton_correction",
]

_RANK_TOL = 1e-8


def _h(x):
    return np.conj(np.swapaxes(x, -1, -2))


@dataclass(frozen=True, eq=False)
class ConstraintData:
    Phi: GridFunction
    Lambda: GridFunction
    Pi: GridFunction

    @property
    def grid(self) -> FrequencyGrid:
        return self.Phi.grid

    def skew_residual(self) -> float:
        """Largest deviation of ``Phi`` and ``Pi`` samples from skew-Hermitian."""
        out = 0.0
        for f in (self.Phi, self.Pi):
            out = max(out, float(np.max(np.abs(f.values + _h(f.values)), initial=0.0)))
        return out


def _forms(m, n, u, v, j):
    mh, nh, uh, vh = _h(m), _h(n), _h(u), _h(v)
    phi = uh @ j @ u - vh @ j @ v
    lam = mh @ j @ u - nh @ j @ v
    pi = mh @ j @ m - nh @ j @ n
    return phi, lam, pi


def compute_constraint_data(f: CoprimeFactors, grid: FrequencyGrid) -> ConstraintData:
    mu = f.mu
    j = _jmat0(mu)
    w = grid.omegas
    vals = _forms(*(freqresp(s, w) for s in (f.M, f.N, f.U, f.V)), j)
    if grid.include_infinity:
        inf = _forms(*(s.D[None].astype(float) for s in (f.M, f.N, f.U, f.V)), j)
        inf = [x[0].real for x in inf]
    else:
        inf = [None, None, None]
    phi, lam, pi = (GridFunction(grid, v, i) for v, i in zip(vals, inf))
    return ConstraintData(phi, lam, pi)


def _constraint(q, phi, lam, pi):
    qh = _h(q)
    return phi + qh @ lam - _h(lam) @ q + qh @ pi @ q


def constraint_values(q: GridFunction, cd: ConstraintData) -> GridFunction:
    """Pointwise ``Phi + Q* Lambda - Lambda* Q + Q* Pi Q``."""
    if q.shape != cd.Phi.shape or len(q.grid) != len(cd.grid):
        raise DimensionError("Q does not match the constraint data")
    vals = _constraint(q.values, cd.Phi.values, cd.Lambda.values, cd.Pi.values)
    inf = None
    if q.value_at_infinity is not None and cd.Phi.value_at_infinity is not None:
        inf = _constraint(
            q.value_at_infinity, cd.Phi.value_at_infinity, cd.Lambda.value_at_infinity, cd.Pi.value_at_infinity
        )
    return GridFunction(q.grid, vals, inf)


def constraint_residual(q: GridFunction, cd: ConstraintData, include_infinity: bool = False) -> float:
    """Grid max of the Frobenius norm of the constraint."""
    c = constraint_values(q, cd)
    out = float(np.max(np.linalg.norm(c.values, axis=(1, 2)), initial=0.0))
    if include_infinity and c.value_at_infinity is not None:
        out = max(out, float(np.linalg.norm(c.value_at_infinity)))
    return out


@dataclass(frozen=True)
class NoGoVerdict:
    positive: bool
    residual: float
    tol: float
    explanation: str

    def __bool__(self) -> bool:
        return self.positive


def unstabilizability_check(p22: StateSpace, grid: FrequencyGrid | None = None, tol: float = 1e-8) -> NoGoVerdict:
    """Detect loop blocks that no coherent controller can stabilize.

    If ``P22`` is itself (J, J)-unitary, the closed loop with any (J, J)-unitary
    controller has a spectrum symmetric about the imaginary axis, so it is
    never Hurwitz.
    """
    if p22.inputs != p22.outputs:
        raise DimensionError("loop block must be square")
    grid = grid or FrequencyGrid.default()
    j = _jmat0(p22.inputs)
    vals = freqresp(p22, grid.omegas)
    res = float(np.max(np.linalg.norm(_h(vals) @ j @ vals - j, axis=(1, 2)), initial=0.0))
    if grid.include_infinity:
        res = max(res, float(np.linalg.norm(p22.D.T @ j @ p22.D - j)))
    if res <= tol:
        msg = (
            "P22 is (J,J)-unitary: every closed loop with a physically realizable "
            "controller has a spectrum symmetric about the imaginary axis, so no "
            "coherent linear controller can stabilize this plant"
        )
        return NoGoVerdict(True, res, tol, msg)
    return NoGoVerdict(False, res, tol, "P22 is not (J,J)-unitary; the no-go obstruction does not apply")


def _sylvester_herm(g, rhs):
    """Solve ``Y G + G Y = rhs`` for stacks of Hermitian PSD ``G`` (eigenbasis)."""
    lam, v = np.linalg.eigh(g)
    r = _h(v) @ rhs @ v
    y = r / (lam[..., :, None] + lam[..., None, :])
    y = v @ y @ _h(v)
    return 0.5 * (y + _h(y))


def project_tangent(g, w, rank_tol: float = _RANK_TOL) -> np.ndarray:
    """Orthogonal projection of ``g`` onto ``{X : X* W + W* X = 0}``.

    Minimizes ``||X - g||_F`` under the constraint (real inner product
    ``Re tr``).  The minimizer is ``X = g + W Y`` with Hermitian ``Y``
    solving ``Y (W* W) + (W* W) Y = -(g* W + W* g)``.

    Raises
    ------
    ProjectionSingularError
        If ``sigma_min(W) <= rank_tol``.
    """
    g = np.asarray(g, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.linalg.svd(w, compute_uv=False)[-1] <= rank_tol:
        raise ProjectionSingularError("W is rank deficient at this frequency")
    return _project(g[None], w[None])[0]


def _project(g, w):
    gram = _h(w) @ w
    rhs = -(_h(g) @ w + _h(w) @ g)
    return g + w @ _sylvester_herm(gram, rhs)


def project_tangent_batch(g: np.ndarray, w: np.ndarray, rank_tol: float = _RANK_TOL):
    """Vectorized :func:`project_tangent`; singular frequencies give ``X = 0``.

    Returns the projected stack and a boolean mask of usable frequencies.
    """
    smin = np.linalg.svd(w, compute_uv=False)[:, -1]
    ok = smin > rank_tol
    out = np.zeros_like(g, dtype=complex)
    if np.any(ok):
        out[ok] = _project(g[ok], w[ok])
    return out, ok


def newton_correction(q: np.ndarray, phi, lam, pi, mask=None, rank_tol: float = _RANK_TOL) -> np.ndarray:
    """One Newton step toward the constraint set, per frequency.

    The linearization at ``Q`` is ``d* W - W* d = -C(Q)`` with
    ``W = Lambda + Pi Q``.  The minimum-norm solution is ``d = i W Y`` with
    Hermitian ``Y`` solving ``Y (W* W) + (W* W) Y = -i C(Q)``.
    """
    c = _constraint(q, phi, lam, pi)
    w = lam + pi @ q
    smin = np.linalg.svd(w, compute_uv=False)[:, -1]
    ok = smin > rank_tol
    if mask is not None:
        ok &= mask
    out = q.copy()
    if np.any(ok):
        wk = w[ok]
        y = _sylvester_herm(_h(wk) @ wk, -1j * c[ok])
        out[ok] = q[ok] + 1j * wk @ y
    return out
