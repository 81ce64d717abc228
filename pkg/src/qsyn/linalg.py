"""Dense matrix utilities: symplectic forms, Sylvester solves, group tests.

Everything here works on small dense ``numpy`` arrays (orders up to a few
tens).  Real matrices are the common case; complex input is accepted where
it makes sense (Sylvester equations, spectra).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SingularEquationError, ValidationError

__all__ = [
    "jmat",
    "solve_sylvester",
    "solve_lyapunov",
    "SkewFactorization",
    "skew_cholesky",
    "GroupReport",
    "is_symplectic_orthogonal",
    "spectrum_symmetric_about_imaginary_axis",
    "is_singular",
    "random_symplectic_orthogonal",
    "nearest_symplectic_orthogonal",
]

_SINGULAR_RTOL = 1e-12
_KRON_MAX_ORDER = 30


def jmat(order: int) -> np.ndarray:
    """Return ``J_r = I_{r/2} (x) [[0, 1], [-1, 0]]`` for even ``r``."""
    if order < 2 or order % 2:
        raise DimensionError(f"symplectic form needs an even order >= 2, got {order}")
    return np.kron(np.eye(order // 2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _jmat0(order: int) -> np.ndarray:
    # zero-width channels show up with static or empty systems
    return np.zeros((0, 0)) if order == 0 else jmat(order)


def is_singular(a: np.ndarray, rtol: float = _SINGULAR_RTOL) -> bool:
    """True when ``sigma_min <= rtol * sigma_max`` (empty matrices are regular)."""
    a = np.asarray(a)
    if a.size == 0:
        return False
    s = np.linalg.svd(a, compute_uv=False)
    return bool(s[-1] <= rtol * max(s[0], np.finfo(float).tiny))


def solve_sylvester(a, b, c) -> np.ndarray:
    """Solve ``A X + X B = C``.

    Orders up to 30 use the Kronecker-product system directly; larger
    problems fall back to Bartels-Stewart from scipy.

    Raises
    ------
    SingularEquationError
        When ``spec(A)`` and ``spec(-B)`` (numerically) intersect.
    """
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    c = np.asarray(c)
    n, m = a.shape[0], b.shape[0]
    if a.shape != (n, n) or b.shape != (m, m):
        raise DimensionError("Sylvester coefficients must be square")
    c = c.reshape(n, m)
    dtype = np.result_type(a, b, c, float)
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=dtype)

    if max(n, m) <= _KRON_MAX_ORDER:
        # column-major vec: vec(AX + XB) = (I (x) A + B^T (x) I) vec(X)
        k = np.kron(np.eye(m), a) + np.kron(b.T, np.eye(n))
        if is_singular(k):
            raise SingularEquationError("Sylvester operator is singular: spec(A) meets spec(-B)")
        x = np.linalg.solve(k, c.reshape(-1, order="F")).reshape((n, m), order="F")
    else:
        ea = np.linalg.eigvals(a)
        eb = np.linalg.eigvals(b)
        gap = np.min(np.abs(ea[:, None] + eb[None, :]))
        scale = 1.0 + np.linalg.norm(a, 2) + np.linalg.norm(b, 2)
        if gap <= 1e-10 * scale:
            raise SingularEquationError("Sylvester operator is singular: spec(A) meets spec(-B)")
        x = scipy.linalg.solve_sylvester(a, b, c)
    return x.astype(dtype, copy=False)


def solve_lyapunov(a, q) -> np.ndarray:
    """Solve ``A^H X + X A + Q = 0``."""
    a = np.atleast_2d(np.asarray(a))
    return solve_sylvester(a.conj().T, a, -np.asarray(q))


@dataclass(frozen=True)
class SkewFactorization:
    theta: np.ndarray
    sigma: np.ndarray

    @property
    def residual(self) -> float:
        n = self.theta.shape[0]
        return float(np.linalg.norm(self.sigma @ _jmat0(n) @ self.sigma.T - self.theta))


def skew_cholesky(theta, tol: float = 1e-10) -> SkewFactorization:
    """Factor a nonsingular real skew matrix as ``Theta = Sigma J Sigma^T``.

    ``i Theta`` is Hermitian with eigenvalues ``+-delta_k``; each
    eigenvector for ``+delta_k`` supplies an orthonormal real pair that
    block-diagonalizes ``Theta`` into ``[[0, delta_k], [-delta_k, 0]]``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValidationError("theta must be square")
    n = theta.shape[0]
    if n == 0:
        return SkewFactorization(theta, np.zeros((0, 0)))
    scale = max(np.linalg.norm(theta), 1.0)
    if np.linalg.norm(theta + theta.T) > tol * scale:
        raise ValidationError("theta is not skew-symmetric")
    if n % 2:
        raise ValidationError("a nonsingular skew matrix has even order")

    w, v = np.linalg.eigh(1j * theta)
    half = n // 2
    deltas = w[half:]
    if deltas[0] <= _SINGULAR_RTOL * deltas[-1]:
        raise ValidationError("theta is singular")
    cols = []
    for k in range(half):
        vec = v[:, half + k] * np.sqrt(2.0)
        # fix the free phase: largest entry becomes positive imaginary
        big = vec[np.argmax(np.abs(vec))]
        vec = vec * (1j * np.conj(big) / abs(big))
        # Theta x = delta y, Theta y = -delta x for vec = x + i y
        cols.extend([vec.imag, vec.real])
    o = np.column_stack(cols)
    sigma = o * np.repeat(np.sqrt(deltas), 2)[None, :]
    return SkewFactorization(theta, sigma)


@dataclass(frozen=True)
class GroupReport:
    """Membership residuals for ``Sp(m) (intersect) O(m)``."""

    orthogonality_residual: float
    symplectic_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.orthogonality_residual <= self.tol and self.symplectic_residual <= self.tol

    def __bool__(self) -> bool:
        return self.ok


def is_symplectic_orthogonal(d, tol: float = 1e-8) -> GroupReport:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] % 2:
        raise DimensionError(f"expected an even-order square matrix, got shape {d.shape}")
    m = d.shape[0]
    j = _jmat0(m)
    return GroupReport(
        orthogonality_residual=float(np.linalg.norm(d.T @ d - np.eye(m))),
        symplectic_residual=float(np.linalg.norm(d.T @ j @ d - j)),
        tol=tol,
    )


def spectrum_symmetric_about_imaginary_axis(a, tol: float | None = None) -> bool:
    """Check that ``spec(A)`` is invariant under ``lambda -> -conj(lambda)``.

    Eigenvalues are matched greedily to their nearest unused mirror image.
    The default tolerance is ``1e-8 * (1 + spectral radius)``.
    """
    a = np.atleast_2d(np.asarray(a))
    if a.size == 0:
        return True
    lam = np.linalg.eigvals(a)
    if tol is None:
        tol = 1e-8 * (1.0 + np.max(np.abs(lam)))
    mirror = list(-np.conj(lam))
    for x in sorted(lam, key=lambda z: (z.real, z.imag)):
        dist = [abs(x - y) for y in mirror]
        k = int(np.argmin(dist))
        if dist[k] > tol:
            return False
        mirror.pop(k)
    return True


def random_symplectic_orthogonal(m: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Exponential of a random generator of the Lie algebra of ``Sp(m) (intersect) O(m)``."""
    j = jmat(m)
    x = rng.standard_normal((m, m)) * scale
    x = x - x.T
    # skew generators commuting with J
    x = 0.5 * (x - j @ x @ j)
    return scipy.linalg.expm(x)


def nearest_symplectic_orthogonal(k) -> np.ndarray:
    """Orthogonal polar factor of ``k``.

    For symplectic ``k`` the polar factor is again symplectic, so this is the
    projection used to pull near-passive feedthroughs onto ``Sp (intersect) O``.
    """
    u, _, vh = np.linalg.svd(np.asarray(k, dtype=float))
    return u @ vh
