"""State-space realizations, transfer-matrix algebra and frequency grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionError,
    IllPosedInterconnectionError,
    PoleEvaluationError,
    SingularEquationError,
    ValidationError,
)
from .linalg import is_singular, solve_lyapunov

__all__ = [
    "StateSpace",
    "PartitionedPlant",
    "FrequencyGrid",
    "GridFunction",
    "evaluate",
    "freqresp",
    "sample",
    "conjugate",
    "series",
    "parallel",
    "negate",
    "inverse",
    "hstack",
    "vstack",
    "block",
    "static",
    "minimal",
    "is_hurwitz",
    "spectral_abscissa",
    "h2_norm_sq",
    "h2_norm_sq_grid",
    "hinf_norm_grid",
    "lft_lower",
    "max_grid_distance",
]


def _mat(x, rows=None, cols=None) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype.kind not in "fc":
        a = a.astype(float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1) if a.size else a.reshape(rows or 0, cols or 0)
    if a.size == 0 and rows is not None and cols is not None:
        a = np.zeros((rows, cols), dtype=a.dtype)
    return a


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Realization ``C (sI - A)^{-1} B + D`` of a proper rational matrix."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        d = _mat(self.D)
        p, m = d.shape
        a = np.asarray(self.A)
        n = a.shape[0] if a.ndim == 2 else 0
        a = _mat(self.A, n, n)
        b = _mat(self.B, n, m)
        c = _mat(self.C, p, n)
        if a.shape != (n, n) or b.shape != (n, m) or c.shape != (p, n):
            raise DimensionError(
                f"incompatible realization shapes A{a.shape} B{b.shape} C{c.shape} D{d.shape}"
            )
        for name, val in zip("ABCD", (a, b, c, d)):
            if not np.all(np.isfinite(val)):
                raise ValidationError(f"non-finite entries in {name}")
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def inputs(self) -> int:
        return self.D.shape[1]

    @property
    def outputs(self) -> int:
        return self.D.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape

    def __call__(self, s: complex) -> np.ndarray:
        return evaluate(self, s)

    def __neg__(self) -> "StateSpace":
        return negate(self)

    def __add__(self, other: "StateSpace") -> "StateSpace":
        return parallel(self, other)

    def __sub__(self, other: "StateSpace") -> "StateSpace":
        return parallel(self, negate(other))

    def __matmul__(self, other: "StateSpace") -> "StateSpace":
        return series(self, other)

    def subsystem(self, rows, cols) -> "StateSpace":
        return StateSpace(self.A, self.B[:, cols], self.C[rows, :], self.D[rows, cols])

    def to_dict(self) -> dict:
        return {k: np.asarray(getattr(self, k)).real.tolist() for k in "ABCD"}

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpace":
        return cls(*(np.asarray(d[k], dtype=float) for k in "ABCD"))


def static(d) -> StateSpace:
    d = _mat(d)
    return StateSpace(np.zeros((0, 0)), np.zeros((0, d.shape[1])), np.zeros((d.shape[0], 0)), d)


@dataclass(frozen=True, eq=False)
class PartitionedPlant:
    """Plant with inputs ordered ``(r, u)`` and outputs ordered ``(z, y)``."""

    sys: StateSpace
    m_r: int
    m_u: int
    p_z: int
    p_y: int

    def __post_init__(self):
        if self.m_r + self.m_u != self.sys.inputs or self.p_z + self.p_y != self.sys.outputs:
            raise DimensionError("partition sizes do not add up to the plant dimensions")
        if self.m_u != self.p_y:
            raise DimensionError("loop channel must be square (m_u == p_y)")

    @property
    def mu(self) -> int:
        return self.m_u

    def block(self, i: int, j: int) -> StateSpace:
        rows = slice(0, self.p_z) if i == 1 else slice(self.p_z, None)
        cols = slice(0, self.m_r) if j == 1 else slice(self.m_r, None)
        return self.sys.subsystem(rows, cols)

    @property
    def P11(self):
        return self.block(1, 1)

    @property
    def P12(self):
        return self.block(1, 2)

    @property
    def P21(self):
        return self.block(2, 1)

    @property
    def P22(self):
        return self.block(2, 2)


# -- evaluation ---------------------------------------------------------------


def evaluate(sys: StateSpace, s: complex) -> np.ndarray:
    """``C (sI - A)^{-1} B + D`` at a single complex point."""
    if sys.n == 0:
        return sys.D.astype(complex)
    eig = np.linalg.eigvals(sys.A)
    if np.min(np.abs(eig - s)) <= 1e-10 * (1.0 + abs(s)):
        raise PoleEvaluationError(f"s = {s} is (numerically) a pole")
    x = np.linalg.solve(s * np.eye(sys.n) - sys.A, sys.B)
    return sys.C @ x + sys.D


def freqresp(sys: StateSpace, omegas) -> np.ndarray:
    """Stack of ``G(i w)`` for each ``w``; shape ``(len(omegas), p, m)``."""
    w = np.asarray(omegas, dtype=float).ravel()
    p, m = sys.shape
    if sys.n == 0:
        return np.broadcast_to(sys.D.astype(complex), (w.size, p, m)).copy()
    lhs = 1j * w[:, None, None] * np.eye(sys.n)[None] - sys.A[None]
    x = np.linalg.solve(lhs, np.broadcast_to(sys.B, (w.size,) + sys.B.shape))
    return sys.C[None] @ x + sys.D[None]


def conjugate(sys: StateSpace) -> StateSpace:
    """Realization of ``G~(s) = G(-conj(s))^*``."""
    return StateSpace(-sys.A.T, -sys.C.T, sys.B.T, sys.D.T)


def series(g1: StateSpace, g2: StateSpace) -> StateSpace:
    """Product ``g1 * g2`` (signal passes through ``g2`` first)."""
    if g1.inputs != g2.outputs:
        raise DimensionError(f"cannot multiply {g1.shape} by {g2.shape}")
    a = np.block([[g2.A, np.zeros((g2.n, g1.n))], [g1.B @ g2.C, g1.A]])
    b = np.vstack([g2.B, g1.B @ g2.D])
    c = np.hstack([g1.D @ g2.C, g1.C])
    return StateSpace(a, b, c, g1.D @ g2.D)


def parallel(g1: StateSpace, g2: StateSpace) -> StateSpace:
    if g1.shape != g2.shape:
        raise DimensionError(f"cannot add {g1.shape} and {g2.shape}")
    a = np.block([[g1.A, np.zeros((g1.n, g2.n))], [np.zeros((g2.n, g1.n)), g2.A]])
    return StateSpace(a, np.vstack([g1.B, g2.B]), np.hstack([g1.C, g2.C]), g1.D + g2.D)


def negate(sys: StateSpace) -> StateSpace:
    return StateSpace(sys.A, sys.B, -sys.C, -sys.D)


def inverse(sys: StateSpace) -> StateSpace:
    if sys.D.shape[0] != sys.D.shape[1] or is_singular(sys.D):
        raise SingularEquationError("inverse needs a square nonsingular feedthrough")
    di = np.linalg.inv(sys.D)
    return StateSpace(sys.A - sys.B @ di @ sys.C, sys.B @ di, -di @ sys.C, di)


def _blockdiag(*mats):
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    dtype = np.result_type(*mats)
    out = np.zeros((rows, cols), dtype=dtype)
    i = j = 0
    for m in mats:
        out[i:i + m.shape[0], j:j + m.shape[1]] = m
        i += m.shape[0]
        j += m.shape[1]
    return out


def hstack(*systems: StateSpace) -> StateSpace:
    """``[G1, G2, ...]`` with a block-diagonal state."""
    p = systems[0].outputs
    if any(s.outputs != p for s in systems):
        raise DimensionError("hstack needs equal output counts")
    return StateSpace(
        _blockdiag(*(s.A for s in systems)),
        _blockdiag(*(s.B for s in systems)),
        np.hstack([s.C for s in systems]),
        np.hstack([s.D for s in systems]),
    )


def vstack(*systems: StateSpace) -> StateSpace:
    m = systems[0].inputs
    if any(s.inputs != m for s in systems):
        raise DimensionError("vstack needs equal input counts")
    return StateSpace(
        _blockdiag(*(s.A for s in systems)),
        np.vstack([s.B for s in systems]),
        _blockdiag(*(s.C for s in systems)),
        np.vstack([s.D for s in systems]),
    )


def block(rows: Sequence[Sequence[StateSpace]]) -> StateSpace:
    return vstack(*(hstack(*r) for r in rows))


# -- structural properties ----------------------------------------------------


def _controllable_basis(a, b, tol):
    """Orthogonal staircase; returns (Q, nc) with span Q[:, :nc] controllable."""
    n = a.shape[0]
    q = np.eye(n)
    at = a.copy()
    blk = b.copy()
    nc = 0
    scale = max(1.0, np.linalg.norm(np.hstack([a, b])))
    while nc < n and blk.size:
        u, s, _ = np.linalg.svd(blk)
        r = int(np.sum(s > tol * scale))
        if r == 0:
            break
        t = np.eye(n, dtype=np.result_type(at, u))
        t[nc:, nc:] = u
        at = t.conj().T @ at @ t
        q = q @ t
        blk = at[nc + r:, nc:nc + r]
        nc += r
    return q, nc


def _controllable_part(sys: StateSpace, tol: float) -> StateSpace:
    if sys.n == 0:
        return sys
    q, nc = _controllable_basis(sys.A, sys.B, tol)
    qc = q[:, :nc]
    return StateSpace(qc.conj().T @ sys.A @ qc, qc.conj().T @ sys.B, sys.C @ qc, sys.D)


def controllable_dimension(a, b, tol: float = 1e-10) -> int:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    return _controllable_basis(a, np.asarray(b, dtype=float).reshape(a.shape[0], -1), tol)[1]


def minimal(sys: StateSpace, tol: float = 1e-10) -> StateSpace:
    """Controllable-then-observable staircase reduction."""
    c = _controllable_part(sys, tol)
    dual = StateSpace(c.A.conj().T, c.C.conj().T, c.B.conj().T, c.D.conj().T)
    o = _controllable_part(dual, tol)
    return StateSpace(o.A.conj().T, o.C.conj().T, o.B.conj().T, o.D.conj().T)


def spectral_abscissa(a) -> float:
    a = np.atleast_2d(np.asarray(a))
    if a.size == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(a).real))


def is_hurwitz(a, margin: float = 0.0) -> bool:
    return spectral_abscissa(a) < -margin


# -- frequency grids ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Ordered frequencies symmetric about 0, optionally with ``w = inf``."""

    omegas: np.ndarray
    include_infinity: bool = True

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).ravel()
        if w.size == 0:
            raise ValidationError("empty frequency grid")
        if np.any(np.diff(w) <= 0):
            raise ValidationError("grid must be strictly increasing")
        if not np.allclose(w, -w[::-1], rtol=1e-12, atol=0.0):
            raise ValidationError("grid must be symmetric about 0")
        w.setflags(write=False)
        object.__setattr__(self, "omegas", w)

    @classmethod
    def logspace(cls, wmin=1e-2, wmax=1e3, points=200, include_zero=True, include_infinity=True):
        pos = np.logspace(np.log10(wmin), np.log10(wmax), points)
        parts = [-pos[::-1]] + ([np.zeros(1)] if include_zero else []) + [pos]
        return cls(np.concatenate(parts), include_infinity)

    @classmethod
    def default(cls) -> "FrequencyGrid":
        return cls.logspace()

    def __len__(self) -> int:
        return self.omegas.size

    @property
    def mirror_index(self) -> np.ndarray:
        """Index of ``-w`` for each ``w``."""
        return np.arange(len(self))[::-1]

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Composite-trapezoid weights on the (nonuniform) grid."""
        w = self.omegas
        if w.size == 1:
            return np.zeros(1)
        h = np.diff(w)
        q = np.zeros_like(w)
        q[:-1] += h / 2
        q[1:] += h / 2
        return q

    def restrict(self, mask) -> "FrequencyGrid":
        mask = np.asarray(mask, dtype=bool)
        mask = mask & mask[::-1]
        return FrequencyGrid(self.omegas[mask], self.include_infinity)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples ``F(i w)`` on a grid, shape ``(len(grid), p, m)``."""

    grid: FrequencyGrid
    values: np.ndarray
    value_at_infinity: np.ndarray | None = None
    real_rational: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 3 or v.shape[0] != len(self.grid):
            raise DimensionError(f"values must have shape (len(grid), p, m); got {v.shape}")
        object.__setattr__(self, "values", v)
        if self.value_at_infinity is not None:
            vi = np.asarray(self.value_at_infinity)
            if vi.shape != v.shape[1:]:
                raise DimensionError("value at infinity has the wrong shape")
            object.__setattr__(self, "value_at_infinity", vi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    def symmetry_residual(self) -> float:
        """``max |F(-i w) - conj(F(i w))|``; zero for real-rational samples."""
        v = self.values
        return float(np.max(np.abs(v[self.grid.mirror_index] - v.conj()))) if v.size else 0.0

    def with_values(self, values, value_at_infinity=None) -> "GridFunction":
        return GridFunction(self.grid, values, value_at_infinity, self.real_rational)

    @classmethod
    def constant(cls, grid: FrequencyGrid, value) -> "GridFunction":
        value = np.asarray(value)
        vals = np.broadcast_to(value.astype(complex), (len(grid),) + value.shape).copy()
        return cls(grid, vals, value.real.astype(float) if grid.include_infinity else None)


def sample(sys: StateSpace, grid: FrequencyGrid) -> GridFunction:
    """Evaluate ``sys`` on every grid point (and at infinity when requested)."""
    vals = freqresp(sys, grid.omegas)
    return GridFunction(grid, vals, sys.D.copy() if grid.include_infinity else None)


def _grid_entries(f: GridFunction) -> np.ndarray:
    if f.value_at_infinity is None:
        return f.values
    return np.concatenate([f.values, f.value_at_infinity[None].astype(complex)])


def max_grid_distance(f: GridFunction, g: GridFunction) -> float:
    """Grid sup of ``||F - G||_F`` (including the infinity sample when both carry one)."""
    d = np.linalg.norm(f.values - g.values, axis=(1, 2))
    out = float(np.max(d)) if d.size else 0.0
    if f.value_at_infinity is not None and g.value_at_infinity is not None:
        out = max(out, float(np.linalg.norm(f.value_at_infinity - g.value_at_infinity)))
    return out


# -- norms --------------------------------------------------------------------


def h2_norm_sq(sys: StateSpace) -> float:
    """``trace(B^T X B)`` with ``A^T X + X A + C^T C = 0``."""
    if np.any(sys.D != 0):
        raise ValidationError("H2 norm needs a strictly proper system (D = 0)")
    if sys.n == 0:
        return 0.0
    if not is_hurwitz(sys.A):
        raise ValidationError("H2 norm needs a Hurwitz A")
    x = solve_lyapunov(sys.A, sys.C.conj().T @ sys.C)
    return float(np.real(np.trace(sys.B.conj().T @ x @ sys.B)))


def h2_norm_sq_grid(f: GridFunction) -> float:
    """Trapezoidal ``(1/2pi) int ||F(i w)||_F^2 dw`` over the grid."""
    sq = np.sum(np.abs(f.values) ** 2, axis=(1, 2))
    return float(np.dot(f.grid.quadrature_weights, sq) / (2 * np.pi))


def hinf_norm_grid(f: GridFunction) -> float:
    vals = _grid_entries(f)
    if vals.shape[1] == 0 or vals.shape[2] == 0:
        return 0.0
    return float(np.max(np.linalg.svd(vals, compute_uv=False)[:, 0]))


# -- interconnection ----------------------------------------------------------


def lft_lower(plant: PartitionedPlant, k: StateSpace) -> StateSpace:
    """Realization of ``P11 + P12 K (I - P22 K)^{-1} P21``."""
    if k.inputs != plant.p_y or k.outputs != plant.m_u:
        raise DimensionError("controller does not match the loop channel")
    sys = plant.sys
    mr, pz = plant.m_r, plant.p_z
    a1 = sys.A
    b11, b12 = sys.B[:, :mr], sys.B[:, mr:]
    c11, c21 = sys.C[:pz], sys.C[pz:]
    d11, d12 = sys.D[:pz, :mr], sys.D[:pz, mr:]
    d21, d22 = sys.D[pz:, :mr], sys.D[pz:, mr:]
    a2, b2, c2, d2 = k.A, k.B, k.C, k.D
    loop = np.eye(plant.mu) - d2 @ d22
    if is_singular(loop):
        raise IllPosedInterconnectionError("I - D_K D22 is singular")
    dl = np.linalg.inv(loop)
    a = np.block(
        [
            [a1 + b12 @ dl @ d2 @ c21, b12 @ dl @ c2],
            [b2 @ d22 @ dl @ d2 @ c21 + b2 @ c21, a2 + b2 @ d22 @ dl @ c2],
        ]
    )
    b = np.vstack([b11 + b12 @ dl @ d2 @ d21, b2 @ d21 + b2 @ d22 @ dl @ d2 @ d21])
    c = np.hstack([c11 + d12 @ dl @ d2 @ c21, d12 @ dl @ c2])
    d = d11 + d12 @ dl @ d2 @ d21
    return StateSpace(a, b, c, d)
