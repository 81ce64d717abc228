"""Affine closed-loop map ``G = T0 + T1 Q T2`` and the weighted costs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, WeightingError
from ..lti import (
    FrequencyGrid,
    GridFunction,
    PartitionedPlant,
    StateSpace,
    h2_norm_sq_grid,
    hinf_norm_grid,
    is_hurwitz,
    lft_lower,
    sample,
    static,
)
from ..youla import CoprimeFactors, ControllerMfd, assemble_controller

__all__ = [
    "AffineClosedLoop",
    "closed_loop_affine",
    "inner",
    "h2_cost",
    "h2_cost_expansion",
    "gradient",
    "hinf_cost",
    "closed_loop_costs",
]


def _h(x):
    return np.conj(np.swapaxes(x, -1, -2))


@dataclass(frozen=True, eq=False)
class AffineClosedLoop:
    """``G(Q) = T0 + T1 Q T2`` with weighted versions ``bT0 = Wout T0 Win``,
    ``bT1 = Wout T1``, ``bT2 = T2 Win`` and their grid samples."""

    T0: StateSpace
    T1: StateSpace
    T2: StateSpace
    W_in: StateSpace
    W_out: StateSpace
    grid: FrequencyGrid
    bT0: GridFunction
    bT1: GridFunction
    bT2: GridFunction

    @property
    def hatT0(self) -> GridFunction:
        v = _h(self.bT1.values) @ self.bT0.values @ _h(self.bT2.values)
        return GridFunction(self.grid, v)

    @property
    def hatT1(self) -> GridFunction:
        b = self.bT1.values
        return GridFunction(self.grid, _h(b) @ b)

    @property
    def hatT2(self) -> GridFunction:
        b = self.bT2.values
        return GridFunction(self.grid, b @ _h(b))

    def weighted(self, q: GridFunction) -> GridFunction:
        """Samples of ``bT0 + bT1 Q bT2``."""
        vals = self.bT0.values + self.bT1.values @ q.values @ self.bT2.values
        inf = None
        if q.value_at_infinity is not None and self.bT0.value_at_infinity is not None:
            inf = self.bT0.value_at_infinity + self.bT1.value_at_infinity @ q.value_at_infinity @ self.bT2.value_at_infinity
        return GridFunction(self.grid, vals, inf)


def closed_loop_affine(
    plant: PartitionedPlant,
    f: CoprimeFactors,
    W_in: StateSpace | None = None,
    W_out: StateSpace | None = None,
    grid: FrequencyGrid | None = None,
) -> AffineClosedLoop:
    """Affine parameterization of the closed loop in the Youla parameter.

    ``T0`` is the closed loop at ``Q = 0`` (controller ``U V^{-1}``), while
    ``T1 = P12 M`` and ``T2 = Mhat P21`` share the plant state with the
    factors, so their realizations are stable by construction.
    """
    grid = grid or FrequencyGrid.default()
    W_in = W_in if W_in is not None else static(np.eye(plant.m_r))
    W_out = W_out if W_out is not None else static(np.eye(plant.p_z))
    if W_in.shape != (plant.m_r, plant.m_r) or W_out.shape != (plant.p_z, plant.p_z):
        raise DimensionError("weights must be square and match the r and z channels")
    if not (is_hurwitz(W_in.A) and is_hurwitz(W_out.A)):
        raise WeightingError("weights must be stable")
    if f.p22.shape != plant.P22.shape:
        raise DimensionError("factors do not match the plant loop block")

    sys = plant.sys
    mr, pz = plant.m_r, plant.p_z
    b1, b2 = sys.B[:, :mr], sys.B[:, mr:]
    c1, c2 = sys.C[:pz], sys.C[pz:]
    d12, d21 = sys.D[:pz, mr:], sys.D[pz:, :mr]

    # left unreduced: near cancellations in repaired factors make truncation lossy
    k0 = assemble_controller(ControllerMfd(f, static(np.zeros((f.mu, f.mu)))), reduce=False)
    t0 = lft_lower(plant, k0)
    if f.structured and f.M.n == sys.n:
        t1 = StateSpace(sys.A + b2 @ f.F, b2, c1 + d12 @ f.F, d12)
        t2 = StateSpace(sys.A + f.L @ c2, b1 + f.L @ d21, c2, d21)
    else:
        t1 = plant.P12 @ f.M
        t2 = f.Mhat @ plant.P21

    bt0 = sample(W_out @ t0 @ W_in, grid)
    bt1 = sample(W_out @ t1, grid)
    bt2 = sample(t2 @ W_in, grid)
    return AffineClosedLoop(t0, t1, t2, W_in, W_out, grid, bt0, bt1, bt2)


def inner(x: GridFunction, y: GridFunction, mask=None) -> complex:
    """Grid quadrature of ``(1/2pi) int tr(X* Y) dw``."""
    q = x.grid.quadrature_weights
    if mask is not None:
        q = q * mask
    tr = np.einsum("kij,kij->k", np.conj(x.values), y.values)
    return complex(np.dot(q, tr) / (2 * np.pi))


def _check_decay(acl: AffineClosedLoop, q: GridFunction) -> None:
    d0 = acl.bT0.value_at_infinity
    if d0 is None:
        return
    d = d0
    if q.value_at_infinity is not None:
        d = d0 + acl.bT1.value_at_infinity @ q.value_at_infinity @ acl.bT2.value_at_infinity
    if np.linalg.norm(d) > 1e-12:
        raise WeightingError(
            "weighted closed loop is not strictly proper; the H2 cost is infinite "
            "(use a strictly proper output or input weight)"
        )


def h2_cost(q: GridFunction, acl: AffineClosedLoop, check: bool = True) -> float:
    """``||bT0 + bT1 Q bT2||_2^2`` by trapezoidal quadrature on the grid."""
    if check:
        _check_decay(acl, q)
    return h2_norm_sq_grid(acl.weighted(q))


def h2_cost_expansion(q: GridFunction, acl: AffineClosedLoop) -> float:
    """The same cost through ``||bT0||^2 + 2 Re<hatT0, Q> + <Q, hatT1 Q hatT2>``."""
    t1, t2 = acl.hatT1.values, acl.hatT2.values
    quad = q.with_values(t1 @ q.values @ t2)
    e0 = h2_norm_sq_grid(acl.bT0)
    return float(e0 + 2 * inner(acl.hatT0, q).real + inner(q, quad).real)


def gradient(q: GridFunction, acl: AffineClosedLoop) -> GridFunction:
    """``dE = 2 (hatT0 + hatT1 Q hatT2)``; the first variation is ``Re<dE, dQ>``."""
    t0, t1, t2 = acl.hatT0.values, acl.hatT1.values, acl.hatT2.values
    return GridFunction(acl.grid, 2.0 * (t0 + t1 @ q.values @ t2))


def hinf_cost(q: GridFunction, acl: AffineClosedLoop) -> float:
    return hinf_norm_grid(acl.weighted(q))


def closed_loop_costs(
    plant: PartitionedPlant,
    k: StateSpace,
    W_in: StateSpace | None = None,
    W_out: StateSpace | None = None,
    grid: FrequencyGrid | None = None,
) -> dict:
    """Weighted H2 (grid quadrature) and H-infinity (grid sup) of ``LFT(P, K)``.

    The H2 value is ``inf`` when the weighted loop is not strictly proper.
    """
    grid = grid or FrequencyGrid.default()
    W_in = W_in if W_in is not None else static(np.eye(plant.m_r))
    W_out = W_out if W_out is not None else static(np.eye(plant.p_z))
    g = W_out @ lft_lower(plant, k) @ W_in
    s = sample(g, grid)
    h2 = h2_norm_sq_grid(s) if np.linalg.norm(g.D) <= 1e-12 else float("inf")
    return {"h2": h2, "hinf": hinf_norm_grid(s), "samples": s}
