"""Stabilizing-controller machinery for the loop block ``P22``.

Doubly coprime factorizations built from a state-feedback gain ``F`` and an
observer gain ``L``, the general Bezout identity and its repair, and the
Youla parameterization ``K = (U + M Q)(V + N Q)^{-1}`` in its right, left
and LFT forms.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConditioningError,
    DimensionError,
    IllPosedInterconnectionError,
    SingularEquationError,
    UncontrollableError,
    ValidationError,
    WellPosednessError,
)
from .linalg import is_singular, solve_sylvester
from .lti import (
    FrequencyGrid,
    PartitionedPlant,
    StateSpace,
    _controllable_basis,
    freqresp,
    hstack,
    inverse,
    is_hurwitz,
    minimal,
    spectral_abscissa,
    vstack,
)

__all__ = [
    "default_pole_targets",
    "place_poles",
    "stabilizing_gains",
    "CoprimeFactors",
    "coprime_factorize",
    "BezoutReport",
    "independent_factors",
    "check_bezout",
    "repair_general_bezout",
    "ControllerMfd",
    "assemble_controller",
    "oy_system",
    "lft_from_mfd",
    "mfd_from_lft",
    "StabilityReport",
    "check_internal_stability",
    "youla_parameter",
    "random_stable",
]

_STAIRCASE_TOL = 1e-10


# -- pole placement -----------------------------------------------------------


def default_pole_targets(n: int, avoid=None) -> np.ndarray:
    """``-1 - j/2`` for ``j = 0..n-1``, shifted left if any target hits ``avoid``."""
    t = -1.0 - 0.5 * np.arange(n)
    if avoid is None or n == 0:
        return t
    avoid = np.asarray(avoid).ravel()
    shift = 0.0
    while avoid.size and np.min(np.abs((t + shift)[:, None] - avoid[None, :])) < 1e-6:
        shift -= 0.137
    return t + shift


def _real_block(targets) -> np.ndarray:
    """Real matrix with the given (conjugation-closed) spectrum."""
    targets = np.asarray(targets, dtype=complex).ravel()
    blocks = []
    used = np.zeros(targets.size, dtype=bool)
    for i, z in enumerate(targets):
        if used[i]:
            continue
        used[i] = True
        if abs(z.imag) <= 1e-12 * (1.0 + abs(z)):
            blocks.append(np.array([[z.real]]))
            continue
        cand = [k for k in range(targets.size) if not used[k] and abs(targets[k] - np.conj(z)) <= 1e-9 * (1.0 + abs(z))]
        if not cand:
            raise ValidationError("pole targets must be closed under conjugation")
        used[cand[0]] = True
        blocks.append(np.array([[z.real, z.imag], [-z.imag, z.real]]))
    n = targets.size
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def _place_controllable(a, b, targets, rng, max_tries):
    n, k = b.shape
    lam = _real_block(targets)
    best = None
    for _ in range(max_tries):
        g = rng.standard_normal((k, n))
        try:
            x = solve_sylvester(a, -lam, -b @ g)
        except SingularEquationError as exc:
            raise ValidationError("pole targets intersect spec(A)") from exc
        cond = np.linalg.cond(x)
        if cond < 1e10 and (best is None or cond < best[0]):
            best = (cond, g @ np.linalg.inv(x))
    if best is None:
        raise ConditioningError(f"pole placement failed after {max_tries} attempts (ill-conditioned X)")
    return best[1]


def place_poles(a, b, targets=None, rng: np.random.Generator | None = None, max_tries: int = 5) -> np.ndarray:
    """Gain ``F`` with ``spec(A + B F)`` equal to ``targets``.

    Sylvester approach: for a random ``G`` solve ``A X - X Lambda = -B G`` and
    take ``F = G X^{-1}``.  ``max_tries`` draws of ``G`` are made and the
    best-conditioned ``X`` wins.  Uncontrollable modes are left in place; they must
    already be stable, otherwise :class:`UncontrollableError` is raised.
    Only as many targets as there are controllable states are used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0:
        return np.zeros((b.shape[1] if b.ndim == 2 else 0, 0))
    a = np.atleast_2d(a)
    n = a.shape[0]
    b = b.reshape(n, -1)
    rng = rng if rng is not None else np.random.default_rng(0)
    q, nc = _controllable_basis(a, b, _STAIRCASE_TOL)
    at = q.T @ a @ q
    if nc < n and not is_hurwitz(at[nc:, nc:]):
        raise UncontrollableError("(A, B) is not stabilizable")
    if nc == 0:
        return np.zeros((b.shape[1], n))
    if targets is None:
        targets = default_pole_targets(nc, np.linalg.eigvals(at[:nc, :nc]))
    targets = np.asarray(targets).ravel()
    if targets.size < nc:
        raise ValidationError(f"need {nc} pole targets, got {targets.size}")
    fc = _place_controllable(at[:nc, :nc], (q.T @ b)[:nc], targets[:nc], rng, max_tries)
    return fc @ q[:, :nc].T


def stabilizing_gains(p22: StateSpace, rng: np.random.Generator | None = None):
    """Default ``(F, L)`` making ``A + B2 F`` and ``A + L C2`` Hurwitz."""
    rng = rng if rng is not None else np.random.default_rng(0)
    f = place_poles(p22.A, p22.B, rng=rng)
    try:
        lt = place_poles(p22.A.T, p22.C.T, rng=rng)
    except UncontrollableError as exc:
        raise UncontrollableError("(C2, A) is not detectable") from exc
    return f, lt.T


# -- coprime factors ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoprimeFactors:
    """Right pairs ``(M, N), (U, V)`` and left pairs ``(Mhat, Nhat), (Uhat, Vhat)``.

    ``structured`` marks factors that still carry the observer-based
    realization built from ``(F, L)``; repaired factors do not.
    """

    M: StateSpace
    N: StateSpace
    U: StateSpace
    V: StateSpace
    Mhat: StateSpace
    Nhat: StateSpace
    Uhat: StateSpace
    Vhat: StateSpace
    F: np.ndarray
    L: np.ndarray
    p22: StateSpace
    structured: bool = True

    @property
    def mu(self) -> int:
        return self.M.inputs

    def systems(self) -> dict:
        return {k: getattr(self, k) for k in ("M", "N", "U", "V", "Mhat", "Nhat", "Uhat", "Vhat")}

    def right(self) -> StateSpace:
        """``[[M, U], [N, V]]``."""
        return vstack(hstack(self.M, self.U), hstack(self.N, self.V))

    def left(self) -> StateSpace:
        """``[[Vhat, -Uhat], [-Nhat, Mhat]]``."""
        return vstack(hstack(self.Vhat, -self.Uhat), hstack(-self.Nhat, self.Mhat))

    def all_stable(self, margin: float = 0.0) -> bool:
        return all(is_hurwitz(s.A, margin) for s in self.systems().values())


def coprime_factorize(p22: StateSpace, F=None, L=None, rng: np.random.Generator | None = None) -> CoprimeFactors:
    """Observer-based doubly coprime factors of ``P22 = (A, B2, C2, D22)``.

    With ``At = A + B2 F``, ``Ah = A + L C2`` and ``Ct = C2 + D22 F``::

        M = (At, B2, F, I)          U = (At, -L, F, 0)
        N = (At, B2, Ct, D22)       V = (At, -L, Ct, I)
        Vhat = (Ah, -(B2 + L D22), F, I)   Uhat = (Ah, L, -F, 0)
        Nhat = (Ah, B2 + L D22, C2, D22)   Mhat = (Ah, L, C2, I)

    Missing gains are placed with :func:`stabilizing_gains`.
    """
    a, b2, c2, d22 = p22.A, p22.B, p22.C, p22.D
    n = p22.n
    ku, py = p22.inputs, p22.outputs
    if ku != py:
        raise DimensionError("loop block must be square")
    if F is None or L is None:
        f0, l0 = stabilizing_gains(p22, rng)
        F = f0 if F is None else F
        L = l0 if L is None else L
    F = np.asarray(F, dtype=float).reshape(ku, n)
    L = np.asarray(L, dtype=float).reshape(n, py)
    at = a + b2 @ F
    ah = a + L @ c2
    if not (is_hurwitz(at) and is_hurwitz(ah)):
        raise ValidationError("A + B2 F and A + L C2 must both be Hurwitz")
    ct = c2 + d22 @ F
    bh = b2 + L @ d22
    eye, zero = np.eye(ku), np.zeros((ku, py))
    return CoprimeFactors(
        M=StateSpace(at, b2, F, eye),
        N=StateSpace(at, b2, ct, d22),
        U=StateSpace(at, -L, F, zero),
        V=StateSpace(at, -L, ct, np.eye(py)),
        Mhat=StateSpace(ah, L, c2, np.eye(py)),
        Nhat=StateSpace(ah, bh, c2, d22),
        Uhat=StateSpace(ah, L, -F, zero),
        Vhat=StateSpace(ah, -bh, F, eye),
        F=F,
        L=L,
        p22=p22,
    )


@dataclass(frozen=True)
class BezoutReport:
    residual: float
    factorization_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tol and self.factorization_residual <= self.tol

    def __bool__(self) -> bool:
        return self.ok


def independent_factors(p22: StateSpace, F1, L1, F2, L2) -> CoprimeFactors:
    """Factors whose auxiliary pairs use their own gains.

    ``(M, N)`` come from ``F1`` and ``(Mhat, Nhat)`` from ``L1``; ``(U, V)``
    use ``(F2, L1)`` and ``(Uhat, Vhat)`` use ``(F1, L2)``.  Both one-sided
    Bezout identities hold but the general one fails unless ``F2 = F1`` and
    ``L2 = L1``.
    """
    base = coprime_factorize(p22, F1, L1)
    right = coprime_factorize(p22, F2, L1)
    left = coprime_factorize(p22, F1, L2)
    return replace(base, U=right.U, V=right.V, Uhat=left.Uhat, Vhat=left.Vhat, structured=False)


def check_bezout(f: CoprimeFactors, grid: FrequencyGrid | None = None, tol: float = 1e-7) -> BezoutReport:
    """Grid residual of the general Bezout identity and of ``P22 = N M^{-1} = Mhat^{-1} Nhat``."""
    grid = grid or FrequencyGrid.default()
    w = grid.omegas
    left = freqresp(f.left(), w)
    right = freqresp(f.right(), w)
    k = left.shape[1]
    res = np.linalg.norm(left @ right - np.eye(k)[None], axis=(1, 2))
    resid = float(res.max(initial=0.0))
    if grid.include_infinity:
        resid = max(resid, float(np.linalg.norm(f.left().D @ f.right().D - np.eye(k))))

    p = freqresp(f.p22, w)
    mm, nn = freqresp(f.M, w), freqresp(f.N, w)
    mh, nh = freqresp(f.Mhat, w), freqresp(f.Nhat, w)
    fr = max(
        float(np.linalg.norm(nn - p @ mm, axis=(1, 2)).max(initial=0.0)),
        float(np.linalg.norm(nh - mh @ p, axis=(1, 2)).max(initial=0.0)),
    )
    return BezoutReport(resid, fr, tol)


def repair_general_bezout(f: CoprimeFactors) -> CoprimeFactors:
    """Enforce the general Bezout identity from the two one-sided ones.

    With ``Upsilon = Uhat V - Vhat U`` the right auxiliary pair becomes
    ``U' = U + M Upsilon`` and ``V' = V + N Upsilon``; the left pair is kept.
    """
    ups = minimal(f.Uhat @ f.V - f.Vhat @ f.U)
    if ups.n == 0 and np.linalg.norm(ups.D) == 0.0:
        return f
    # reducing U', V' themselves costs accuracy; Upsilon alone is enough
    return replace(f, U=f.U + f.M @ ups, V=f.V + f.N @ ups, structured=False)


# -- controllers --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ControllerMfd:
    factors: CoprimeFactors
    Q: StateSpace

    def __post_init__(self):
        mu = self.factors.mu
        if self.Q.shape != (mu, mu):
            raise DimensionError(f"Q must be {mu}x{mu}, got {self.Q.shape}")
        if not is_hurwitz(self.Q.A):
            raise ValidationError("Q must be stable")

    def well_posedness(self) -> float:
        """``sigma_min((V + N Q)(inf))``."""
        d = self.factors.V.D + self.factors.N.D @ self.Q.D
        return float(np.linalg.svd(d, compute_uv=False)[-1])


def _right_quotient(t: StateSpace, k: int) -> StateSpace:
    """``T1 T2^{-1}`` for a column stack ``T = [T1; T2]`` with ``T2`` square (``k`` rows)."""
    c1, c2 = t.C[:-k], t.C[-k:]
    d1, d2 = t.D[:-k], t.D[-k:]
    if is_singular(d2):
        raise WellPosednessError("denominator is singular at infinity")
    di = np.linalg.inv(d2)
    return StateSpace(t.A - t.B @ di @ c2, t.B @ di, c1 - d1 @ di @ c2, d1 @ di)


def _left_quotient(r: StateSpace, k: int) -> StateSpace:
    """``R2^{-1} R1`` for a row stack ``R = [R1, R2]`` with ``R2`` square (``k`` columns)."""
    b1, b2 = r.B[:, :-k], r.B[:, -k:]
    d1, d2 = r.D[:, :-k], r.D[:, -k:]
    if is_singular(d2):
        raise WellPosednessError("denominator is singular at infinity")
    di = np.linalg.inv(d2)
    return StateSpace(r.A - b2 @ di @ r.C, b1 - b2 @ di @ d1, di @ r.C, di @ d1)


def assemble_controller(c: ControllerMfd, side: str = "right", reduce: bool = True) -> StateSpace:
    """Controller ``K = (U + M Q)(V + N Q)^{-1}`` (or the left form).

    Raises
    ------
    WellPosednessError
        When ``(V + N Q)(inf)`` is singular.
    """
    f, q = c.factors, c.Q
    if is_singular(f.V.D + f.N.D @ q.D):
        raise WellPosednessError("det (V + N Q)(inf) = 0")
    mu = f.mu
    if side == "right":
        t = vstack(f.U, f.V) + vstack(f.M, f.N) @ q
        k = _right_quotient(t, mu)
    elif side == "left":
        r = hstack(f.Uhat, f.Vhat) + q @ hstack(f.Mhat, f.Nhat)
        k = _left_quotient(r, mu)
    else:
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    return minimal(k) if reduce else k


def oy_system(f: CoprimeFactors) -> PartitionedPlant:
    """Auxiliary system with ``LFT(O_y, Q) = (U + M Q)(V + N Q)^{-1}``::

        O_y = [[U V^{-1}, M - U V^{-1} N], [V^{-1}, -V^{-1} N]]

    The (1, 2) block equals ``Vhat^{-1}`` whenever the general Bezout
    identity holds.
    """
    try:
        vi = inverse(f.V)
    except SingularEquationError as exc:
        raise WellPosednessError("V(inf) is singular") from exc
    o11 = f.U @ vi
    o12 = f.M - o11 @ f.N
    o21 = vi
    o22 = -(vi @ f.N)
    sys = minimal(vstack(hstack(o11, o12), hstack(o21, o22)))
    mu = f.mu
    return PartitionedPlant(sys, mu, mu, mu, mu)


lft_from_mfd = oy_system


def mfd_from_lft(oy: PartitionedPlant, reduce: bool = True):
    """Recover ``(U, M, V, N)`` from an LFT description with invertible ``O21``."""
    o11, o12, o21, o22 = oy.P11, oy.P12, oy.P21, oy.P22
    try:
        vi = inverse(o21)
    except SingularEquationError as exc:
        raise WellPosednessError("O21(inf) is singular") from exc
    u = o11 @ vi
    m = o12 - u @ o22
    v = vi
    n = -(vi @ o22)
    if reduce:
        u, m, v, n = (minimal(s) for s in (u, m, v, n))
    return u, m, v, n


# -- stability ----------------------------------------------------------------


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    eigenvalues: np.ndarray
    abscissa: float

    def __bool__(self) -> bool:
        return self.stable


def closed_loop_matrix(p22: StateSpace, k: StateSpace) -> np.ndarray:
    """State matrix of the ``P22``/``K`` feedback loop on states ``(x, x_K)``."""
    if k.inputs != p22.outputs or k.outputs != p22.inputs:
        raise DimensionError("controller does not fit the loop block")
    a, b2, c2, d22 = p22.A, p22.B, p22.C, p22.D
    ak, bk, ck, dk = k.A, k.B, k.C, k.D
    loop = np.eye(dk.shape[0]) - dk @ d22
    if is_singular(loop):
        raise IllPosedInterconnectionError("I - D_K D22 is singular")
    dl = np.linalg.inv(loop)
    return np.block(
        [
            [a + b2 @ dl @ dk @ c2, b2 @ dl @ ck],
            [bk @ d22 @ dl @ dk @ c2 + bk @ c2, ak + bk @ d22 @ dl @ ck],
        ]
    )


def check_internal_stability(p22: StateSpace, k: StateSpace, margin: float = 0.0) -> StabilityReport:
    abar = closed_loop_matrix(p22, k)
    eig = np.linalg.eigvals(abar) if abar.size else np.zeros(0, dtype=complex)
    absc = spectral_abscissa(abar)
    return StabilityReport(bool(absc < -margin), eig, absc)


def youla_parameter(f: CoprimeFactors, k: StateSpace) -> StateSpace:
    """Youla parameter ``Q = (M - K N)^{-1}(K V - U)`` of a stabilizing ``K``.

    For observer-based factors an explicit realization on the closed-loop
    states is used, so the result is stable by construction whenever ``K``
    stabilizes ``P22``.
    """
    p22 = f.p22
    dk = k.D
    loop = np.eye(dk.shape[0]) - dk @ p22.D
    if is_singular(loop):
        raise IllPosedInterconnectionError("I - D_K D22 is singular")
    if not f.structured:
        num = k @ f.V - f.U
        den = f.M - k @ f.N
        return minimal(inverse(den) @ num)
    dl = np.linalg.inv(loop)
    at = p22.A + p22.B @ f.F
    ct = p22.C + p22.D @ f.F
    b2, d22 = p22.B, p22.D
    # q = dl (c_K x_K + (d_K Ct - F) z + d_K w),  a = Ct z + D22 q + w
    cq = np.hstack([dl @ (dk @ ct - f.F), dl @ k.C])
    dq = dl @ dk
    ca = np.hstack([ct, np.zeros((ct.shape[0], k.n))]) + d22 @ cq
    da = np.eye(d22.shape[0]) + d22 @ dq
    a = np.block([[at, np.zeros((at.shape[0], k.n))], [np.zeros((k.n, at.shape[0])), k.A]])
    a = a + np.vstack([b2 @ cq, k.B @ ca])
    b = np.vstack([b2 @ dq - f.L, k.B @ da])
    return minimal(StateSpace(a, b, cq, dq))


def random_stable(n: int, p: int, m: int, rng: np.random.Generator, scale: float = 1.0) -> StateSpace:
    """Random stable system; the state matrix is shifted to spectral abscissa ``<= -0.5``."""
    a = rng.standard_normal((n, n))
    if n:
        a = a - (spectral_abscissa(a) + 0.5 + rng.uniform()) * np.eye(n)
    return StateSpace(a, rng.standard_normal((n, m)), rng.standard_normal((p, n)), scale * rng.standard_normal((p, m)))
