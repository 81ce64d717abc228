import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsyn.errors import DimensionError, SingularEquationError, ValidationError
from qsyn.linalg import (
    is_symplectic_orthogonal,
    jmat,
    nearest_symplectic_orthogonal,
    random_symplectic_orthogonal,
    skew_cholesky,
    solve_lyapunov,
    solve_sylvester,
    spectrum_symmetric_about_imaginary_axis,
)

seeds = st.integers(0, 2**32 - 1)
even = st.sampled_from([2, 4, 6])


def test_jmat_examples():
    np.testing.assert_array_equal(jmat(2), [[0, 1], [-1, 0]])
    np.testing.assert_allclose(jmat(4) @ jmat(4), -np.eye(4))
    np.testing.assert_allclose(jmat(2).T @ jmat(2), np.eye(2))


def test_jmat_rejects_odd():
    with pytest.raises((DimensionError, ValidationError)):
        jmat(3)


@given(even)
def test_jmat_skew_orthogonal(m):
    j = jmat(m)
    np.testing.assert_array_equal(j.T, -j)
    np.testing.assert_allclose(j.T @ j, np.eye(m))


def test_sylvester_examples():
    np.testing.assert_allclose(solve_sylvester([[-1.0]], [[-1.0]], [[2.0]]), [[-1.0]])
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(solve_sylvester(-np.eye(2), -np.eye(2), m), -m / 2)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_sylvester_residual(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3)) - 4 * np.eye(3)
    b = rng.standard_normal((3, 3)) - 4 * np.eye(3)
    c = rng.standard_normal((3, 3))
    x = solve_sylvester(a, b, c)
    assert np.linalg.norm(a @ x + x @ b - c) < 1e-10 * max(1.0, np.linalg.norm(c))


def test_sylvester_singular():
    with pytest.raises(SingularEquationError):
        solve_sylvester([[1.0]], [[-1.0]], [[1.0]])


def test_lyapunov():
    a = np.array([[-1.0, 2.0], [0.0, -3.0]])
    q = np.eye(2)
    x = solve_lyapunov(a, q)
    np.testing.assert_allclose(a.T @ x + x @ a + q, 0, atol=1e-12)


def test_skew_cholesky_examples():
    f = skew_cholesky(jmat(2))
    np.testing.assert_allclose(f.sigma, np.eye(2), atol=1e-12)
    f = skew_cholesky([[0.0, 2.0], [-2.0, 0.0]])
    np.testing.assert_allclose(f.sigma, np.sqrt(2) * np.eye(2), atol=1e-12)
    assert f.residual < 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, even)
def test_skew_cholesky_residual(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, n))
    theta = x - x.T
    if np.linalg.cond(theta) > 1e8:
        return
    assert skew_cholesky(theta).residual < 1e-10 * max(1.0, np.linalg.norm(theta))


def test_skew_cholesky_rejects():
    with pytest.raises(ValidationError):
        skew_cholesky(np.eye(2))
    with pytest.raises(ValidationError):
        skew_cholesky(np.zeros((2, 2)))


def test_group_membership_examples():
    assert is_symplectic_orthogonal(np.eye(4))
    assert is_symplectic_orthogonal(jmat(2))
    c, s = np.cos(0.3), np.sin(0.3)
    rot = np.array([[c, -s], [s, c]])
    assert is_symplectic_orthogonal(rot)
    bad = rot.copy()
    bad[0, 0] += 0.01
    rep = is_symplectic_orthogonal(bad)
    assert not rep and rep.orthogonality_residual > 1e-3


@settings(max_examples=30, deadline=None)
@given(seeds, even)
def test_random_group_element(seed, m):
    d = random_symplectic_orthogonal(m, np.random.default_rng(seed))
    rep = is_symplectic_orthogonal(d, 1e-10)
    assert rep.ok, rep


@settings(max_examples=30, deadline=None)
@given(seeds, even)
def test_nearest_group_element_is_projection(seed, m):
    rng = np.random.default_rng(seed)
    d = random_symplectic_orthogonal(m, rng)
    np.testing.assert_allclose(nearest_symplectic_orthogonal(d), d, atol=1e-10)
    # a symplectic, non-orthogonal K = D P has polar factor D
    a = 1.0 + rng.uniform(0.1, 1.0)
    k = d @ np.kron(np.eye(m // 2), np.diag([a, 1.0 / a]))
    np.testing.assert_allclose(nearest_symplectic_orthogonal(k), d, atol=1e-10)


def test_spectrum_symmetry_examples():
    assert spectrum_symmetric_about_imaginary_axis([[0.0, 1.0], [-1.0, 0.0]])
    assert not spectrum_symmetric_about_imaginary_axis(-np.eye(2))


@settings(max_examples=30, deadline=None)
@given(seeds, even)
def test_hamiltonian_spectrum_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((n, n))
    assert spectrum_symmetric_about_imaginary_axis(jmat(n) @ (r + r.T), 1e-6)
