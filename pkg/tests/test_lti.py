import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsyn.errors import DimensionError
from qsyn.linalg import jmat
from qsyn.lti import (
    FrequencyGrid,
    GridFunction,
    PartitionedPlant,
    StateSpace,
    conjugate,
    evaluate,
    freqresp,
    h2_norm_sq,
    h2_norm_sq_grid,
    hinf_norm_grid,
    inverse,
    is_hurwitz,
    lft_lower,
    max_grid_distance,
    minimal,
    negate,
    parallel,
    sample,
    series,
    static,
)
from qsyn.youla import random_stable

seeds = st.integers(0, 2**32 - 1)
LAG = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[0.0]])


def test_evaluate_examples():
    np.testing.assert_allclose(evaluate(static(np.eye(2)), 1j), np.eye(2))
    np.testing.assert_allclose(evaluate(LAG, 0.0), [[1.0]])
    a = -2 * np.eye(2) + jmat(2)
    sys = StateSpace(a, 2 * jmat(2), 2 * jmat(2), np.eye(2))
    expected = np.eye(2) + 2 * jmat(2) @ np.linalg.solve(-a, 2 * jmat(2))
    np.testing.assert_allclose(evaluate(sys, 0.0), expected, atol=1e-12)


def test_state_space_validates_shapes():
    with pytest.raises(DimensionError):
        StateSpace(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), np.zeros((1, 1)))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_dict_round_trip(seed):
    sys = random_stable(3, 2, 2, np.random.default_rng(seed))
    back = StateSpace.from_dict(sys.to_dict())
    for k in "ABCD":
        np.testing.assert_array_equal(getattr(back, k), getattr(sys, k))


def test_conjugate_examples():
    d = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(conjugate(static(d)).D, d.T)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_conjugate_pointwise(seed):
    rng = np.random.default_rng(seed)
    sys = random_stable(3, 2, 3, rng)
    w = rng.uniform(-10, 10, 10)
    lhs = freqresp(conjugate(sys), w)
    rhs = np.conj(np.swapaxes(freqresp(sys, w), 1, 2))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    grid = FrequencyGrid.logspace(points=20)
    assert max_grid_distance(sample(conjugate(conjugate(sys)), grid), sample(sys, grid)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_interconnections(seed):
    rng = np.random.default_rng(seed)
    g1 = random_stable(3, 2, 2, rng)
    g2 = random_stable(2, 2, 2, rng)
    g1 = StateSpace(g1.A, g1.B, g1.C, g1.D + 3 * np.eye(2))
    grid = FrequencyGrid.logspace(points=30)
    w = grid.omegas
    np.testing.assert_allclose(freqresp(series(g1, g2), w), freqresp(g1, w) @ freqresp(g2, w), atol=1e-9)
    np.testing.assert_allclose(freqresp(g1 @ g2, w), freqresp(g1, w) @ freqresp(g2, w), atol=1e-9)
    assert np.abs(freqresp(parallel(g1, negate(g1)), w)).max() < 1e-12
    ident = freqresp(series(g1, inverse(g1)), w)
    assert np.abs(ident - np.eye(2)).max() < 1e-9


def test_minimal_examples():
    sys = StateSpace(-np.eye(2), [[1.0], [1.0]], [[1.0, 2.0]], [[0.0]])
    sys2 = StateSpace([[-1.0, 0.0], [0.0, -2.0]], [[1.0], [1.0]], [[1.0, 1.0]], [[0.0]])
    assert minimal(sys2).n == 2
    assert minimal(sys).n == 1
    aug = StateSpace(
        np.block([[sys2.A, np.zeros((2, 1))], [np.zeros((1, 2)), -3.0 * np.ones((1, 1))]]),
        np.vstack([sys2.B, np.zeros((1, 1))]),
        np.hstack([sys2.C, np.ones((1, 1))]),
        sys2.D,
    )
    assert minimal(aug).n == 2


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_minimal_drops_unobservable(seed):
    rng = np.random.default_rng(seed)
    g = random_stable(6, 2, 2, rng)
    pad = StateSpace(
        np.block([[g.A, np.zeros((6, 2))], [rng.standard_normal((2, 6)), -np.eye(2)]]),
        np.vstack([g.B, rng.standard_normal((2, 2))]),
        np.hstack([g.C, np.zeros((2, 2))]),
        g.D,
    )
    red = minimal(pad)
    assert red.n == 6
    grid = FrequencyGrid.logspace(points=40)
    assert max_grid_distance(sample(red, grid), sample(g, grid)) < 1e-8


def test_is_hurwitz_examples():
    assert is_hurwitz(-np.eye(3))
    assert not is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])
    assert is_hurwitz(-2 * np.eye(2) + jmat(2))


def test_h2_examples():
    assert h2_norm_sq(LAG) == pytest.approx(0.5, rel=1e-12)
    assert h2_norm_sq(StateSpace(-np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), [[0.0]])) == 0.0


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_h2_grid_matches_gramian(seed):
    g = random_stable(3, 2, 2, np.random.default_rng(seed), scale=0.0)
    grid = FrequencyGrid.logspace(1e-3, 1e4, 2000)
    assert h2_norm_sq_grid(sample(g, grid)) == pytest.approx(h2_norm_sq(g), rel=1e-2)


def test_hinf_examples():
    grid = FrequencyGrid.logspace(points=400)
    assert hinf_norm_grid(GridFunction.constant(grid, np.eye(2))) == pytest.approx(1.0)
    assert hinf_norm_grid(GridFunction.constant(grid, 2 * np.eye(2))) == pytest.approx(2.0)
    assert hinf_norm_grid(sample(LAG, grid)) == pytest.approx(1.0, abs=1e-3)


def test_grid_structure():
    grid = FrequencyGrid.logspace(points=10)
    w = grid.omegas
    np.testing.assert_allclose(w[grid.mirror_index], -w)
    assert grid.quadrature_weights.min() >= 0
    g = sample(random_stable(2, 2, 2, np.random.default_rng(0)), grid)
    assert g.symmetry_residual() < 1e-12


def _pointwise_lft(p, kv, w):
    pv = freqresp(p.sys, w)
    mr, pz = p.m_r, p.p_z
    p11, p12, p21, p22 = pv[:, :pz, :mr], pv[:, :pz, mr:], pv[:, pz:, :mr], pv[:, pz:, mr:]
    return p11 + p12 @ kv @ np.linalg.solve(np.eye(kv.shape[1]) - p22 @ kv, p21)


def test_lft_examples():
    rng = np.random.default_rng(3)
    p = PartitionedPlant(random_stable(3, 4, 4, rng), 2, 2, 2, 2)
    grid = FrequencyGrid.logspace(points=20)
    zero = static(np.zeros((2, 2)))
    assert max_grid_distance(sample(lft_lower(p, zero), grid), sample(p.P11, grid)) < 1e-12
    d = rng.standard_normal((4, 4))
    d[2:, 2:] = 0
    dk = rng.standard_normal((2, 2))
    g = lft_lower(PartitionedPlant(static(d), 2, 2, 2, 2), static(dk))
    np.testing.assert_allclose(g.D, d[:2, :2] + d[:2, 2:] @ dk @ d[2:, :2], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_lft_pointwise(seed):
    rng = np.random.default_rng(seed)
    p = PartitionedPlant(random_stable(3, 4, 4, rng, 0.3), 2, 2, 2, 2)
    k = random_stable(2, 2, 2, rng, 0.3)
    w = rng.uniform(-20, 20, 10)
    direct = freqresp(lft_lower(p, k), w)
    np.testing.assert_allclose(direct, _pointwise_lft(p, freqresp(k, w), w), atol=1e-9)
