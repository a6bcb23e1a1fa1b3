import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moyal_scatter.lattice import GridFunction, GridSpinor, SpatialGrid, gaussian


@pytest.mark.parametrize("dim,points", [(1, 16), (1, 32), (2, 12)])
def test_momentum_round_trip_and_parseval(dim, points, rng):
    grid = SpatialGrid(7.0, points, dim)
    f = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c = grid.to_momentum(f)
    np.testing.assert_allclose(grid.from_momentum(c), f, atol=1e-12)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(grid.weight * np.sum(np.abs(f) ** 2), rel=1e-12)


def test_plane_wave_lands_on_its_label():
    grid = SpatialGrid(10.0, 16, 1)
    m = 3
    f = np.exp(1j * m * grid.dk * grid.axis)
    c = grid.to_momentum(f)
    idx = m + grid.points // 2
    assert abs(c[idx]) == pytest.approx(np.sqrt(grid.box_length))
    assert np.abs(np.delete(c, idx)).max() < 1e-12


def test_transform_mean_of_gaussian_matches_continuum():
    """Site-average transform times L^s / (2 pi)^{s/2} is the continuum transform."""
    grid = SpatialGrid(30.0, 64, 1)
    g = gaussian(grid, 1.3)
    k = grid.dk * grid.full_ints
    cont = 1.3 * np.exp(-(1.3 * k) ** 2 / 2)
    np.testing.assert_allclose(grid.transform_mean(g.values) * grid.box_length / np.sqrt(2 * np.pi), cont, atol=1e-12)


def test_spectral_derivative_of_gaussian():
    grid = SpatialGrid(20.0, 64, 2)
    g = gaussian(grid, 1.0, center=(0.5, -0.2))
    x, y = grid.coords
    exact = -(y + 0.2) * g.values
    np.testing.assert_allclose(g.derivative(1).values, exact, atol=1e-10)


def test_restrict_extend_inverse(rng):
    grid = SpatialGrid(5.0, 10, 2)
    c = rng.standard_normal((3, grid.n_modes)) + 0j
    np.testing.assert_array_equal(grid.restrict(grid.extend(c)), c)
    assert grid.n_modes == 81


def test_reflection_is_negation():
    grid = SpatialGrid(5.0, 10, 2)
    np.testing.assert_array_equal(grid.mode_ints[grid.reflection], -grid.mode_ints)


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=20, deadline=None)
def test_spinor_vector_round_trip(seed):
    grid = SpatialGrid(6.0, 8, 2)
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(2 * grid.n_modes) + 1j * rng.standard_normal(2 * grid.n_modes)
    sp = GridSpinor.from_vector(grid, vec, 2)
    np.testing.assert_allclose(sp.to_vector(), vec, atol=1e-12)
    assert sp.norm() == pytest.approx(np.linalg.norm(vec), rel=1e-12)


@pytest.mark.parametrize("kwargs", [dict(points=7), dict(points=6), dict(dim=3), dict(box_length=0.0)])
def test_invalid_grid(kwargs):
    args = dict(box_length=5.0, points=8, dim=1) | kwargs
    with pytest.raises(ValueError):
        SpatialGrid(**args)


def test_grid_function_shape_checked():
    with pytest.raises(ValueError, match="shape"):
        GridFunction(SpatialGrid(5.0, 8, 1), np.zeros(9, complex))
