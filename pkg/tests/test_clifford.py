import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moyal_scatter.clifford import build_dirac_rep, build_model, clifford_residuals


@pytest.mark.parametrize("q,p,theta", [(2, 0, 0.0), (1, 2, 0.5), (3, 0, 0.0)])
def test_residuals_vanish(q, p, theta):
    rep = build_dirac_rep(build_model(q, p, theta, 1.0))
    for name, value in clifford_residuals(rep).items():
        assert value < 1e-12, name


@pytest.mark.parametrize("q,p,theta", [(2, 0, 0.0), (1, 2, 0.5)])
def test_gamma0_hermitian_spatial_antihermitian(q, p, theta):
    rep = build_dirac_rep(build_model(q, p, theta, 1.0))
    g0, *spatial = rep.gammas
    np.testing.assert_allclose(g0, g0.conj().T)
    for g in spatial:
        np.testing.assert_allclose(g, -g.conj().T)


@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=2, max_size=2))
@settings(max_examples=50, deadline=None)
def test_conjugation_is_antilinear_involution(coeffs):
    rep = build_dirac_rep(build_model(1, 2, 0.5, 1.0))
    v = np.array(coeffs)
    np.testing.assert_allclose(rep.conjugate(rep.conjugate(v)), v, atol=1e-12)
    np.testing.assert_allclose(rep.conjugate(1j * v), -1j * rep.conjugate(v), atol=1e-12)


def test_moyal_matrix_layout():
    m = build_model(1, 2, 0.5, 1.0)
    expected = np.zeros((3, 3))
    expected[1, 2], expected[2, 1] = 0.25, -0.25
    np.testing.assert_array_equal(m.moyal_matrix, expected)
    np.testing.assert_array_equal(m.spatial_moyal, expected[1:, 1:])


def test_theta_normalised_without_pairs():
    assert build_model(2, 0, 0.7, 1.0).theta == 0.0


@pytest.mark.parametrize(
    "args,match",
    [
        ((1, 1, 0.5, 1.0), "even"),
        ((0, 2, 0.5, 1.0), "at least 1"),
        ((2, 2, 0.5, 1.0), "dimension"),
        ((2, 0, 0.0, 0.0), "mass"),
        ((1, 2, 0.0, 1.0), "theta"),
        ((2, 0, -1.0, 1.0), "theta"),
    ],
)
def test_invalid_parameters(args, match):
    with pytest.raises(ValueError, match=match):
        build_model(*args)
