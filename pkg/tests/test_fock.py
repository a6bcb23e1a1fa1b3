import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import unitary_group

from moyal_scatter.dynamics import Integrator
from moyal_scatter.fock import (
    MAX_MODES,
    build_fock,
    c_odd_part,
    car_residuals,
    derivation_residual,
    exp_generator,
    implementer,
    normal_ordered_bilinear,
    select_modes,
    two_point,
    wick_square_operator,
)


@pytest.fixture(scope="module")
def fock(plane):
    return build_fock(select_modes(plane.spectral, 4))


def random_generator(fock, seed):
    """Hermitian C-odd operator in selection coordinates."""
    rng = np.random.default_rng(seed)
    n = 2 * fock.selection.M
    H = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return c_odd_part(0.5 * (H + H.conj().T), fock.selection)


def test_selection_is_orthonormal_and_c_closed(plane):
    sel = select_modes(plane.spectral, 6)
    E = sel.basis
    np.testing.assert_allclose(E.conj().T @ E, np.eye(12), atol=1e-14)
    np.testing.assert_allclose(plane.spectral.p_plus.matrix @ sel.chi_plus, sel.chi_plus, atol=1e-13)
    np.testing.assert_allclose(plane.spectral.p_minus.matrix @ sel.chi_minus, sel.chi_minus, atol=1e-13)
    energies = plane.spectral.energy[list(sel.modes)]
    assert np.all(np.diff(energies) >= 0)


@pytest.mark.parametrize("M", [0, 3, MAX_MODES + 2])
def test_selection_rejects_bad_sizes(plane, M):
    with pytest.raises(ValueError):
        select_modes(plane.spectral, M)


@pytest.mark.parametrize("kappa", [1.0, 2.0])
def test_car_relations(plane, kappa):
    res = car_residuals(build_fock(select_modes(plane.spectral, 4), kappa))
    assert max(res.values()) < 1e-13


def test_two_point_function(fock, rng):
    sp = fock.spectral
    v, w = (fock.selection.embed(rng.standard_normal(8) + 1j * rng.standard_normal(8)) for _ in range(2))
    P = sp.p_plus.matrix
    assert two_point(fock, v, w) == pytest.approx(fock.kappa * np.vdot(P @ v, P @ w), abs=1e-12)


def test_bilinear_is_derivation_and_hermitian(fock):
    A = random_generator(fock, 1)
    G = normal_ordered_bilinear(A, fock)
    assert derivation_residual(G, A, fock) < 1e-12
    assert abs(G - G.conj().T).max() < 1e-13
    assert np.linalg.norm(G @ fock.vacuum - np.vdot(fock.vacuum, G @ fock.vacuum) * fock.vacuum) > 0
    assert abs(np.vdot(fock.vacuum, G @ fock.vacuum)) < 1e-14


def test_bilinear_independent_of_basis(fock):
    A = random_generator(fock, 2)
    U = unitary_group.rvs(8, random_state=3)
    G0 = normal_ordered_bilinear(A, fock).toarray()
    G1 = normal_ordered_bilinear(A, fock, basis=U).toarray()
    np.testing.assert_allclose(G1, G0, atol=1e-12)


def test_bilinear_shape_checked(fock):
    with pytest.raises(ValueError, match="8x8"):
        normal_ordered_bilinear(np.eye(6), fock)


def test_implementer_intertwines_and_matches_exponential(fock):
    A = 0.3 * random_generator(fock, 4)
    T = expm(1j * A)
    out = implementer(T, fock)
    assert out["null_dim"] == 1
    assert out["unitarity_defect"] < 1e-12 and out["intertwining_residual"] < 1e-12
    S, X = out["S"], exp_generator(normal_ordered_bilinear(A, fock))
    # the two agree up to a global phase
    overlap = np.vdot(X, S) / np.vdot(X, X)
    np.testing.assert_allclose(S, overlap * X, atol=1e-12)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-12)


def test_implementer_rejects_non_unitary(fock):
    with pytest.raises(ValueError, match="not unitary"):
        implementer(1.1 * np.eye(8), fock)


@given(st.integers(min_value=0, max_value=2**31))
@settings(max_examples=10, deadline=None)
def test_rotated_selection_keeps_car(plane, seed):
    sel = select_modes(plane.spectral, 4).rotated(unitary_group.rvs(4, random_state=seed))
    assert max(car_residuals(build_fock(sel)).values()) < 1e-12


def test_wick_square_vanishes_without_potential(line):
    sel = select_modes(line.spectral, 2)
    times = np.linspace(-1.5, 1.5, 301)
    block, leak = wick_square_operator(line.profile.scaled(0.0), sel, times, Integrator("rk4", 0.01))
    assert np.abs(block).max() == 0.0 and leak == 0.0
