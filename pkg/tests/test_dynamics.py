import numpy as np
import pytest
from scipy.linalg import expm

from moyal_scatter.dynamics import (
    Integrator,
    InteractionPicture,
    PotentialProfile,
    SpacetimeField,
    bump,
    causal_propagator,
    dirac_operator,
    evolution_operator,
    free_propagator,
    fundamental_solution,
)
from moyal_scatter.lattice import gaussian

RK4 = Integrator("rk4", 0.01)


def test_symbol_spectrum_is_plus_minus_energy(line, plane):
    for small in (line, plane):
        sp = small.spectral
        np.testing.assert_allclose(sp.eigvals[:, 0], -sp.energy, rtol=1e-13)
        np.testing.assert_allclose(sp.eigvals[:, 1], sp.energy, rtol=1e-13)
        H0 = sp.H0.matrix
        np.testing.assert_allclose(H0, H0.conj().T, atol=1e-14)
        np.testing.assert_allclose(sp.p_plus.matrix + sp.p_minus.matrix, np.eye(sp.dim), atol=1e-14)
        np.testing.assert_allclose(sp.eps.matrix @ sp.eps.matrix, np.eye(sp.dim), atol=1e-13)


def test_single_mode_symbol():
    """At k = (k1,) with mass m the 2x2 symbol squares to (k1^2 + m^2)."""
    from conftest import Small

    sp = Small(2, 0, 0.0, 6.0, 8).spectral
    for sym, E in zip(sp.symbol, sp.energy):
        np.testing.assert_allclose(sym @ sym, E**2 * np.eye(2), atol=1e-13)
        np.testing.assert_allclose(np.trace(sym), 0.0, atol=1e-14)


def test_free_propagator_matches_expm(line):
    sp = line.spectral
    np.testing.assert_allclose(free_propagator(0.7, sp).matrix, expm(0.7j * sp.H0.matrix), atol=1e-12)


def test_zero_amplitude_is_free_propagation(line):
    prof = PotentialProfile(0.0, 1.0, 0.0, line.profile.b)
    T = evolution_operator(-2.0, 1.5, prof, line.spectral, RK4).matrix
    np.testing.assert_allclose(T, free_propagator(3.5, line.spectral).matrix, atol=1e-13)


def test_unitarity_and_cocycle(line):
    sp, prof = line.spectral, line.profile
    pic = InteractionPicture(prof, sp)
    T20 = evolution_operator(-1.5, 1.5, prof, sp, RK4, picture=pic).matrix
    T21 = evolution_operator(0.2, 1.5, prof, sp, RK4, picture=pic).matrix
    T10 = evolution_operator(-1.5, 0.2, prof, sp, RK4, picture=pic).matrix
    assert np.linalg.norm(T20.conj().T @ T20 - np.eye(sp.dim), 2) < 1e-7
    # cocycle holds to integrator accuracy since the step grids differ
    assert np.abs(T21 @ T10 - T20).max() < 1e-7


def test_conjugation_commutes_with_evolution(plane):
    sp = plane.spectral
    T = evolution_operator(-1.2, 1.2, plane.profile, sp, RK4).matrix
    np.testing.assert_allclose(sp.conjugate_operator(T), T, atol=1e-12)


def test_rk4_fourth_order(line):
    sp, prof = line.spectral, line.profile
    pic = InteractionPicture(prof, sp)
    x = np.zeros(sp.dim, complex)
    x[sp.dim // 2] = 1.0
    ref = pic.rk4(x, 1.0, -1.0, 0.00125)
    errors = [np.linalg.norm(pic.rk4(x, 1.0, -1.0, dt) - ref) for dt in (0.02, 0.01)]
    assert 3.5 < np.log2(errors[0] / errors[1]) < 4.5


def test_rk4_agrees_with_dyson_at_weak_coupling(line):
    sp = line.spectral
    prof = PotentialProfile(0.0, 1.0, 0.1, line.profile.b)
    pic = InteractionPicture(prof, sp)
    x = np.ones(sp.dim, complex) / np.sqrt(sp.dim)
    a = pic.rk4(x, -1.0, 1.0, 0.005)
    b = pic.dyson(x, -1.0, 1.0, 0.0025, 6)
    assert np.linalg.norm(a - b) < 1e-5


def test_rhs_matches_dense_potential(plane, rng):
    pic = InteractionPicture(plane.profile, plane.spectral)
    y = rng.standard_normal((plane.spectral.dim, 3)) + 0j
    np.testing.assert_allclose(pic.apply_v_eig(y), pic.v_eig @ y, atol=1e-13)


def source(line):
    times = np.arange(-1.6, 1.6 + 1e-9, 0.004)
    packet = np.zeros(line.spectral.dim, complex)
    packet[::2] = line.grid.restrict(line.grid.to_momentum(gaussian(line.grid, 1.0, 1.0, (0.5,)).values))
    return SpacetimeField.from_function(times, line.grid, 2, lambda t: bump(t, 0.0, 0.6, 1.0) * packet)


def test_fundamental_solutions_supported_on_one_side(line):
    f = source(line)
    plus = fundamental_solution(+1, f, line.profile, line.spectral, RK4)
    minus = fundamental_solution(-1, f, line.profile, line.spectral, RK4)
    first, last = f.time_support()
    assert np.all(plus.data[:first] == 0) and np.any(plus.data[last + 1:] != 0)
    assert np.all(minus.data[last + 1:] == 0) and np.any(minus.data[:first] != 0)


def test_retarded_solution_solves_dirac_equation(line):
    f = source(line)
    u = fundamental_solution(+1, f, line.profile, line.spectral, Integrator("rk4", 0.002))
    residual = dirac_operator(u, line.profile, line.spectral).data - f.data
    assert np.abs(residual[2:-2]).max() < 1e-3 * np.abs(f.data).max()


def test_causal_propagator_solves_homogeneous_equation(line):
    f = source(line)
    Rf = causal_propagator(f, line.profile, line.spectral, Integrator("rk4", 0.002))
    residual = dirac_operator(Rf, line.profile, line.spectral).data
    assert np.abs(residual[2:-2]).max() < 1e-3 * np.abs(Rf.data).max()


def test_bump_shape():
    t = np.array([-2.0, -1.0, 0.0, 0.5, 1.0, 3.0])
    b = bump(t, 0.0, 1.0, 2.5)
    assert b[2] == 2.5
    assert b[0] == b[1] == b[4] == b[5] == 0.0
    assert b[3] == pytest.approx(2.5 * np.exp(1 - 1 / 0.75))


@pytest.mark.parametrize("kwargs", [dict(method="euler"), dict(dt=0.0), dict(dyson_order=-1)])
def test_invalid_integrator(kwargs):
    with pytest.raises(ValueError):
        Integrator(**kwargs)


def test_invalid_profile(line):
    with pytest.raises(ValueError, match="kind"):
        PotentialProfile(0.0, 1.0, 1.0, line.profile.b, "V9")
    with pytest.raises(ValueError, match="half_width"):
        PotentialProfile(0.0, 0.0, 1.0, line.profile.b)
