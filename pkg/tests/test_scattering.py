import numpy as np
import pytest

from moyal_scatter.dynamics import Integrator, InteractionPicture, SpacetimeField, bump
from moyal_scatter.lattice import gaussian
from moyal_scatter.moyal import left_mult_operator
from moyal_scatter.scattering import (
    ScatteringResult,
    bogoliubov_derivative_check,
    chain_map_check,
    d_scattering,
    hs_commutator,
    hs_dT,
    hs_kernel_formula,
    implementability_report,
    lm_condition_probe,
    lm_stabilization,
    scatter,
    scattering_operator,
)

RK4 = Integrator("rk4", 0.005)


@pytest.fixture(scope="module")
def T_line(line):
    return scattering_operator(line.profile, line.spectral, RK4).matrix


def test_independent_of_margin(line, T_line):
    wide = scattering_operator(line.profile, line.spectral, RK4, margin=2.5).matrix
    np.testing.assert_allclose(wide, T_line, atol=1e-12)
    with pytest.raises(ValueError, match="window"):
        scattering_operator(line.profile, line.spectral, RK4, margin=0.0)


def test_unitary_and_c_invariant(line, T_line):
    sp = line.spectral
    assert np.linalg.norm(T_line.conj().T @ T_line - np.eye(sp.dim), 2) < 1e-8
    np.testing.assert_allclose(sp.conjugate_operator(T_line), T_line, atol=1e-12)


def test_zero_potential_gives_identity(line):
    free = line.profile.scaled(0.0)
    np.testing.assert_allclose(scattering_operator(free, line.spectral, RK4).matrix, np.eye(line.spectral.dim), atol=1e-13)
    assert np.abs(d_scattering(free, line.spectral).matrix).max() == 0.0


def test_derivative_matches_finite_difference(line):
    sp, prof, lam = line.spectral, line.profile, 1e-3
    up = scattering_operator(prof.scaled(lam), sp, RK4).matrix
    down = scattering_operator(prof.scaled(-lam), sp, RK4).matrix
    fd = -1j * (up - down) / (2 * lam)
    dT = d_scattering(prof, sp).matrix
    assert np.abs(fd - dT).max() < 1e-4 * np.abs(dT).max()


@pytest.mark.parametrize("kind", ["V0", "Vi", "Vii"])
def test_derivative_symmetries(plane, kind):
    from dataclasses import replace

    sp = plane.spectral
    dT = d_scattering(replace(plane.profile, kind=kind), sp).matrix
    np.testing.assert_allclose(dT, dT.conj().T, atol=1e-13)
    np.testing.assert_allclose(sp.conjugate_operator(dT), -dT, atol=1e-13)
    P, M = sp.p_plus.matrix, sp.p_minus.matrix
    assert np.linalg.norm(P @ dT @ M) == pytest.approx(np.linalg.norm(M @ dT @ P), rel=1e-10)


@pytest.mark.parametrize("kind", ["V0", "Vii"])
def test_kernel_formula_matches_quadrature(line, kind):
    from dataclasses import replace

    prof = replace(line.profile, kind=kind)
    dT = d_scattering(prof, line.spectral, dt_quad=1e-3).matrix
    assert hs_kernel_formula(prof, line.spectral) == pytest.approx(hs_dT(dT, line.spectral), rel=1e-6)


def test_negative_columns_reproduce_full_commutator(line, T_line):
    fast = scatter(line.profile, line.spectral, RK4, full=False)
    assert fast.hs_offdiag == pytest.approx(hs_commutator(T_line, line.spectral), rel=1e-8)
    assert fast.T_sc is None and fast.hs_dT > 0


def test_implementability_report_verdicts():
    def res(a, b, n):
        return ScatteringResult(a, b, metadata={"grid": {"points_per_dim": n}})

    ok = implementability_report([res(1.0, 2.0, 16), res(1.02, 2.01, 24), res(1.03, 2.02, 32)])
    assert ok["passed"] and ok["rows"][1]["rel_diff_offdiag"] == pytest.approx(0.02 / 1.02)
    bad = implementability_report([res(1.0, 2.0, 16), res(1.5, 2.0, 24)])
    assert not bad["passed"] and bad["verdict"] == "not certified"
    nan = implementability_report([res(1.0, 2.0, 16), res(float("nan"), 2.0, 24)])
    assert not nan["passed"]
    with pytest.raises(ValueError):
        implementability_report([res(1.0, 2.0, 16)])


def test_lm_probe(plane):
    from moyal_scatter.moyal import operator_norm

    rep = lm_condition_probe(plane.profile, plane.spectral)
    L = left_mult_operator(plane.profile.b, plane.model, plane.grid, plane.dirac).matrix
    assert rep["operator_norms"][0] == pytest.approx(operator_norm(L), rel=1e-12)
    assert rep["delta_kernel_residual"] < 1e-12
    assert rep["finite"] and all(fit["holds"] for fit in rep["bound_fits"].values())
    # the weights |H0|^-nu only shrink the norms
    for n in range(3):
        vals = [rep["hs_norms"][f"n={n},nu={nu}"] for nu in range(3)]
        assert vals[0] >= vals[1] >= vals[2]


def test_lm_stabilization():
    reps = [{"hs_norms": {"n=1,nu=0": 1.0, "n=1,nu=1": 0.5}}, {"hs_norms": {"n=1,nu=0": 2.0, "n=1,nu=1": 0.51}}]
    out = lm_stabilization(reps)
    assert out["stabilizing_nu"] == {1: 1}


def source(line, span=2.0):
    times = np.arange(-span, span + 1e-9, 0.005)
    packet = np.zeros(line.spectral.dim, complex)
    packet[::2] = line.grid.restrict(line.grid.to_momentum(gaussian(line.grid, 1.0, 1.0, (0.5,)).values))
    return SpacetimeField.from_function(times, line.grid, 2, lambda t: bump(t, 0.0, 0.8, 1.0) * packet)


def test_bogoliubov_derivative_converges_linearly(line):
    out = bogoliubov_derivative_check(source(line), line.profile, line.spectral, RK4)
    assert out["ratio"] == pytest.approx(10.0, rel=0.05)
    assert out["extrapolated_residual"] < 1e-4


def test_chain_map_reproduces_scattering(line):
    f = source(line, span=2.0)
    out = chain_map_check(f, line.profile.scaled(0.5), line.spectral, RK4)
    assert out["representative_residual"] < 1e-3
    assert out["equivalence_residual"] < 1e-3
    with pytest.raises(ValueError, match="beyond"):
        chain_map_check(source(line, span=1.2), line.profile, line.spectral, RK4)


def test_picture_reuse_does_not_change_results(line):
    pic = InteractionPicture(line.profile, line.spectral)
    a = d_scattering(line.profile, line.spectral, picture=pic).matrix
    b = d_scattering(line.profile, line.spectral).matrix
    np.testing.assert_array_equal(a, b)
