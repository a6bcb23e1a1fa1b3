"""Scattering operator, its coupling derivative and implementability diagnostics.

``T_sc = T_{t_in}^{-1} T^V_{t_in, t_out} T_{t_out}`` with ``t_in`` before and
``t_out`` after the time support of the potential. In the interaction
picture this is the backward interaction propagator across the support,
so it does not depend on the dressing times at all.

``dT_sc = -i d/dlambda T_sc^{(lambda V)}`` at ``lambda = 0``, which in these
conventions equals ``-\\int a~(t) exp(-i t H0) v exp(i t H0) dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Integrator,
    InteractionPicture,
    PotentialProfile,
    SpacetimeField,
    SpectralData,
    apply_potential,
    cauchy_data,
    evolution_operator,
    free_propagator,
)
from .lattice import OneParticleOperator
from .moyal import left_mult_operator
from .oracles import bump_fourier

CAUCHY_TOL = 0.05


@dataclass
class ScatteringResult:
    hs_offdiag: float
    hs_dT: float
    T_sc: OneParticleOperator | None = None
    dT_sc: OneParticleOperator | None = None
    unitarity_defect: float | None = None
    metadata: dict = field(default_factory=dict)


def _picture(profile, spectral, picture):
    return picture if picture is not None else InteractionPicture(profile, spectral)


def scattering_operator(profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, margin: float = 1.0, picture: InteractionPicture | None = None) -> OneParticleOperator:
    """Dense ``T_sc`` built from free dressings around the interacting propagator."""
    if not margin > 0:
        raise ValueError("the evolution window does not cover the potential support")
    lo, hi = profile.support
    t_in, t_out = lo - margin, hi + margin
    pic = _picture(profile, spectral, picture)
    T = evolution_operator(t_out, t_in, profile, spectral, integrator, picture=pic).matrix
    out = free_propagator(-t_in, spectral).matrix @ T @ free_propagator(t_out, spectral).matrix
    return OneParticleOperator(out, "T_sc")


def scattering_apply(w: np.ndarray, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None) -> np.ndarray:
    """``T_sc w`` for a single momentum-basis vector."""
    pic = _picture(profile, spectral, picture)
    lo, hi = profile.support
    y = pic.propagate(spectral.to_eigen(w), hi, lo, integrator)
    return spectral.from_eigen(y)


def scattering_negative_columns(profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None) -> np.ndarray:
    """Eigenbasis columns of ``T_sc`` belonging to negative-energy states."""
    pic = _picture(profile, spectral, picture)
    neg = ~spectral.positive
    Y = np.zeros((spectral.dim, int(neg.sum())), dtype=complex)
    Y[np.nonzero(neg)[0], np.arange(Y.shape[1])] = 1.0
    lo, hi = profile.support
    return pic.propagate(Y, hi, lo, integrator)


def hs_offdiag_from_columns(Y: np.ndarray, spectral: SpectralData) -> float:
    """``||[p+, T]||_HS`` from the negative-energy columns of ``T``.

    ``[p+, T] = p+ T p- - p- T p+`` and C-invariance of ``T`` gives
    ``||p- T p+||_HS = ||p+ T p-||_HS``.
    """
    return float(np.sqrt(2.0) * np.linalg.norm(Y[spectral.positive]))


def hs_commutator(T: np.ndarray, spectral: SpectralData) -> float:
    P = spectral.p_plus.matrix
    return float(np.linalg.norm(P @ T - T @ P))


def hs_eps_commutator(T: np.ndarray, spectral: SpectralData) -> float:
    E = spectral.eps.matrix
    return float(np.linalg.norm(E @ T - T @ E))


def time_quadrature(profile: PotentialProfile, dt_quad: float) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes and weights times ``a~`` over the potential support."""
    lo, hi = profile.support
    n = max(2, int(np.ceil((hi - lo) / dt_quad)))
    t = np.linspace(lo, hi, n + 1)
    w = np.full(n + 1, (hi - lo) / n)
    w[0] = w[-1] = 0.5 * (hi - lo) / n
    return t, w * profile.a_tilde(t)


def _frequency_integral(omega: np.ndarray, t: np.ndarray, wa: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """``sum_t wa(t) exp(-i omega t)`` over the distinct values of ``omega``."""
    uniq, inv = np.unique(omega, return_inverse=True)
    vals = np.empty(len(uniq), dtype=complex)
    for s in range(0, len(uniq), chunk):
        vals[s:s + chunk] = np.exp(-1j * np.outer(uniq[s:s + chunk], t)) @ wa
    return vals[inv].reshape(omega.shape)


def d_scattering(profile: PotentialProfile, spectral: SpectralData, *, dt_quad: float = 2e-3, picture: InteractionPicture | None = None) -> OneParticleOperator:
    """``dT_sc`` by trapezoid quadrature of the conjugated potential, per frequency."""
    pic = _picture(profile, spectral, picture)
    t, wa = time_quadrature(profile, dt_quad)
    lam = spectral.lam
    F = _frequency_integral(lam[:, None] - lam[None, :], t, wa)
    dT_e = -pic.v_eig * F
    return OneParticleOperator(spectral.matrix_from_eigen(dT_e), "dT_sc")


def hs_dT(dT: np.ndarray, spectral: SpectralData) -> float:
    return float(np.linalg.norm(spectral.p_plus.matrix @ dT @ spectral.p_minus.matrix))


def hs_kernel_formula(profile: PotentialProfile, spectral: SpectralData, *, picture: InteractionPicture | None = None) -> float:
    """``||p+ dT p-||_HS`` from the closed-form momentum kernel.

    Sum over mode pairs of ``|F(E_k + E_u)|^2 ||p+(k) v(k, u) p-(u)||^2``
    where ``F`` is the Fourier integral of the time factor.
    """
    pic = _picture(profile, spectral, picture)
    n, N = spectral.grid.n_modes, spectral.N
    v = pic.v.reshape(n, N, n, N)
    Pp = spectral.projector_blocks(+1)
    Pm = spectral.projector_blocks(-1)
    blocks = np.einsum("kab,kbuc,ucd->kaud", Pp, v, Pm)
    weight = np.sum(np.abs(blocks) ** 2, axis=(1, 3))
    E = spectral.energy
    sums = E[:, None] + E[None, :]
    uniq, inv = np.unique(sums, return_inverse=True)
    power = 2 if profile.kind == "Vii" else 1
    F = bump_fourier(uniq, profile.center, profile.half_width, profile.amplitude, power)
    F = profile.coupling * F
    return float(np.sqrt(np.sum(weight * np.abs(F[inv].reshape(sums.shape)) ** 2)))


def scatter(profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, full: bool = True, dt_quad: float = 2e-3) -> ScatteringResult:
    """Assemble the scattering data for one grid.

    With ``full=False`` only the negative-energy columns of ``T_sc`` are
    evolved, which suffices for the Hilbert-Schmidt diagnostics.
    """
    pic = InteractionPicture(profile, spectral)
    dT = d_scattering(profile, spectral, dt_quad=dt_quad, picture=pic)
    meta = {
        "grid": spectral.grid.to_dict(),
        "dt": integrator.dt,
        "method": integrator.method,
        "kind": profile.kind,
        "amplitude": profile.amplitude,
        "coupling": profile.coupling,
    }
    if full:
        T = scattering_operator(profile, spectral, integrator, picture=pic)
        defect = float(np.linalg.norm(T.matrix.conj().T @ T.matrix - np.eye(spectral.dim), 2))
        return ScatteringResult(hs_commutator(T.matrix, spectral), hs_dT(dT.matrix, spectral), T, dT, defect, meta)
    Y = scattering_negative_columns(profile, spectral, integrator, picture=pic)
    return ScatteringResult(hs_offdiag_from_columns(Y, spectral), hs_dT(dT.matrix, spectral), None, dT, None, meta)


def implementability_report(results: list[ScatteringResult], tol: float = CAUCHY_TOL) -> dict:
    """Refinement table with relative successive differences and a verdict."""
    if len(results) < 2:
        raise ValueError("need at least two refinements")
    rows = []
    for j, r in enumerate(results):
        row = {"points_per_dim": r.metadata.get("grid", {}).get("points_per_dim"), "hs_offdiag": r.hs_offdiag, "hs_dT": r.hs_dT}
        if j:
            prev = results[j - 1]
            row["rel_diff_offdiag"] = _rel(r.hs_offdiag, prev.hs_offdiag)
            row["rel_diff_dT"] = _rel(r.hs_dT, prev.hs_dT)
        rows.append(row)
    diffs = [row[key] for row in rows[1:] for key in ("rel_diff_offdiag", "rel_diff_dT")]
    finite = all(np.isfinite(r.hs_offdiag) and np.isfinite(r.hs_dT) for r in results)
    ok = finite and all(d < tol for d in diffs)
    return {
        "rows": rows,
        "max_rel_diff": max(diffs),
        "tolerance": tol,
        "verdict": "implementable (numerically)" if ok else "not certified",
        "passed": bool(ok),
    }


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


# ----------------------------------------------------------------------------
# commutator estimates for |H0|


def lm_condition_probe(profile: PotentialProfile, spectral: SpectralData, nu_max: int = 2, n_max: int = 2) -> dict:
    """Norms of iterated commutators ``delta^n(L_b) = [|H0|, .]^n L_b``.

    Reports operator norms for ``n <= n_max``, Hilbert-Schmidt norms of
    ``|H0|^{-nu} delta^n(L_b)`` for ``nu <= nu_max``, the entrywise kernel
    residual of ``delta(L_b)`` and a fitted bound
    ``|E_k - E_u|^n <= alpha |k - u|^{2n} + beta``.
    """
    if nu_max > 3 or n_max > 3:
        raise ValueError("nu_max and n_max must be at most 3")
    model, grid, dirac = spectral.model, spectral.grid, spectral.dirac
    L = left_mult_operator(profile.b, model, grid, dirac).matrix
    n_modes, N = grid.n_modes, spectral.N
    E = np.repeat(spectral.energy, N)
    dE = E[:, None] - E[None, :]
    op_norms, hs = {}, {}
    D = L.copy()
    for n in range(n_max + 1):
        if n:
            D = E[:, None] * D - D * E[None, :]
        op_norms[n] = float(np.linalg.norm(D, 2))
        for nu in range(nu_max + 1):
            hs[f"n={n},nu={nu}"] = float(np.linalg.norm(E[:, None] ** (-nu) * D))
    delta1 = E[:, None] * L - L * E[None, :]
    kernel = dE * L
    kernel_residual = float(np.max(np.abs(delta1 - kernel)))
    # bound fit over scalar mode pairs
    k = grid.momenta
    dist2 = np.sum((k[:, None, :] - k[None, :, :]) ** 2, axis=-1)
    dEs = np.abs(spectral.energy[:, None] - spectral.energy[None, :])
    fits = {}
    for n in range(1, n_max + 1):
        x, y = dist2.ravel() ** n, dEs.ravel() ** n
        alpha, beta = _fit_upper_envelope(x, y)
        fits[n] = {"alpha": alpha, "beta": beta, "holds": bool(np.all(y <= alpha * x + beta + 1e-12))}
    return {
        "operator_norms": op_norms,
        "hs_norms": hs,
        "delta_kernel_residual": kernel_residual,
        "bound_fits": fits,
        "finite": bool(all(np.isfinite(v) for v in list(op_norms.values()) + list(hs.values()))),
    }


def _fit_upper_envelope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares line through the data, shifted up until it dominates."""
    A = np.stack([x, np.ones_like(x)], axis=1)
    (alpha, beta), *_ = np.linalg.lstsq(A, y, rcond=None)
    alpha = max(float(alpha), 0.0)
    beta = float(np.max(y - alpha * x))
    return alpha, max(beta, 0.0)


def lm_stabilization(reports: list[dict], tol: float = CAUCHY_TOL) -> dict:
    """Smallest ``nu`` per ``n`` whose HS norm changes by less than ``tol`` between refinements."""
    keys = reports[0]["hs_norms"].keys()
    out = {}
    for key in keys:
        vals = [r["hs_norms"][key] for r in reports]
        diffs = [_rel(b, a) for a, b in zip(vals, vals[1:])]
        out[key] = {"values": vals, "stable": bool(all(d < tol for d in diffs))}
    stable_nu = {}
    for key, info in out.items():
        n, nu = (int(part.split("=")[1]) for part in key.split(","))
        if info["stable"] and (n not in stable_nu or nu < stable_nu[n]):
            stable_nu[n] = nu
    return {"per_norm": out, "stabilizing_nu": stable_nu}


# ----------------------------------------------------------------------------
# first-order coupling derivative


def free_profile(profile: PotentialProfile) -> PotentialProfile:
    return profile.scaled(0.0)


def bogoliubov_derivative_check(f: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, lambdas=(1e-2, 1e-3)) -> dict:
    """Compare ``(T_sc^{(lambda V)} w - w)/lambda`` with ``P0 R0 (V R0 f)``.

    ``w = P0 R0 f``. The residuals ``e(lambda)`` should vanish linearly.
    The extrapolated residual removes the linear term by combining the two
    smallest couplings and is reported relative to the right-hand side.
    """
    lambdas = [float(x) for x in lambdas]
    if any(x == 0 for x in lambdas) or len(lambdas) < 2:
        raise ValueError("need at least two non-zero couplings")
    free = free_profile(profile)
    free_pic = InteractionPicture(free, spectral)
    w = cauchy_data(f, free, spectral, integrator, 0.0, picture=free_pic)
    # R0 f is the free solution with Cauchy data w at t = 0
    phases = np.exp(1j * np.outer(f.times, spectral.lam))
    R0f = spectral.from_eigen((phases * spectral.to_eigen(w)[None, :]).T).T
    u = f.with_data(R0f, "R0 f")
    Vu = apply_potential(u, profile, spectral)
    rhs = cauchy_data(Vu, free, spectral, integrator, 0.0, picture=free_pic) if Vu.time_support() else np.zeros_like(w)
    residuals, errors = {}, {}
    for lam in lambdas:
        Tw = scattering_apply(w, profile.scaled(lam), spectral, integrator)
        r = (Tw - w) / lam - rhs
        residuals[lam] = r
        errors[lam] = float(np.linalg.norm(r))
    lo_pair = sorted(lambdas, key=abs)[:2]
    l1, l2 = lo_pair
    r0 = (l2 * residuals[l1] - l1 * residuals[l2]) / (l2 - l1)
    rhs_norm = float(np.linalg.norm(rhs))
    ratio = None
    big, small = max(lambdas, key=abs), min(lambdas, key=abs)
    if errors[small] > 0:
        ratio = errors[big] / errors[small]
    return {
        "w_norm": float(np.linalg.norm(w)),
        "rhs_norm": rhs_norm,
        "errors": {repr(k): v for k, v in errors.items()},
        "ratio": ratio,
        "expected_ratio": abs(big / small),
        "extrapolated_residual": float(np.linalg.norm(r0)) / rhs_norm if rhs_norm > 0 else float(np.linalg.norm(r0)),
    }


def smooth_step_derivative(t, center: float, half_width: float) -> np.ndarray:
    """Derivative of a smooth step rising from 0 to 1 across ``center +- half_width``."""
    from .dynamics import bump

    x = np.linspace(-1, 1, 20001)[1:-1]
    norm = half_width * np.sum(np.exp(1.0 - 1.0 / (1.0 - x**2))) * (2.0 / 20000)
    return bump(t, center, half_width, 1.0) / norm


def chain_map_check(f: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, step_half_width: float = 0.2) -> dict:
    """Transport a source across the potential and compare with ``T_sc``.

    The source is moved into the free region after the potential, solved
    with the interacting causal propagator, and moved into the free region
    before it. The free Cauchy data of the result must equal ``T_sc`` applied
    to the free Cauchy data of the original source.
    """
    from .dynamics import causal_propagator

    lo, hi = profile.support
    t = f.times
    if t[0] > lo - 2 * step_half_width - 0.1 or t[-1] < hi + 2 * step_half_width + 0.1:
        raise ValueError("time grid must extend beyond the steps on both sides")
    free = free_profile(profile)
    free_pic = InteractionPicture(free, spectral)
    pic = InteractionPicture(profile, spectral)
    R0f = causal_propagator(f, free, spectral, integrator, picture=free_pic)
    chi_late = smooth_step_derivative(t, hi + step_half_width + 0.05, step_half_width)
    f_late = f.with_data(1j * chi_late[:, None] * spectral.gamma0(R0f.data.T).T, "f_late")
    RVf = causal_propagator(f_late, profile, spectral, integrator, picture=pic)
    chi_early = smooth_step_derivative(t, lo - step_half_width - 0.05, step_half_width)
    f_early = f.with_data(1j * chi_early[:, None] * spectral.gamma0(RVf.data.T).T, "f_early")
    w = cauchy_data(f, free, spectral, integrator, picture=free_pic)
    w_late = cauchy_data(f_late, free, spectral, integrator, picture=free_pic)
    w_early = cauchy_data(f_early, free, spectral, integrator, picture=free_pic)
    Tw = scattering_apply(w, profile, spectral, integrator, picture=pic)
    scale = max(np.linalg.norm(w), 1e-300)
    return {
        "representative_residual": float(np.linalg.norm(w_late - w) / scale),
        "equivalence_residual": float(np.linalg.norm(w_early - Tw) / scale),
    }
