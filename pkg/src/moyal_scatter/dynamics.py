"""Free and interacting Dirac dynamics on the momentum lattice.

Conventions (all propagators satisfy ``(1/i) d/dt T = H T``):

* ``H0`` has symbol ``H(k) = -gamma_0 gamma^j k_j + gamma_0 m``;
  ``T_t = exp(i t H0)``.
* ``H_V(t) = H0 + a~(t) v`` where ``v`` already carries ``gamma_0``.
* ``D_V = gamma_0 (i d/dt + H_V)``, so ``D_V phi = 0`` for every solution.
* ``R^+ f(t) = -i \\int_{t'<t} T_{t,t'} gamma_0 f(t') dt'`` and
  ``R^- f(t) = +i \\int_{t'>t} T_{t,t'} gamma_0 f(t') dt'``.

With these signs ``<f, i R_V f>`` is non-negative.

The interacting evolution is integrated in the interaction picture in the
eigenbasis of ``H0``, where ``exp(i t H0)`` is diagonal. Outside the time
support of the potential the interaction-picture propagator is the
identity, so free stretches cost nothing and carry no integration error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .clifford import DiracRep, ModelParams
from .lattice import GridFunction, GridSpinor, OneParticleOperator, SpatialGrid
from .moyal import KINDS, potential_scalar_part

WINDOW_PAD = 1.5


class SpectralData:
    """Per-mode Dirac symbol, its spectral decomposition and assembled operators."""

    def __init__(self, model: ModelParams, grid: SpatialGrid, dirac: DiracRep):
        if model.s != grid.dim:
            raise ValueError("model and grid disagree on the spatial dimension")
        self.model, self.grid, self.dirac = model, grid, dirac
        g = dirac.gammas
        k = grid.momenta
        sym = np.broadcast_to(model.mass * g[0], (len(k), dirac.N, dirac.N)).astype(complex)
        for j in range(grid.dim):
            sym = sym - k[:, j, None, None] * (g[0] @ g[j + 1])
        self.symbol = sym
        self.energy = np.sqrt(np.sum(k**2, axis=1) + model.mass**2)
        if dirac.N != 2:
            raise ValueError("only two-component spinors are supported")
        evals, evecs = np.linalg.eigh(sym)
        self.eigvals = evals  # ascending per mode: negative branch first
        self.eigvecs = evecs

    @property
    def N(self) -> int:
        return self.dirac.N

    @property
    def dim(self) -> int:
        return self.grid.n_modes * self.N

    @cached_property
    def lam(self) -> np.ndarray:
        """Eigenvalues of H0 in eigenbasis ordering (mode-major).

        Taken from the closed form ``-E, +E`` so that equal energies are
        bitwise equal.
        """
        return np.stack([-self.energy, self.energy], axis=1).ravel()

    @cached_property
    def positive(self) -> np.ndarray:
        return self.lam > 0

    def _block_diag(self, blocks: np.ndarray) -> np.ndarray:
        n, N = self.grid.n_modes, self.N
        out = np.zeros((n, N, n, N), dtype=complex)
        idx = np.arange(n)
        out[idx, :, idx, :] = blocks
        return out.reshape(n * N, n * N)

    def apply_blocks(self, blocks: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply per-mode N x N blocks to vectors with the mode-major index first."""
        n, N = self.grid.n_modes, self.N
        x = v.reshape((n, N) + v.shape[1:])
        return np.einsum("mab,mb...->ma...", blocks, x).reshape(v.shape)

    def projector_blocks(self, sign: int) -> np.ndarray:
        one = np.eye(self.N)
        return 0.5 * (one + sign * self.symbol / self.energy[:, None, None])

    def propagator_blocks(self, t: float) -> np.ndarray:
        E = self.energy[:, None, None]
        one = np.eye(self.N)
        return np.cos(E * t) * one + 1j * np.sin(E * t) * self.symbol / E

    @cached_property
    def H0(self) -> OneParticleOperator:
        return OneParticleOperator(self._block_diag(self.symbol), "H0")

    @cached_property
    def absH0(self) -> OneParticleOperator:
        blocks = self.energy[:, None, None] * np.eye(self.N)
        return OneParticleOperator(self._block_diag(blocks), "|H0|")

    @cached_property
    def eps(self) -> OneParticleOperator:
        return OneParticleOperator(self._block_diag(self.symbol / self.energy[:, None, None]), "eps")

    @cached_property
    def p_plus(self) -> OneParticleOperator:
        return OneParticleOperator(self._block_diag(self.projector_blocks(+1)), "p+")

    @cached_property
    def p_minus(self) -> OneParticleOperator:
        return OneParticleOperator(self._block_diag(self.projector_blocks(-1)), "p-")

    # eigenbasis transforms -------------------------------------------------
    def to_eigen(self, v: np.ndarray) -> np.ndarray:
        return self.apply_blocks(np.conj(np.swapaxes(self.eigvecs, 1, 2)), v)

    def from_eigen(self, v: np.ndarray) -> np.ndarray:
        return self.apply_blocks(self.eigvecs, v)

    def matrix_to_eigen(self, A: np.ndarray) -> np.ndarray:
        left = self.to_eigen(A)
        return self.to_eigen(left.conj().T).conj().T

    def matrix_from_eigen(self, A: np.ndarray) -> np.ndarray:
        left = self.from_eigen(A)
        return self.from_eigen(left.conj().T).conj().T

    # charge conjugation ---------------------------------------------------
    @cached_property
    def _reflect(self) -> np.ndarray:
        N = self.N
        return (self.grid.reflection[:, None] * N + np.arange(N)[None, :]).ravel()

    def conjugate(self, v: np.ndarray) -> np.ndarray:
        """C on momentum-basis vectors (or on the columns of a matrix)."""
        w = np.conj(v[self._reflect])
        return self.apply_blocks(np.broadcast_to(self.dirac.conj_matrix, (self.grid.n_modes, self.N, self.N)), w)

    def conjugate_operator(self, A: np.ndarray) -> np.ndarray:
        """Matrix of the linear map ``C A C``."""
        # C A C v = Kb P conj(A) conj(Kb) P v with P the reflection permutation
        K = self.dirac.conj_matrix
        Kb = np.broadcast_to(K, (self.grid.n_modes, self.N, self.N))
        Kc = np.broadcast_to(np.conj(K), (self.grid.n_modes, self.N, self.N))
        X = np.conj(A)[np.ix_(self._reflect, self._reflect)]
        X = self.apply_blocks(Kb, X)
        X = self.apply_blocks(np.swapaxes(Kc, 1, 2), X.T).T
        return X

    def gamma0(self, v: np.ndarray) -> np.ndarray:
        g0 = np.broadcast_to(self.dirac.gammas[0], (self.grid.n_modes, self.N, self.N))
        return self.apply_blocks(g0, v)


def build_spectral(model: ModelParams, grid: SpatialGrid, dirac: DiracRep) -> SpectralData:
    return SpectralData(model, grid, dirac)


def free_propagator(t: float, spectral: SpectralData) -> OneParticleOperator:
    """``exp(i t H0)`` from the closed-form cos/sin kernel per mode."""
    return OneParticleOperator(spectral._block_diag(spectral.propagator_blocks(t)), f"T_{t:g}")


def bump(t, center: float, half_width: float, amplitude: float) -> np.ndarray:
    """``A exp(1 - 1/(1 - ((t - c)/w)^2))`` inside the support, zero outside."""
    x = (np.asarray(t, dtype=float) - center) / half_width
    inside = np.abs(x) < 1
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - xi * xi))
    return out


@dataclass(frozen=True)
class PotentialProfile:
    """Factorised potential ``c(t, x) = a(t) b(x)`` of a given kind."""

    center: float
    half_width: float
    amplitude: float
    b: GridFunction
    kind: str = "V0"
    coupling: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if np.max(np.abs(self.b.values.imag)) > 0:
            raise ValueError("b must be real-valued")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.half_width, self.center + self.half_width)

    def a(self, t) -> np.ndarray:
        return bump(t, self.center, self.half_width, self.amplitude)

    def a_tilde(self, t) -> np.ndarray:
        """Time factor multiplying ``v``: a for V0/Vi, a^2 for Vii, times the coupling."""
        a = self.a(t)
        return self.coupling * (a * a if self.kind == "Vii" else a)

    def window(self, pad: float = WINDOW_PAD) -> tuple[float, float]:
        lo, hi = self.support
        return (lo - pad, hi + pad)

    def scaled(self, factor: float) -> "PotentialProfile":
        """Profile of ``factor * V``."""
        return replace(self, coupling=self.coupling * factor)


@dataclass(frozen=True)
class Integrator:
    method: str = "rk4"
    dt: float = 1e-3
    dyson_order: int = 6

    def __post_init__(self):
        if self.method not in ("rk4", "dyson"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dyson_order < 0:
            raise ValueError("dyson_order must be non-negative")


class InteractionPicture:
    """Propagation of ``(1/i) d/dt y = a~(t) U(t) y`` in the H0 eigenbasis.

    ``U(t) = exp(-i t H0) v exp(i t H0)``. States are eigenbasis coefficient
    arrays of shape ``(dim,)`` or ``(dim, k)``.
    """

    def __init__(self, profile: PotentialProfile, spectral: SpectralData):
        self.profile, self.spectral = profile, spectral
        model, grid, dirac = spectral.model, spectral.grid, spectral.dirac
        # v = B (x) gamma_0, applied as B on modes between per-mode blocks
        self.B = potential_scalar_part(profile.kind, profile.b, model, grid)
        self._out_blocks = np.conj(np.swapaxes(spectral.eigvecs, 1, 2)) @ dirac.gammas[0]
        self.lam = spectral.lam

    @cached_property
    def v(self) -> np.ndarray:
        return np.kron(self.B, self.spectral.dirac.gammas[0])

    @cached_property
    def v_eig(self) -> np.ndarray:
        return self.spectral.matrix_to_eigen(self.v)

    def apply_v_eig(self, y: np.ndarray) -> np.ndarray:
        """``v`` in the H0 eigenbasis applied to ``(dim,)`` or ``(dim, k)`` arrays."""
        sp = self.spectral
        u = sp.apply_blocks(sp.eigvecs, y)
        z = self.B @ u.reshape(self.B.shape[1], -1)
        return sp.apply_blocks(self._out_blocks, z.reshape(y.shape))

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        a = float(self.profile.a_tilde(t))
        if a == 0.0:
            return np.zeros_like(y)
        ph = np.exp(1j * t * self.lam)
        if y.ndim == 2:
            z = self.apply_v_eig(ph[:, None] * y)
            return (1j * a) * (np.conj(ph)[:, None] * z)
        return (1j * a) * (np.conj(ph) * self.apply_v_eig(ph * y))

    def clipped(self, t_from: float, t_to: float) -> tuple[float, float] | None:
        lo, hi = self.profile.support
        a, b = min(t_from, t_to), max(t_from, t_to)
        a, b = max(a, lo), min(b, hi)
        if a >= b:
            return None
        return (a, b) if t_to >= t_from else (b, a)

    def rk4(self, y: np.ndarray, t_from: float, t_to: float, dt: float) -> np.ndarray:
        span = self.clipped(t_from, t_to)
        if span is None:
            return y.copy()
        t0, t1 = span
        n = max(1, math.ceil(abs(t1 - t0) / dt - 1e-9))
        h = (t1 - t0) / n
        f = self.rhs
        for j in range(n):
            t = t0 + j * h
            k1 = f(t, y)
            k2 = f(t + h / 2, y + (h / 2) * k1)
            k3 = f(t + h / 2, y + (h / 2) * k2)
            k4 = f(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y[:1])):
                raise FloatingPointError("non-finite state during interaction-picture integration")
        return y

    def dyson(self, y: np.ndarray, t_from: float, t_to: float, dt: float, order: int) -> np.ndarray:
        """Partial Dyson sum with nested cumulative trapezoid quadrature."""
        span = self.clipped(t_from, t_to)
        if span is None:
            return y.copy()
        t0, t1 = span
        n = max(1, math.ceil(abs(t1 - t0) / dt - 1e-9))
        ts = np.linspace(t0, t1, n + 1)
        h = (t1 - t0) / n
        term = np.broadcast_to(y, (n + 1,) + y.shape).copy()
        total = y.copy()
        for _ in range(order):
            g = np.stack([self.rhs(t, term[j]) for j, t in enumerate(ts)])
            cum = np.zeros_like(g)
            cum[1:] = np.cumsum(0.5 * h * (g[1:] + g[:-1]), axis=0)
            term = cum
            total = total + term[-1]
        return total

    def propagate(self, y: np.ndarray, t_from: float, t_to: float, integrator: Integrator) -> np.ndarray:
        if integrator.method == "rk4":
            return self.rk4(y, t_from, t_to, integrator.dt)
        return self.dyson(y, t_from, t_to, integrator.dt, integrator.dyson_order)

    def step_schrodinger(self, x: np.ndarray, t_from: float, t_to: float, integrator: Integrator) -> np.ndarray:
        """Eigenbasis Schrodinger-picture coefficients at ``t_to`` from those at ``t_from``."""
        y = np.exp(-1j * t_from * self.lam) * x if x.ndim == 1 else np.exp(-1j * t_from * self.lam)[:, None] * x
        y = self.propagate(y, t_from, t_to, integrator)
        ph = np.exp(1j * t_to * self.lam)
        return ph * y if y.ndim == 1 else ph[:, None] * y


def evolve(v, t_from: float, t_to: float, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None):
    """``T^V_{t_to, t_from} v`` for a GridSpinor or a momentum-basis vector."""
    pic = picture or InteractionPicture(profile, spectral)
    vec = v.to_vector() if isinstance(v, GridSpinor) else np.asarray(v, dtype=complex)
    x = spectral.to_eigen(vec)
    out = spectral.from_eigen(pic.step_schrodinger(x, t_from, t_to, integrator))
    if isinstance(v, GridSpinor):
        return GridSpinor.from_vector(v.grid, out, v.N)
    return out


def evolution_operator(t_from: float, t_to: float, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None) -> OneParticleOperator:
    """Matrix of ``T^V_{t_to, t_from}`` (all basis vectors evolved at once)."""
    pic = picture or InteractionPicture(profile, spectral)
    X = np.eye(spectral.dim, dtype=complex)
    Y = pic.step_schrodinger(X, t_from, t_to, integrator)
    return OneParticleOperator(spectral.matrix_from_eigen(Y), f"T^V_{t_to:g},{t_from:g}")


# ----------------------------------------------------------------------------
# spacetime fields and fundamental solutions


@dataclass
class SpacetimeField:
    """Uniformly sampled spinor field; ``data[n]`` is the momentum vector at ``times[n]``."""

    times: np.ndarray
    data: np.ndarray
    grid: SpatialGrid
    N: int
    label: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("need at least two time samples")
        steps = np.diff(self.times)
        if np.any(steps <= 0):
            raise ValueError("time samples must be strictly increasing")
        if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, abs(steps.mean())):
            raise ValueError("time samples must be uniform")
        if self.data.shape != (len(self.times), self.grid.n_modes * self.N):
            raise ValueError("data shape does not match times and grid")

    @property
    def dt(self) -> float:
        return float((self.times[-1] - self.times[0]) / (len(self.times) - 1))

    @classmethod
    def from_function(cls, times, grid: SpatialGrid, N: int, fn, label: str = "") -> "SpacetimeField":
        """Sample ``fn(t) -> GridSpinor | vector`` at every time."""
        rows = []
        for t in np.asarray(times, dtype=float):
            val = fn(t)
            rows.append(val.to_vector() if isinstance(val, GridSpinor) else np.asarray(val, dtype=complex))
        return cls(np.asarray(times, float), np.array(rows), grid, N, label)

    def with_data(self, data: np.ndarray, label: str = "") -> "SpacetimeField":
        return SpacetimeField(self.times, data, self.grid, self.N, label)

    def time_support(self, tol: float = 0.0) -> tuple[int, int] | None:
        nz = np.nonzero(np.max(np.abs(self.data), axis=1) > tol)[0]
        if len(nz) == 0:
            return None
        return int(nz[0]), int(nz[-1])

    def norm(self) -> float:
        return float(np.sqrt(self.dt * np.sum(np.abs(self.data) ** 2)))

    def slice_at(self, t: float) -> np.ndarray:
        n = int(round((t - self.times[0]) / self.dt))
        if not 0 <= n < len(self.times) or abs(self.times[n] - t) > 1e-9:
            raise ValueError(f"t={t} is not a sample time")
        return self.data[n]


def _sources(f: SpacetimeField, spectral: SpectralData) -> np.ndarray:
    """Eigenbasis coefficients of ``gamma_0 f(t)`` per time slice."""
    if f.time_support() is None:
        raise ValueError("source field has empty time support")
    return spectral.to_eigen(spectral.gamma0(f.data.T)).T


def fundamental_solution(sign: int, f: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None) -> SpacetimeField:
    """Retarded (``sign=+1``) or advanced (``sign=-1``) solution of ``D_V u = f``.

    Trapezoid rule in time on the sample grid of ``f``; the source slice at
    ``t'`` is propagated to ``t`` with ``T^V_{t,t'}``. Slices strictly before
    (after) the support of ``f`` are exactly zero for ``sign=+1`` (``-1``).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    pic = picture or InteractionPicture(profile, spectral)
    g = _sources(f, spectral)
    times, dt = f.times, f.dt
    nt = len(times)
    out = np.zeros_like(g)
    order = range(nt) if sign > 0 else range(nt - 1, -1, -1)
    acc = None  # sum over strictly earlier (later) slices at the current time
    prev = None
    for n in order:
        if acc is not None:
            acc = pic.step_schrodinger(acc + g[prev], times[prev], times[n], integrator)
        elif np.any(g[n]):
            acc = np.zeros_like(g[n])
        if acc is not None:
            out[n] = (-1j * sign * dt) * (acc + 0.5 * g[n])
        prev = n
    data = spectral.from_eigen(out.T).T
    return f.with_data(data, "R+f" if sign > 0 else "R-f")


def causal_propagator(f: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, *, picture: InteractionPicture | None = None) -> SpacetimeField:
    """``R_V f = R^+_V f - R^-_V f``."""
    pic = picture or InteractionPicture(profile, spectral)
    plus = fundamental_solution(+1, f, profile, spectral, integrator, picture=pic)
    minus = fundamental_solution(-1, f, profile, spectral, integrator, picture=pic)
    return f.with_data(plus.data - minus.data, "R_V f")


def cauchy_data(f: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, integrator: Integrator, t: float = 0.0, *, picture: InteractionPicture | None = None) -> np.ndarray:
    """``P_t R_V f`` computed by one backward sweep over the sources.

    Uses ``R_V f(t) = -i sum_j dt T^V_{t, t_j} gamma_0 f(t_j)``.
    """
    pic = picture or InteractionPicture(profile, spectral)
    g = _sources(f, spectral)
    times = f.times
    acc = np.zeros(spectral.dim, dtype=complex)
    for n in range(len(times) - 1, -1, -1):
        acc = acc + g[n]
        if n > 0:
            acc = pic.step_schrodinger(acc, times[n], times[n - 1], integrator)
    acc = pic.step_schrodinger(acc, times[0], t, integrator)
    return spectral.from_eigen(-1j * f.dt * acc)


def apply_potential(u: SpacetimeField, profile: PotentialProfile, spectral: SpectralData, *, picture: InteractionPicture | None = None) -> SpacetimeField:
    """Spacetime action ``(V u)(t) = a~(t) gamma_0 v u(t)``."""
    pic = picture or InteractionPicture(profile, spectral)
    a = profile.a_tilde(u.times)
    vu = (pic.v @ u.data.T).T
    return u.with_data(a[:, None] * spectral.gamma0(vu.T).T, "V u")


def dirac_operator(u: SpacetimeField, profile: PotentialProfile | None, spectral: SpectralData, *, picture: InteractionPicture | None = None) -> SpacetimeField:
    """``D_V u`` with centered time differences on interior slices.

    The first and last slices are left at zero.
    """
    out = np.zeros_like(u.data)
    dudt = (u.data[2:] - u.data[:-2]) / (2 * u.dt)
    inner = 1j * dudt + spectral.apply_blocks(spectral.symbol, u.data[1:-1].T).T
    out[1:-1] = spectral.gamma0(inner.T).T
    res = u.with_data(out, "D u")
    if profile is not None:
        res.data[1:-1] += apply_potential(u, profile, spectral, picture=picture).data[1:-1]
    return res


def pairing(f: SpacetimeField, h: SpacetimeField, spectral: SpectralData) -> complex:
    """``<f, h> = \\int f(t)^* gamma_0 h(t) dt`` by the rectangle rule."""
    return complex(f.dt * np.vdot(f.data.T, spectral.gamma0(h.data.T)))


def form(f: SpacetimeField, h: SpacetimeField, profile, spectral, integrator, *, picture=None) -> complex:
    """``(f, h)_V = <f, i R_V h>``."""
    Rh = causal_propagator(h, profile, spectral, integrator, picture=picture)
    return pairing(f, Rh.with_data(1j * Rh.data), spectral)


def conjugate_field(f: SpacetimeField, spectral: SpectralData) -> SpacetimeField:
    return f.with_data(spectral.conjugate(f.data.T).T, f"C{f.label}")
