"""Model parameters, gamma matrices and charge conjugation.

Only spacetime dimensions 2 and 3 are supported. The metric is
diag(1, -1, ..., -1); gamma_0 is hermitian and the spatial gammas are
antihermitian. Charge conjugation is antilinear and stored as a matrix K
acting after componentwise complex conjugation, ``C v = K @ conj(v)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SIGMA = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class ModelParams:
    """Dimensions, deformation and mass of the model.

    ``q`` counts commutative directions including time, ``p`` counts the
    Moyal-paired spatial directions.
    """

    q: int
    p: int
    theta: float
    mass: float
    moyal_matrix: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.q + self.p

    @property
    def s(self) -> int:
        return self.n - 1

    @property
    def spatial_moyal(self) -> np.ndarray:
        """Spatial block of the Moyal matrix (time row and column dropped)."""
        return self.moyal_matrix[1:, 1:]

    def to_dict(self) -> dict:
        return {"q": self.q, "p": self.p, "theta": self.theta, "mass": self.mass}


def build_model(q: int, p: int, theta: float, mass: float) -> ModelParams:
    """Validate the parameters and assemble the full n x n Moyal matrix.

    The standard symplectic block ``(theta/2) [[0, 1], [-1, 0]]`` sits on the
    last ``p`` coordinates, so the time row and column always vanish.
    """
    if int(q) != q or int(p) != p:
        raise ValueError("q and p must be integers")
    q, p = int(q), int(p)
    if p % 2:
        raise ValueError("p must be even")
    if p < 0:
        raise ValueError("p must be non-negative")
    if q < 1:
        raise ValueError("q must be at least 1 (time is commutative)")
    if q + p not in (2, 3):
        raise ValueError(f"unsupported spacetime dimension n={q + p}; expected 2 or 3")
    if not np.isfinite(mass) or mass <= 0:
        raise ValueError("mass must be positive")
    if not np.isfinite(theta) or theta < 0:
        raise ValueError("theta must be non-negative")
    if p > 0 and theta <= 0:
        raise ValueError("theta must be positive when p > 0")
    n = q + p
    M = np.zeros((n, n))
    for j in range(p // 2):
        a = q + 2 * j
        M[a, a + 1] = theta / 2
        M[a + 1, a] = -theta / 2
    M.setflags(write=False)
    # theta is irrelevant without Moyal pairs; normalise it so reports are canonical.
    return ModelParams(q=q, p=p, theta=float(theta) if p else 0.0, mass=float(mass), moyal_matrix=M)


@dataclass(frozen=True)
class DiracRep:
    """Reference representation of the Clifford algebra with conjugation."""

    gammas: tuple[np.ndarray, ...]
    conj_matrix: np.ndarray

    @property
    def N(self) -> int:
        return self.gammas[0].shape[0]

    @property
    def metric(self) -> np.ndarray:
        n = len(self.gammas)
        return np.diag([1.0] + [-1.0] * (n - 1))

    def conjugate(self, v: np.ndarray) -> np.ndarray:
        """Apply C to spinor data whose last axis is the spinor index."""
        return np.conj(v) @ self.conj_matrix.T

    def orientation(self) -> np.ndarray:
        out = np.eye(self.N, dtype=complex)
        for g in self.gammas:
            out = out @ g
        return out


def _spinor_dim(n: int) -> int:
    return 2 ** (n // 2) if n % 2 == 0 else 2 ** ((n - 1) // 2)


def _gammas(n: int) -> tuple[np.ndarray, ...]:
    s0, s1, s2, s3 = SIGMA
    if n == 2:
        return (s1, 1j * s2)
    if n == 3:
        return (s3, 1j * s1, 1j * s2)
    raise ValueError(f"no reference representation for n={n}")


def _find_conjugation(gammas) -> np.ndarray:
    """Search Pauli products with unit phases for K with K conj(K)=1 and
    K conj(g) = -g K for every gamma."""
    for phase, P in itertools.product((1, 1j, -1, -1j), SIGMA):
        K = phase * P
        if not np.allclose(K @ K.conj(), np.eye(2), atol=1e-14):
            continue
        if all(np.allclose(K @ g.conj(), -g @ K, atol=1e-14) for g in gammas):
            return K
    raise RuntimeError("no charge conjugation found among Pauli candidates")


def build_dirac_rep(model: ModelParams) -> DiracRep:
    gammas = _gammas(model.n)
    assert gammas[0].shape[0] == _spinor_dim(model.n)
    K = _find_conjugation(gammas)
    for g in gammas:
        g.setflags(write=False)
    K.setflags(write=False)
    return DiracRep(gammas=gammas, conj_matrix=K)


def clifford_residuals(rep: DiracRep) -> dict[str, float]:
    """Max-abs residuals of every defining identity of the representation."""
    g, eta, K = rep.gammas, rep.metric, rep.conj_matrix
    one = np.eye(rep.N)
    anti = max(
        np.abs(g[a] @ g[b] + g[b] @ g[a] - 2 * eta[a, b] * one).max()
        for a in range(len(g))
        for b in range(len(g))
    )
    herm = max(
        np.abs(g[0] - g[0].conj().T).max(),
        *(np.abs(gk + gk.conj().T).max() for gk in g[1:]),
    )
    conj_inv = np.abs(K @ K.conj() - one).max()
    conj_anti = max(np.abs(K @ gm.conj() + gm @ K).max() for gm in g)
    orient = rep.orientation()
    unitary = np.abs(orient @ orient.conj().T - one).max()
    return {
        "anticommutator": float(anti),
        "hermiticity": float(herm),
        "conjugation_involution": float(conj_inv),
        "conjugation_anticommutes": float(conj_anti),
        "orientation_unitary": float(unitary),
    }
