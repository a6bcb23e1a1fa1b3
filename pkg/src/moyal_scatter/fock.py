"""Truncated fermionic Fock space over a C-closed set of momentum modes.

The one-particle subspace is spanned by positive-energy eigenvectors
``chi+_j`` (lowest energies first) and their conjugates ``chi-_j = C chi+_j``.
Fields are ``psi(v) = A(p+ C v) + A^*(p+ v)`` with
``{A(f), A^*(g)} = kappa (f, g)``; ``kappa = 2`` by default, so that
``{psi(v)^*, psi(w)} = 2 (v, w)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dynamics import InteractionPicture, PotentialProfile, SpacetimeField, SpectralData, apply_potential, cauchy_data

MAX_MODES = 12


@dataclass(frozen=True)
class ModeSelection:
    """Orthonormal C-closed basis ``[chi+_1..chi+_M, chi-_1..chi-_M]`` as columns."""

    spectral: SpectralData
    chi_plus: np.ndarray  # (dim, M)
    chi_minus: np.ndarray  # (dim, M)
    modes: tuple[int, ...]

    @property
    def M(self) -> int:
        return self.chi_plus.shape[1]

    @cached_property
    def basis(self) -> np.ndarray:
        return np.hstack([self.chi_plus, self.chi_minus])

    def compress(self, A: np.ndarray) -> tuple[np.ndarray, float]:
        """``E^* A E`` and the relative leakage ``||(1 - E E^*) A E|| / ||A E||``."""
        E = self.basis
        AE = A @ E
        block = E.conj().T @ AE
        denom = np.linalg.norm(AE)
        leak = np.linalg.norm(AE - E @ block) / denom if denom > 0 else 0.0
        return block, float(leak)

    def embed(self, coeffs: np.ndarray) -> np.ndarray:
        return self.basis @ coeffs

    def rotated(self, U: np.ndarray) -> "ModeSelection":
        """Same subspace with ``chi+ -> chi+ U`` and conjugates to match."""
        plus = self.chi_plus @ U
        return ModeSelection(self.spectral, plus, self.spectral.conjugate(plus), self.modes)


def select_modes(spectral: SpectralData, M: int) -> ModeSelection:
    """Positive-energy eigenvectors of the ``M`` lowest-energy momentum modes."""
    if M < 1 or M % 2:
        raise ValueError("M must be a positive even number")
    if M > MAX_MODES:
        raise ValueError(f"M={M} exceeds the size guard of {MAX_MODES}")
    order = np.lexsort((np.arange(spectral.grid.n_modes), spectral.energy))[:M]
    N = spectral.N
    plus = np.zeros((spectral.dim, M), dtype=complex)
    for col, mode in enumerate(order):
        plus[mode * N:(mode + 1) * N, col] = spectral.eigvecs[mode, :, -1]
    minus = spectral.conjugate(plus)
    return ModeSelection(spectral, plus, minus, tuple(int(m) for m in order))


def _jordan_wigner(M: int) -> list[sp.csr_matrix]:
    """Annihilators ``a_j`` on ``2^M`` occupation states; bit j is mode j."""
    D = 1 << M
    states = np.arange(D)
    out = []
    for j in range(M):
        occupied = (states >> j) & 1 == 1
        src = states[occupied]
        lower = src & ((1 << j) - 1)
        parity = np.array([bin(x).count("1") & 1 for x in lower])
        data = np.where(parity, -1.0, 1.0)
        out.append(sp.csr_matrix((data.astype(complex), (src ^ (1 << j), src)), shape=(D, D)))
    return out


class FockSpace:
    """CAR fields over a :class:`ModeSelection`."""

    def __init__(self, selection: ModeSelection, kappa: float = 2.0):
        if selection.M > MAX_MODES:
            raise ValueError(f"M={selection.M} exceeds the size guard of {MAX_MODES}")
        self.selection = selection
        self.kappa = float(kappa)
        self.a = _jordan_wigner(selection.M)
        self.adag = [x.conj().T.tocsr() for x in self.a]
        self.dim = 1 << selection.M
        self.vacuum = np.zeros(self.dim, dtype=complex)
        self.vacuum[0] = 1.0
        self.identity = sp.identity(self.dim, dtype=complex, format="csr")

    @property
    def spectral(self) -> SpectralData:
        return self.selection.spectral

    def annihilator(self, f: np.ndarray) -> sp.csr_matrix:
        """``A(f)``, antilinear in the one-particle vector ``f``."""
        c = self.selection.chi_plus.conj().T @ f
        return np.sqrt(self.kappa) * sum((np.conj(cj) * aj for cj, aj in zip(c, self.a)), sp.csr_matrix((self.dim, self.dim), dtype=complex))

    def creator(self, f: np.ndarray) -> sp.csr_matrix:
        c = self.selection.chi_plus.conj().T @ f
        return np.sqrt(self.kappa) * sum((cj * aj for cj, aj in zip(c, self.adag)), sp.csr_matrix((self.dim, self.dim), dtype=complex))

    def psi(self, v: np.ndarray) -> sp.csr_matrix:
        """Field ``psi(v) = A(p+ C v) + A^*(p+ v)`` for a one-particle vector ``v``."""
        spec = self.spectral
        P = spec.p_plus.matrix
        return (self.annihilator(P @ spec.conjugate(v)) + self.creator(P @ v)).tocsr()

    def psi_coeffs(self, c: np.ndarray) -> sp.csr_matrix:
        return self.psi(self.selection.embed(c))

    @cached_property
    def basis_fields(self) -> list[sp.csr_matrix]:
        return [self.psi(self.selection.basis[:, j]) for j in range(2 * self.selection.M)]


def build_fock(selection: ModeSelection, kappa: float = 2.0) -> FockSpace:
    return FockSpace(selection, kappa)


def car_residuals(fock: FockSpace, rng: np.random.Generator | None = None) -> dict[str, float]:
    """Max residuals of the CAR, the self-duality and linearity over the basis."""
    E = fock.selection.basis
    fields = fock.basis_fields
    n = len(fields)
    car = 0.0
    for i in range(n):
        for j in range(n):
            anti = fields[i].conj().T @ fields[j] + fields[j] @ fields[i].conj().T
            target = fock.kappa * np.vdot(E[:, i], E[:, j]) * fock.identity
            car = max(car, _maxabs(anti - target))
    dual = max(_maxabs(fields[i].conj().T - fock.psi(fock.spectral.conjugate(E[:, i]))) for i in range(n))
    rng = rng or np.random.default_rng(0)
    c = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    lin = _maxabs(fock.psi_coeffs(c) - sum((cj * f for cj, f in zip(c, fields)), sp.csr_matrix((fock.dim, fock.dim), dtype=complex)))
    vac = max(np.linalg.norm(fock.annihilator(E[:, i]) @ fock.vacuum) for i in range(n))
    return {"car": car, "self_dual": dual, "linearity": lin, "vacuum_annihilated": float(vac)}


def two_point(fock: FockSpace, v: np.ndarray, w: np.ndarray) -> complex:
    Om = fock.vacuum
    return complex(np.vdot(fock.psi(v) @ Om, fock.psi(w) @ Om))


def _maxabs(X) -> float:
    if sp.issparse(X):
        return float(np.max(np.abs(X.data))) if X.nnz else 0.0
    return float(np.max(np.abs(X))) if X.size else 0.0


def normal_ordered_bilinear(A: np.ndarray, fock: FockSpace, basis: np.ndarray | None = None) -> sp.csr_matrix:
    """Second quantization ``:G(A):`` of a compressed one-particle operator.

    ``A`` is a ``2M x 2M`` matrix in the selection basis. The bilinear is
    ``-(1/(2 kappa)) sum_j psi(A e_j)^* psi(e_j)`` with the vacuum expectation
    removed; the prefactor makes ``[:G(A):, psi(v)] = psi(A v)`` for
    hermitian ``A`` anticommuting with ``C``. ``basis`` (unitary, columns in
    selection coordinates) replaces the orthonormal basis ``e_j`` of the sum.
    """
    n = 2 * fock.selection.M
    if A.shape != (n, n):
        raise ValueError(f"expected a {n}x{n} operator in the selection basis, got {A.shape}")
    U = np.eye(n) if basis is None else np.asarray(basis)
    if U.shape != (n, n):
        raise ValueError(f"basis must be {n}x{n}, got {U.shape}")
    fields = fock.basis_fields
    zero = sp.csr_matrix((fock.dim, fock.dim), dtype=complex)

    def combo(c):
        return sum((c[k] * fields[k] for k in range(n) if c[k] != 0), zero)

    AU = A @ U
    G = zero
    for j in range(n):
        G = G + combo(AU[:, j]).conj().T @ combo(U[:, j])
    G = (-0.5 / fock.kappa) * G
    vev = np.vdot(fock.vacuum, G @ fock.vacuum)
    return (G - vev * fock.identity).tocsr()


def derivation_residual(G: sp.csr_matrix, A: np.ndarray, fock: FockSpace, vectors: np.ndarray | None = None) -> float:
    """``max_v ||[G, psi(v)] - psi(A v)||`` over selection-basis coefficient vectors."""
    n = 2 * fock.selection.M
    vectors = np.eye(n) if vectors is None else vectors
    worst = 0.0
    for c in vectors.T:
        P = fock.psi_coeffs(c)
        worst = max(worst, _maxabs(G @ P - P @ G - fock.psi_coeffs(A @ c)))
    return worst


def c_odd_part(A: np.ndarray, selection: ModeSelection) -> np.ndarray:
    """Compressed ``(A - C A C)/2`` for a compressed operator ``A``."""
    E = selection.basis
    full = E @ A @ E.conj().T
    CAC = selection.spectral.conjugate_operator(full)
    return E.conj().T @ (0.5 * (full - CAC)) @ E


def implementer(T: np.ndarray, fock: FockSpace, *, unitarity_tol: float = 1e-8) -> dict:
    """Unitary ``S`` with ``S psi(v) S^* = psi(T v)`` on the truncated space.

    ``T`` is ``2M x 2M`` in the selection basis. Since ``psi(chi-_j)``
    annihilates the vacuum, ``S Omega`` spans the common kernel of the
    ``psi(T chi-_j)``; its dimension is the dimension of the intertwiner
    space. The remaining columns follow from
    ``S a_j^* S^* = psi(T chi+_j)/sqrt(kappa)``.
    """
    M = fock.selection.M
    defect = float(np.linalg.norm(T.conj().T @ T - np.eye(2 * M), 2))
    if defect > unitarity_tol:
        raise ValueError(f"compressed operator is not unitary (defect {defect:.2e})")
    minus = [fock.psi_coeffs(T[:, M + j]) for j in range(M)]
    H = sum((B.conj().T @ B for B in minus), sp.csr_matrix((fock.dim, fock.dim), dtype=complex))
    if fock.dim <= 1024:
        evals, evecs = np.linalg.eigh(H.toarray())
        evals, evecs = evals[:2], evecs[:, :2]
    else:
        evals, evecs = spla.eigsh(H, k=2, which="SA")
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    scale = max(1.0, float(np.max(np.abs(evals))))
    null_dim = int(np.sum(evals < 1e-10 * scale))
    if null_dim == 0:
        raise ValueError("empty solution space: inconsistent truncation")
    omega = evecs[:, 0]
    if abs(omega[0]) > 0:
        omega = omega * (abs(omega[0]) / omega[0])
    plus = [fock.psi_coeffs(T[:, j]) / np.sqrt(fock.kappa) for j in range(M)]
    S = np.zeros((fock.dim, fock.dim), dtype=complex)
    S[:, 0] = omega
    for n in range(1, fock.dim):
        j = (n & -n).bit_length() - 1  # lowest occupied mode: |n> = a_j^* |n - e_j>
        S[:, n] = plus[j] @ S[:, n ^ (1 << j)]
    unit = float(np.linalg.norm(S.conj().T @ S - np.eye(fock.dim), 2))
    resid = 0.0
    for c in np.eye(2 * M).T:
        lhs = S @ fock.psi_coeffs(c).toarray() @ S.conj().T
        resid = max(resid, float(np.max(np.abs(lhs - fock.psi_coeffs(T @ c).toarray()))))
    return {"S": S, "null_dim": null_dim, "unitarity_defect": unit, "intertwining_residual": resid, "compressed_defect": defect}


def exp_generator(G: sp.csr_matrix) -> np.ndarray:
    return scipy.linalg.expm(1j * G.toarray())


def wick_square_operator(profile: PotentialProfile, selection: ModeSelection, times: np.ndarray, integrator) -> tuple[np.ndarray, float]:
    """Compressed ``B_c`` with ``B_c w = -i P0 R0 (c R0 f)`` for Cauchy data ``w``.

    Each selection vector is lifted to the free solution through it, multiplied
    by the spacetime potential slice-wise and returned to Cauchy data by the
    free causal propagator. Returns the ``2M x 2M`` block and the truncation
    leakage.
    """
    spec = selection.spectral
    free = profile.scaled(0.0)
    pic = InteractionPicture(free, spec)
    E = selection.basis
    phases = np.exp(1j * np.outer(times, spec.lam))
    cols = []
    for j in range(E.shape[1]):
        lift = spec.from_eigen((phases * spec.to_eigen(E[:, j])[None, :]).T).T
        u = SpacetimeField(times, lift, spec.grid, spec.N, "R0 lift")
        cu = apply_potential(u, profile, spec)
        if cu.time_support() is None:
            cols.append(np.zeros(spec.dim, dtype=complex))
            continue
        cols.append(-1j * cauchy_data(cu, free, spec, integrator, 0.0, picture=pic))
    B = np.stack(cols, axis=1)
    block = E.conj().T @ B
    denom = np.linalg.norm(B)
    leak = float(np.linalg.norm(B - E @ block) / denom) if denom > 0 else 0.0
    return block, leak
