"""Moyal star product and the left/right Moyal multiplication operators.

Everything is evaluated as a twisted convolution on the momentum lattice:

    (f * g)~(k) = sum_u f~(k - u) exp(i u.M k) g~(u),

with ``f~`` the site-averaged transform and ``M`` the spatial Moyal matrix.
At ``theta = 0`` the phase is identically one and the sum is the ordinary
periodic convolution, i.e. the pointwise product.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .clifford import DiracRep, ModelParams
from .lattice import GridFunction, OneParticleOperator, SpatialGrid

KINDS = ("V0", "Vi", "Vii")
_CHUNK = 1 << 22  # kernel entries assembled at a time


def _check_model(model: ModelParams, grid: SpatialGrid):
    if model.s != grid.dim:
        raise ValueError(f"model has s={model.s} spatial dimensions, grid has {grid.dim}")


def _lookup(transform: np.ndarray, grid: SpatialGrid, labels: np.ndarray) -> np.ndarray:
    """Periodic lookup of a centered-order lattice transform at integer labels."""
    idx = tuple(((labels[..., d] + grid.points // 2) % grid.points) for d in range(grid.dim))
    return transform[idx]


def twisted_kernel(transform: np.ndarray, grid: SpatialGrid, M: np.ndarray, rows: np.ndarray, cols: np.ndarray, sign: int = 1) -> np.ndarray:
    """Matrix ``K[r, c] = transform(k_r - k_c) exp(sign * i k_c.M k_r)``.

    ``rows`` and ``cols`` are integer momentum labels of shape (n, s).
    """
    out = np.empty((len(rows), len(cols)), dtype=complex)
    step = max(1, _CHUNK // max(1, len(cols)))
    Mkc = (grid.dk * cols) @ M  # row c holds k_c.M
    twisted = bool(np.any(M))
    for start in range(0, len(rows), step):
        r = rows[start:start + step]
        block = _lookup(transform, grid, r[:, None, :] - cols[None, :, :])
        if twisted:
            phase = (grid.dk * r) @ Mkc.T
            block *= np.exp(1j * sign * phase)
        out[start:start + step] = block
    return out


def _full_labels(grid: SpatialGrid) -> np.ndarray:
    g = np.meshgrid(*([grid.full_ints] * grid.dim), indexing="ij")
    return np.stack([x.ravel() for x in g], axis=1)


def star_product(f: GridFunction, g: GridFunction, model: ModelParams, grid: SpatialGrid | None = None) -> GridFunction:
    """Discretized ``f * g`` as a dense twisted convolution."""
    grid = f.grid if grid is None else grid
    if f.grid != grid or g.grid != grid:
        raise ValueError("star_product operands must share the grid")
    _check_model(model, grid)
    if not (np.all(np.isfinite(f.values)) and np.all(np.isfinite(g.values))):
        raise ValueError("star_product received non-finite samples")
    F, G = grid.transform_mean(f.values), grid.transform_mean(g.values)
    if grid.dim <= 2:
        h = _twisted_convolution(F, G, grid, model.spatial_moyal)
    else:
        labels = _full_labels(grid)
        h = (twisted_kernel(F, grid, model.spatial_moyal, labels, labels) @ G.ravel()).reshape(grid.shape)
    scale = np.sqrt(grid.weight * grid.points**grid.dim)
    return GridFunction.from_momentum(grid, h * scale)


def _twisted_convolution(F: np.ndarray, G: np.ndarray, grid: SpatialGrid, M: np.ndarray) -> np.ndarray:
    """``sum_c F(r - c) G(c) exp(i k_c.M k_r)`` over the full lattice for s <= 2.

    Same sum as the dense ``twisted_kernel`` product. In two dimensions the
    twist factorizes, so the sum over the second label is a circular
    convolution done by FFT.
    """
    n = grid.points

    def circ(A, B):  # sum_j A[i - j] B[j] along the last axis, centered order
        A = np.roll(A, -(n // 2), axis=-1)
        return np.fft.ifft(np.fft.fft(A, axis=-1) * np.fft.fft(B, axis=-1), axis=-1)

    if grid.dim == 1:
        return circ(F, G)
    a = grid.full_ints
    beta = grid.dk**2 * M[1, 0]  # c1 r0 term
    gamma = grid.dk**2 * M[0, 1]  # c0 r1 term
    rows = (a[:, None] - a[None, :] + n // 2) % n  # [r0, c0] -> index of r0 - c0
    Gp = G[None, :, :] * np.exp(1j * beta * np.outer(a, a))[:, None, :]  # [r0, c0, c1]
    inner = circ(F[rows], Gp)  # [r0, c0, r1]
    return np.einsum("acb,cb->ab", inner, np.exp(1j * gamma * np.outer(a, a)))


def _scalar_kernel(b: GridFunction, model: ModelParams, grid: SpatialGrid, sign: int, twisted: bool = True) -> np.ndarray:
    _check_model(model, grid)
    if b.grid != grid:
        raise ValueError("profile sampled on a different grid")
    M = model.spatial_moyal if twisted else np.zeros_like(model.spatial_moyal)
    labels = grid.mode_ints
    return twisted_kernel(grid.transform_mean(b.values), grid, M, labels, labels, sign)


def _spinorial(kernel: np.ndarray, block: np.ndarray) -> np.ndarray:
    return np.kron(kernel, block)


def left_mult_operator(b: GridFunction, model: ModelParams, grid: SpatialGrid, dirac: DiracRep) -> OneParticleOperator:
    """Momentum kernel ``b~(k - u) exp(i u.M k)`` acting on every spinor component."""
    K = _scalar_kernel(b, model, grid, +1)
    return OneParticleOperator(_spinorial(K, np.eye(dirac.N)), "L_b")


def right_mult_operator(b: GridFunction, model: ModelParams, grid: SpatialGrid, dirac: DiracRep) -> OneParticleOperator:
    """Momentum kernel ``b~(k - u) exp(-i u.M k)``; equals L_b when theta = 0."""
    K = _scalar_kernel(b, model, grid, -1)
    return OneParticleOperator(_spinorial(K, np.eye(dirac.N)), "R_b")


def potential_scalar_part(kind: str, b: GridFunction, model: ModelParams, grid: SpatialGrid) -> np.ndarray:
    """Scalar (mode x mode) operator B with ``v = gamma_0 (x) B``."""
    if kind == "V0":
        return _scalar_kernel(b, model, grid, +1, twisted=False)
    if kind == "Vi":
        return _scalar_kernel(b, model, grid, +1) + _scalar_kernel(b, model, grid, -1)
    if kind == "Vii":
        L = _scalar_kernel(b, model, grid, +1)
        R = _scalar_kernel(b, model, grid, -1)
        # L and R commute in the continuum; the symmetric form keeps the
        # truncated product hermitian and C-odd exactly.
        return 0.5 * (L @ R + R @ L)
    raise ValueError(f"unknown potential kind {kind!r}; expected one of {KINDS}")


def potential_operator(kind: str, b: GridFunction, model: ModelParams, grid: SpatialGrid, dirac: DiracRep) -> OneParticleOperator:
    """Spatial potential operator ``v`` (the time factor is applied later).

    V0: gamma_0 b, Vi: gamma_0 (L_b + R_b), Vii: gamma_0 L_b R_b.
    """
    B = potential_scalar_part(kind, b, model, grid)
    return OneParticleOperator(_spinorial(B, dirac.gammas[0]), f"v_{kind}")


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value; ``max |eigenvalue|`` when the matrix is hermitian."""
    matrix = np.asarray(matrix)
    if matrix.shape[0] == matrix.shape[1] and np.allclose(matrix, matrix.conj().T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(matrix).max())):
        return float(np.abs(scipy.linalg.eigvalsh(matrix)).max())
    return float(scipy.linalg.svdvals(matrix)[0])


def l2_bound(b: GridFunction, model: ModelParams, exponent: float | None = None) -> float:
    """``(2 pi theta)^{-exponent} ||b||_2``, by default with ``exponent = p/2``.

    ``exponent = p/4`` gives the sharp constant, attained by the Gaussian
    projector ``2 exp(-|x|^2 / theta)``. Infinite in the commutative case.
    """
    if model.p == 0:
        return float("inf")
    e = model.p / 2 if exponent is None else exponent
    return (2 * np.pi * model.theta) ** (-e) * b.l2_norm()
