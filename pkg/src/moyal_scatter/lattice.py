"""Periodic spatial lattice, sampled functions and spinors, dense operators.

One-particle vectors live in an orthonormal plane-wave basis. The basis
omits the unpaired Nyquist momentum in every direction, so the mode set is
symmetric under ``k -> -k`` and charge conjugation maps it onto itself.
Vectors are flattened mode-major: index ``mode * N + spinor``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Torus ``[-L/2, L/2)^s`` sampled with ``points`` sites per direction."""

    box_length: float
    points: int
    dim: int

    def __post_init__(self):
        if self.points < 8 or self.points % 2:
            raise ValueError("points_per_dim must be even and at least 8")
        if self.dim not in (1, 2):
            raise ValueError("only one or two spatial dimensions are supported")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def dx(self) -> float:
        return self.box_length / self.points

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.box_length

    @property
    def weight(self) -> float:
        """Quadrature weight ``dx**s``."""
        return self.dx**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.box_length / 2 + self.dx * np.arange(self.points)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def full_ints(self) -> np.ndarray:
        """Integer momentum labels of the full lattice, centered order."""
        return np.arange(-self.points // 2, self.points // 2)

    @cached_property
    def full_momenta(self) -> tuple[np.ndarray, ...]:
        k = self.dk * self.full_ints
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def mode_ints(self) -> np.ndarray:
        """Integer labels (n_modes, s) of the symmetric mode set."""
        m = self.full_ints[1:]
        grids = np.meshgrid(*([m] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def momenta(self) -> np.ndarray:
        return self.dk * self.mode_ints

    @property
    def n_modes(self) -> int:
        return (self.points - 1) ** self.dim

    @cached_property
    def reflection(self) -> np.ndarray:
        """Permutation sending mode k to mode -k."""
        m = self.mode_ints
        n = self.points - 1
        idx = np.zeros(len(m), dtype=np.int64)
        for d in range(self.dim):
            idx = idx * n + (-m[:, d] + (self.points // 2 - 1))
        return idx

    def _sign(self) -> np.ndarray:
        # origin offset -L/2 turns into the phase (-1)^m on the momentum labels
        grids = np.meshgrid(*([self.full_ints] * self.dim), indexing="ij")
        return (-1.0) ** (sum(grids) % 2)

    def to_momentum(self, values: np.ndarray) -> np.ndarray:
        """Orthonormal plane-wave coefficients on the full centered lattice.

        Acts on the trailing ``s`` axes.
        """
        axes = tuple(range(-self.dim, 0))
        c = np.fft.fftshift(np.fft.fftn(values, axes=axes), axes=axes)
        return c * self._sign() * np.sqrt(self.weight / self.points**self.dim)

    def from_momentum(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        c = coeffs * self._sign() / np.sqrt(self.weight / self.points**self.dim)
        return np.fft.ifftn(np.fft.ifftshift(c, axes=axes), axes=axes)

    def transform_mean(self, values: np.ndarray) -> np.ndarray:
        """Site average of ``values * exp(-i k x)`` on the full lattice.

        This is the discrete continuum transform up to ``(2 pi)^{s/2} / L^s``
        and is periodic in the momentum label with period ``points``.
        """
        return self.to_momentum(values) / np.sqrt(self.weight * self.points**self.dim)

    def restrict(self, coeffs: np.ndarray) -> np.ndarray:
        """Drop the Nyquist labels; flatten the remaining modes."""
        sl = (Ellipsis,) + (slice(1, None),) * self.dim
        c = coeffs[sl]
        return c.reshape(c.shape[: c.ndim - self.dim] + (-1,))

    def extend(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`restrict`, with zero Nyquist coefficients."""
        lead = coeffs.shape[:-1]
        out = np.zeros(lead + self.shape, dtype=complex)
        sl = (Ellipsis,) + (slice(1, None),) * self.dim
        out[sl] = coeffs.reshape(lead + (self.points - 1,) * self.dim)
        return out

    def to_dict(self) -> dict:
        return {"box_length": self.box_length, "points_per_dim": self.points, "dimension": self.dim}


@dataclass(frozen=True)
class GridFunction:
    """Complex samples of a scalar function on the position lattice."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected samples of shape {self.grid.shape}, got {self.values.shape}")

    @classmethod
    def from_callable(cls, grid: SpatialGrid, fn) -> "GridFunction":
        return cls(grid, np.asarray(fn(*grid.coords), dtype=complex))

    @classmethod
    def from_momentum(cls, grid: SpatialGrid, coeffs: np.ndarray) -> "GridFunction":
        return cls(grid, grid.from_momentum(coeffs))

    def momentum(self) -> np.ndarray:
        return self.grid.to_momentum(self.values)

    def integral(self) -> complex:
        return complex(self.values.sum() * self.grid.weight)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.weight * np.sum(np.abs(self.values) ** 2)))

    def derivative(self, axis: int) -> "GridFunction":
        """Spectral derivative; the Nyquist coefficient is discarded."""
        c = self.momentum() * 1j * self.grid.full_momenta[axis]
        nyquist = [slice(None)] * self.grid.dim
        nyquist[axis] = 0
        c[tuple(nyquist)] = 0
        return GridFunction.from_momentum(self.grid, c)


def gaussian(grid: SpatialGrid, width: float, amplitude: float = 1.0, center=None) -> GridFunction:
    center = np.zeros(grid.dim) if center is None else np.broadcast_to(np.asarray(center, float), (grid.dim,))
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
    return GridFunction(grid, amplitude * np.exp(-r2 / (2 * width**2)).astype(complex))


@dataclass(frozen=True)
class GridSpinor:
    """Spinor-valued samples, shape ``(N, *grid.shape)``."""

    grid: SpatialGrid
    values: np.ndarray

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_vector(cls, grid: SpatialGrid, vec: np.ndarray, N: int) -> "GridSpinor":
        c = np.asarray(vec).reshape(grid.n_modes, N).T
        return cls(grid, grid.from_momentum(grid.extend(c)))

    def to_vector(self) -> np.ndarray:
        c = self.grid.restrict(self.grid.to_momentum(self.values))
        return np.ascontiguousarray(c.T).ravel()

    def inner(self, other: "GridSpinor") -> complex:
        return complex(np.sum(np.conj(self.values) * other.values) * self.grid.weight)

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self).real))


@dataclass(frozen=True)
class OneParticleOperator:
    """Dense matrix in the orthonormal momentum-spinor basis."""

    matrix: np.ndarray
    label: str = ""
    basis: str = "momentum-spinor"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v):
        if isinstance(v, GridSpinor):
            return GridSpinor.from_vector(v.grid, self.matrix @ v.to_vector(), v.N)
        return self.matrix @ v

    def adjoint(self) -> "OneParticleOperator":
        return OneParticleOperator(self.matrix.conj().T, f"{self.label}^*", self.basis)

    def __matmul__(self, other: "OneParticleOperator") -> "OneParticleOperator":
        return OneParticleOperator(self.matrix @ other.matrix, f"{self.label}{other.label}", self.basis)


def inner(v: np.ndarray, w: np.ndarray) -> complex:
    return complex(np.vdot(v, w))
