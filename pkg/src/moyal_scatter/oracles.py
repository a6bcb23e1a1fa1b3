"""Reference evaluations that share no code with the lattice machinery."""

from __future__ import annotations

import numpy as np


def moyal_integral(c, g, x, theta: float, *, half_width: float = 9.0, h: float = 0.03) -> complex:
    """Moyal product of two functions on the plane by direct quadrature.

    Evaluates ``(2 pi)^{-2} \\iint c(x - M u) g(x + v) exp(-i u.v) du dv`` with
    ``M = (theta/2) [[0, 1], [-1, 0]]``. After ``w = M u`` this reads
    ``(pi theta)^{-2} \\iint c(x - w) g(x + v) exp(+i w.M^{-1} v) dw dv``,
    which the trapezoid rule integrates on a square of side ``2 * half_width``
    centered at the origin in ``w`` and ``v``. The 4-dimensional sum is
    contracted with two matrix products. ``c`` and ``g`` are vectorised
    callables of ``(x1, x2)``.
    """
    s = np.arange(-half_width, half_width + h / 2, h)
    U1, U2 = np.meshgrid(s, s, indexing="ij")
    C = c(x[0] - U1, x[1] - U2)  # indexed [w1, w2]
    G = g(x[0] + U1, x[1] + U2)  # indexed [v1, v2]
    # +w.M^{-1} v with M^{-1} = (2/theta) [[0, -1], [1, 0]]
    k = 2.0 / theta
    E2 = np.exp(-1j * k * np.outer(s, s))  # [w1, v2] factor exp(-i k w1 v2)
    E1 = np.exp(1j * k * np.outer(s, s))  # [w2, v1] factor exp(+i k w2 v1)
    X = E1 @ (G @ E2.T)  # [w2, w1]
    total = np.sum(C * X.T) * h**4
    return complex(total / (np.pi * theta) ** 2)


def bump_fourier(omega, center: float, half_width: float, amplitude: float, power: int = 1, n: int = 8001) -> np.ndarray:
    """``\\int a(t)^power exp(i omega t) dt`` for the smooth bump.

    Trapezoid rule on the support; the integrand vanishes to all orders at
    both ends, so convergence is faster than any power of the step.
    """
    x = np.linspace(-1.0, 1.0, n)[1:-1]
    a = (amplitude * np.exp(1.0 - 1.0 / (1.0 - x**2))) ** power
    t = center + half_width * x
    dx = 2.0 / (n - 1)
    omega = np.asarray(omega, dtype=float)
    return half_width * dx * (np.exp(1j * np.multiply.outer(omega, t)) @ a)
