"""One-dimensional free-Laplacian test bed.

Resonances of ``-d^2/dx^2 + V`` are found from the integral equation
``phi = V R0(z) phi`` with the outgoing kernel ``exp(i sqrt(z)|x-x'|)/(2i sqrt(z))``,
discretized by the trapezoid rule. Uniform complex scaling of the same
finite-difference grid provides an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BranchPoint
from .greens import ComplexEnergyGrid, ComplexMap, map_columns
from .nonlinear import bordered_newton

__all__ = [
    "Grid1D",
    "principal_sqrt",
    "helmholtz_kernel",
    "double_well",
    "POTENTIALS",
    "assemble_free_A",
    "free_scan",
    "refine_free",
    "complex_scaled_spectrum",
    "nearest_eigenvalue",
    "resonant_pair_free",
]


@dataclass(frozen=True)
class Grid1D:
    """Nodes ``x_j = -L/2 + j h`` for ``j = 0 .. L/h``."""

    L: float
    h: float

    def __post_init__(self):
        if not (self.h > 0 and self.L > 0):
            raise ValueError("L and h must be positive")
        n = self.L / self.h
        if abs(n - round(n)) > 1e-12 * max(1.0, n):
            raise ValueError(f"L/h = {n} is not an integer")

    @property
    def n(self) -> int:
        return int(round(self.L / self.h)) + 1

    @property
    def x(self) -> np.ndarray:
        return -self.L / 2 + self.h * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[[0, -1]] *= 0.5
        return w


def principal_sqrt(z) -> np.ndarray | complex:
    """Square root with ``arg`` in ``(-pi/2, pi/2]``; raises at ``z = 0``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise BranchPoint("the free kernel is singular at z = 0")
    s = np.sqrt(z)
    return complex(s) if s.ndim == 0 else s


def helmholtz_kernel(z: complex, x, xp):
    """Outgoing free kernel ``exp(i sqrt(z)|x - x'|) / (2i sqrt(z))``.

    For ``z`` below the positive real axis this is the continuation from
    above, which grows with ``|x - x'|``.
    """
    s = principal_sqrt(z)
    r = np.abs(np.asarray(x, dtype=float) - np.asarray(xp, dtype=float))
    out = np.exp(1j * s * r) / (2j * s)
    return complex(out) if out.ndim == 0 else out


def _kernel_and_derivative(z, r):
    s = principal_sqrt(z)
    K = np.exp(1j * s * r) / (2j * s)
    # dK/dz = dK/ds / (2s)
    dK = K * (1j * r - 1.0 / s) / (2 * s)
    return K, dK


def double_well(x):
    """``2 (exp(-x^2/4) - exp(-x^2))``; entire, so it can be evaluated at complex ``x``."""
    x = np.asarray(x)
    return 2.0 * (np.exp(-(x / 2) ** 2) - np.exp(-x ** 2))


POTENTIALS: dict[str, Callable] = {"double-well": double_well}


def _matrix_pair(grid: Grid1D, potential, z):
    x = grid.x
    r = np.abs(x[:, None] - x[None, :])
    K, dK = _kernel_and_derivative(complex(z), r)
    Vw = np.asarray(potential(x), dtype=float)[:, None] * grid.weights[None, :]
    return np.eye(grid.n) - Vw * K, -Vw * dK


def assemble_free_A(grid: Grid1D, potential=double_well, z: complex = 1.0) -> np.ndarray:
    """``A_jk = delta_jk - V(x_j) K(z; x_j, x_k) w_k`` with trapezoid weights ``w``."""
    return _matrix_pair(grid, potential, z)[0]


def assemble_free_dA(grid: Grid1D, potential=double_well, z: complex = 1.0) -> np.ndarray:
    return _matrix_pair(grid, potential, z)[1]


def free_scan(grid: Grid1D, egrid: ComplexEnergyGrid, potential=double_well,
              workers: int = 1) -> ComplexMap:
    """``log10 sigma_min(A(z))`` over a complex grid (nan at ``z = 0``)."""

    def value(_, z):
        if z == 0:
            return np.nan
        s = np.linalg.svd(assemble_free_A(grid, potential, z), compute_uv=False)
        return np.log10(s[-1])

    m = map_columns(egrid, lambda E: None, value, workers)
    return ComplexMap(m.grid, m.z, m.values.real)


def refine_free(grid: Grid1D, z_init: complex, potential=double_well,
                trust_radius: float = 0.3, maxiter: int = 50):
    """Bordered Newton on ``A(z) phi = 0``; returns a :class:`NewtonResult`."""
    return bordered_newton(lambda z: _matrix_pair(grid, potential, z), z_init,
                           maxiter=maxiter, trust_radius=trust_radius)


def complex_scaled_spectrum(grid: Grid1D, potential=double_well, theta: float = np.pi / 5) -> np.ndarray:
    """Eigenvalues of ``-exp(-2i theta) d^2/dx^2 + V(x exp(i theta))``.

    Three-point stencil on the interior nodes with Dirichlet ends. The
    continuum of the free part sits on the ray ``arg z = -2 theta``.
    """
    if not 0 < theta <= np.pi / 4 + 1e-15:
        raise ValueError("theta must lie in (0, pi/4]")
    x = grid.x[1:-1]
    n = len(x)
    c = np.exp(-2j * theta) / grid.h ** 2
    H = np.diag(2 * c + potential(x * np.exp(1j * theta)).astype(complex))
    off = np.full(n - 1, -c)
    H += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvals(H)


def nearest_eigenvalue(eigs: np.ndarray, z: complex) -> complex:
    return complex(eigs[np.argmin(np.abs(eigs - z))])


def resonant_pair_free(grid: Grid1D, z0: complex, potential=double_well, phi=None):
    """Source ``phi`` and state ``psi = R0(z0) phi`` on the grid nodes.

    Both are scaled so that ``max|phi| = 1`` with that entry real positive;
    the normalization only matters for plotting.
    """
    A = assemble_free_A(grid, potential, z0)
    if phi is None:
        _, _, vh = np.linalg.svd(A)
        phi = vh[-1].conj()
    phi = np.asarray(phi, dtype=complex)
    j = np.argmax(np.abs(phi))
    phi = phi * (abs(phi[j]) / phi[j]) / abs(phi[j])
    x = grid.x
    K = helmholtz_kernel(z0, x[:, None], x[None, :])
    psi = K @ (phi * grid.weights)
    return phi, psi
