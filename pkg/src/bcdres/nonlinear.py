"""Nonlinear eigenvalue tools for ``A(z) x = 0``: singular-value scans and Newton."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergedOutsideWindow, NoConvergence

__all__ = ["sigma_min", "smallest_singular_pair", "local_minima", "NewtonResult", "bordered_newton"]


def sigma_min(A: np.ndarray) -> float:
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def smallest_singular_pair(A: np.ndarray) -> tuple[float, np.ndarray, float]:
    """Smallest singular value, its right singular vector and the next singular value."""
    _, s, vh = np.linalg.svd(A)
    second = float(s[-2]) if len(s) > 1 else np.inf
    return float(s[-1]), vh[-1].conj(), second


def local_minima(values: np.ndarray, z: np.ndarray, interior: bool = True) -> list[complex]:
    """Grid nodes strictly below their 8 neighbours, sorted by value.

    ``values`` is a 2-d real array (nan for masked nodes) aligned with ``z``.
    """
    v = np.where(np.isfinite(values), values, np.inf)
    n_im, n_re = v.shape
    found = []
    lo = 1 if interior else 0
    for i in range(lo, n_im - lo):
        for j in range(lo, n_re - lo):
            c = v[i, j]
            if not np.isfinite(c):
                continue
            nb = v[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            if np.sum(nb <= c) == 1:
                found.append((c, z[i, j]))
    found.sort(key=lambda t: t[0])
    return [complex(zz) for _, zz in found]


@dataclass
class NewtonResult:
    z: complex
    x: np.ndarray
    residual: float
    iterations: int
    steps: list[float] = field(default_factory=list)


def bordered_newton(matrix_and_derivative: Callable[[complex], tuple[np.ndarray, np.ndarray]],
                    z_init: complex, x_init: np.ndarray | None = None,
                    maxiter: int = 50, tol_residual: float = 1e-10, tol_step: float = 1e-12,
                    trust_radius: float = 0.5) -> NewtonResult:
    """Newton's method on ``F(x, z) = (A(z) x, c^H x - 1)``.

    ``c`` is the starting vector (the right singular vector of the smallest
    singular value of ``A(z_init)`` unless given) and stays fixed. The
    Jacobian is ``[[A(z), A'(z) x], [c^H, 0]]``. Converged when
    ``||A x|| <= tol_residual ||x||`` and ``|dz| <= tol_step``.
    """
    z = complex(z_init)
    A, dA = matrix_and_derivative(z)
    if x_init is None:
        _, x, _ = smallest_singular_pair(A)
    else:
        x = np.asarray(x_init, dtype=complex)
    c = x / np.vdot(x, x).real
    x = x / np.vdot(c, x)
    n = len(x)
    steps: list[float] = []
    for it in range(1, maxiter + 1):
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = A
        J[:n, n] = dA @ x
        J[n, :n] = c.conj()
        rhs = -np.concatenate([A @ x, [np.vdot(c, x) - 1.0]])
        delta = np.linalg.solve(J, rhs)
        x = x + delta[:n]
        dz = delta[n]
        z = z + dz
        steps.append(abs(dz))
        if abs(z - z_init) > trust_radius:
            raise DivergedOutsideWindow(f"Newton moved from {z_init} to {z}, beyond {trust_radius}")
        A, dA = matrix_and_derivative(z)
        residual = float(np.linalg.norm(A @ x) / np.linalg.norm(x))
        if residual <= tol_residual and abs(dz) <= tol_step:
            return NewtonResult(z, x, residual, it, steps)
    raise NoConvergence(f"Newton did not converge in {maxiter} iterations (last |dz|={steps[-1]:.3g})")
