"""Periodic Green function by (deformed) Brillouin-zone quadrature.

For lattice vectors ``R, R'`` the Green function block is approximated by

    R0(R, R'; z) = 1/N^d sum_k exp(2 pi i kappa.(R - R')) (z - H(kappa))^-1 det(1 + i h'(k))

with ``kappa = k + i h(k)`` on a Monkhorst-Pack grid. With ``h = 0`` this is
the plain quadrature, valid for ``Im z > 0``; a band-driven deformation
continues it below the real axis near the target energy of the field.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .deformation import DeformationField, DeformationParams, build_deformation
from .errors import SingularKPoint
from .lattice import TightBindingModel, bands_on_points, bloch_matrices, monkhorst_pack

__all__ = [
    "GreenEvaluator",
    "ComplexEnergyGrid",
    "ComplexMap",
    "green_block",
    "green_derivative",
    "green_blocks",
    "trace_green",
    "trace_map",
    "dos_smearing",
    "dos_bcd",
]

COND_LIMIT = 1e14


class GreenEvaluator:
    """A model bound to a deformation field on an ``N^d`` grid.

    The deformed Bloch matrices and quadrature weights are computed once at
    construction; the object is not mutated afterwards.
    """

    def __init__(self, model: TightBindingModel, field: DeformationField | None = None,
                 N: int | None = None):
        if field is None:
            if N is None:
                raise ValueError("give a deformation field or a grid size")
            field = DeformationField.trivial(model.d, N)
        if N is not None and N != field.N:
            raise ValueError(f"grid size {N} does not match the field grid {field.N}")
        if field.d != model.d:
            raise ValueError("model and field dimensions differ")
        self.model = model
        self.field = field
        self.N = field.N
        self._kappa = field.kappa
        self._H = bloch_matrices(model, self._kappa)
        self._weights = field.jacobians / len(self._kappa)
        self._H.setflags(write=False)
        self._weights.setflags(write=False)

    @classmethod
    def deformed(cls, model: TightBindingModel, params: DeformationParams, N: int,
                 warn: bool = True) -> "GreenEvaluator":
        return cls(model, build_deformation(model, params, N, warn=warn))

    @classmethod
    def undeformed(cls, model: TightBindingModel, N: int) -> "GreenEvaluator":
        return cls(model, DeformationField.trivial(model.d, N))

    def at_energy(self, E: float, warn: bool = True) -> "GreenEvaluator":
        """Same model, grid and (alpha, deltaE), deformation re-targeted at ``E``."""
        if self.field.params is None:
            raise ValueError("the evaluator has no deformation parameters to re-target")
        return GreenEvaluator.deformed(self.model, self.field.params.at_energy(E), self.N, warn)

    @property
    def M(self) -> int:
        return self.model.M

    def resolvents(self, z: complex) -> np.ndarray:
        """``(z - H(kappa))^-1`` at every node, shape ``(N**d, M, M)``."""
        A = z * np.eye(self.M) - self._H
        try:
            X = np.linalg.inv(A)
        except np.linalg.LinAlgError as exc:
            raise SingularKPoint(f"z={z} hits the deformed spectrum exactly") from exc
        cond = np.linalg.norm(A, axis=(1, 2)) * np.linalg.norm(X, axis=(1, 2))
        if not np.all(np.isfinite(cond)) or cond.max() > COND_LIMIT:
            raise SingularKPoint(f"z={z} sits on the deformed discrete spectrum "
                                 f"(condition estimate {cond.max():.3g})")
        return X

    def phases(self, dR: Sequence[Sequence[int]]) -> np.ndarray:
        """``exp(2 pi i kappa . dR) * weight`` for each displacement; shape ``(n_dR, N**d)``."""
        dR = np.asarray(dR, dtype=float).reshape(-1, self.model.d)
        return np.exp(2j * np.pi * (dR @ self._kappa.T)) * self._weights

    def blocks(self, z: complex, dR, order: int = 0) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
        """Blocks ``R0(R, R')`` for displacements ``dR = R - R'``.

        ``order=1`` also returns the z-derivative blocks.
        """
        X = self.resolvents(z)
        ph = self.phases(dR)
        G = np.tensordot(ph, X, axes=(1, 0))
        if order == 0:
            return G
        dG = -np.tensordot(ph, X @ X, axes=(1, 0))
        return G, dG

    def trace(self, z: complex) -> complex:
        X = self.resolvents(z)
        return complex(np.dot(self._weights, np.trace(X, axis1=1, axis2=2)))


def _disp(R, Rp, d):
    R = np.zeros(d) if R is None else np.atleast_1d(np.asarray(R, dtype=float))
    Rp = np.zeros(d) if Rp is None else np.atleast_1d(np.asarray(Rp, dtype=float))
    return (R - Rp).reshape(1, d)


def green_block(ev: GreenEvaluator, z: complex, R=None, Rp=None) -> np.ndarray:
    """``M x M`` block ``R0(R, R'; z)``."""
    return ev.blocks(z, _disp(R, Rp, ev.model.d))[0]


def green_derivative(ev: GreenEvaluator, z: complex, R=None, Rp=None) -> np.ndarray:
    """``d/dz R0(R, R'; z)``, integrand ``-(z - H)^-2``."""
    return ev.blocks(z, _disp(R, Rp, ev.model.d), order=1)[1][0]


def green_blocks(ev: GreenEvaluator, z: complex, dR, order: int = 0):
    return ev.blocks(z, dR, order)


def trace_green(ev: GreenEvaluator, z: complex) -> complex:
    """Trace per unit cell ``Tr R0(0, 0; z)``."""
    return ev.trace(z)


@dataclass(frozen=True)
class ComplexEnergyGrid:
    """Rectangular grid of complex energies, ``n_im`` rows by ``n_re`` columns."""

    re_range: tuple[float, float]
    im_range: tuple[float, float]
    n_re: int
    n_im: int

    def __post_init__(self):
        if self.n_re < 1 or self.n_im < 1:
            raise ValueError("grid counts must be at least 1")
        if not np.all(np.isfinite(list(self.re_range) + list(self.im_range))):
            raise ValueError("grid ranges must be finite")

    @property
    def re(self) -> np.ndarray:
        return np.linspace(*self.re_range, self.n_re)

    @property
    def im(self) -> np.ndarray:
        return np.linspace(*self.im_range, self.n_im)

    def points(self) -> np.ndarray:
        re, im = np.meshgrid(self.re, self.im)
        return re + 1j * im


@dataclass(frozen=True, eq=False)
class ComplexMap:
    """Values on a :class:`ComplexEnergyGrid`; masked nodes hold ``nan``."""

    grid: ComplexEnergyGrid
    z: np.ndarray
    values: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return ~np.isfinite(self.values)


def _column_values(evaluate, column: np.ndarray) -> np.ndarray:
    out = np.empty(len(column), dtype=complex)
    for i, z in enumerate(column):
        try:
            out[i] = evaluate(z)
        except SingularKPoint:
            out[i] = np.nan
    return out


def map_columns(grid: ComplexEnergyGrid, evaluator_for_column, value, workers: int = 1) -> ComplexMap:
    """Evaluate ``value(ev, z)`` column by column; shared by trace and scan maps."""
    Z = grid.points()

    def column(j):
        ev = evaluator_for_column(Z[0, j].real)
        return _column_values(lambda z: value(ev, z), Z[:, j])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cols = list(pool.map(column, range(grid.n_re)))
    else:
        cols = [column(j) for j in range(grid.n_re)]
    return ComplexMap(grid, Z, np.stack(cols, axis=1))


def trace_map(ev: GreenEvaluator, grid: ComplexEnergyGrid, mode: str = "fixed",
              workers: int = 1) -> ComplexMap:
    """``Tr R0(0, 0; z)`` on a grid of complex energies.

    ``mode="fixed"`` uses the evaluator's field everywhere; ``mode="adaptive"``
    re-targets the deformation at ``E = Re z`` for each column.
    """
    if mode == "fixed":
        pick = lambda E: ev
    elif mode == "adaptive":
        pick = lambda E: ev.at_energy(E, warn=False)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return map_columns(grid, pick, lambda e, z: e.trace(z), workers)


def dos_smearing(model: TightBindingModel, E, eta: float, N: int) -> np.ndarray | float:
    """Gaussian-smeared density of states per cell.

    ``1/N^d sum_k sum_n g((eps_nk - E)/eta)`` with
    ``g(x) = exp(-x^2) / (eta sqrt(pi))``, so that it integrates to ``M``.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    energies, _, _ = bands_on_points(model, monkhorst_pack(N, model.d))
    eps = energies.reshape(-1)
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    out = np.empty(len(E_arr))
    for i, e in enumerate(E_arr):
        out[i] = np.exp(-np.square((eps - e) / eta)).sum() / (eta * np.sqrt(np.pi) * len(energies))
    return float(out[0]) if np.ndim(E) == 0 else out


def dos_bcd(model: TightBindingModel, E, params: DeformationParams, N: int) -> np.ndarray | float:
    """Density of states ``-Im Tr R0(0,0;E) / pi`` with the deformation at ``E``."""
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    out = np.empty(len(E_arr))
    for i, e in enumerate(E_arr):
        ev = GreenEvaluator.deformed(model, params.at_energy(e), N)
        out[i] = -ev.trace(complex(e)).imag / np.pi
    return float(out[0]) if np.ndim(E) == 0 else out
