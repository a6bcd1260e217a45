"""Complex deformation of the Brillouin zone.

The integration variable of the Brillouin-zone integral is moved to
``kappa(k) = k + i h(k)`` with

    h(k) = -alpha * sum_n G grad eps_n(k) * chi((eps_n(k) - E) / deltaE)

where ``chi(x) = exp(-x**2)`` and ``G`` converts the reduced gradient into a
reduced displacement so that ``alpha`` has the Cartesian meaning of a
displacement ``-alpha grad_k eps`` (see :meth:`TightBindingModel.deformation_metric`).
The deformation is sampled on a Monkhorst-Pack grid; its Jacobian
``det(1 + i h'(k))`` is obtained by differentiating the periodic samples.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import DeformationTooStrong, VanHoveProximity
from .lattice import TightBindingModel, bands_on_points, monkhorst_pack

__all__ = [
    "DeformationParams",
    "DeformationField",
    "RuleCheck",
    "ValidationReport",
    "build_deformation",
    "field_from_function",
    "jacobian_det",
    "van_hove_energies",
    "validate_parameters",
]

GRADIENT_FLOOR = 1e-3
JACOBIAN_FLOOR = 1e-6
PASS_FACTOR = 5.0
WARN_FACTOR = 2.0


def gaussian_cutoff(x):
    return np.exp(-np.square(x))


CUTOFFS = {"gaussian": gaussian_cutoff}


@dataclass(frozen=True)
class DeformationParams:
    """Target energy ``E``, amplitude ``alpha`` and energy window ``deltaE``."""

    E: float
    alpha: float
    deltaE: float
    cutoff: str = "gaussian"

    def __post_init__(self):
        if not np.isfinite(self.E):
            raise ValueError("E must be finite")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.deltaE > 0:
            raise ValueError("deltaE must be positive")
        if self.cutoff not in CUTOFFS:
            raise ValueError(f"unknown cutoff {self.cutoff!r}; available: {sorted(CUTOFFS)}")

    def at_energy(self, E: float) -> "DeformationParams":
        return DeformationParams(float(E), self.alpha, self.deltaE, self.cutoff)


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Samples of ``h`` and of ``det(1 + i h')`` on an ``N^d`` grid.

    Arrays are flattened in C order over the grid: ``k`` and ``h`` have
    shape ``(N**d, d)`` and ``jacobians`` has shape ``(N**d,)``.
    """

    N: int
    d: int
    k: np.ndarray
    h: np.ndarray
    jacobians: np.ndarray
    params: DeformationParams | None = None

    @property
    def kappa(self) -> np.ndarray:
        return self.k + 1j * self.h

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.h)

    @classmethod
    def trivial(cls, d: int, N: int, params: DeformationParams | None = None) -> "DeformationField":
        """The undeformed zone: ``h = 0`` and unit Jacobian."""
        k = monkhorst_pack(N, d)
        return cls(N, d, k, np.zeros_like(k), np.ones(len(k), dtype=complex), params)


def jacobian_det(h: np.ndarray, N: int, method: str = "spectral") -> np.ndarray:
    """``det(1 + i h'(k))`` at every grid point from periodic samples of ``h``.

    Parameters
    ----------
    h : ndarray, shape (N**d, d)
        Samples in C order on the ``N^d`` grid.
    method : {"spectral", "fd"}
        ``"spectral"`` differentiates the trigonometric interpolant (exact for
        trigonometric polynomials of degree below ``N/2``); ``"fd"`` uses
        central differences with the grid spacing as step.
    """
    h = np.asarray(h, dtype=float)
    n, d = h.shape
    if n != N**d:
        raise ValueError("h does not match an N^d grid")
    cube = h.reshape((N,) * d + (d,))
    jac = np.empty((N,) * d + (d, d))
    if method == "spectral":
        freq = np.fft.fftfreq(N, d=1.0 / N)
        if N % 2 == 0:
            freq[N // 2] = 0.0
        for a in range(d):
            shape = [1] * d
            shape[a] = N
            mult = (2j * np.pi * freq).reshape(shape + [1])
            deriv = np.fft.ifft(mult * np.fft.fft(cube, axis=a), axis=a).real
            jac[..., :, a] = deriv
    elif method == "fd":
        for a in range(d):
            jac[..., :, a] = (np.roll(cube, -1, axis=a) - np.roll(cube, 1, axis=a)) * (N / 2.0)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")
    dets = np.linalg.det(np.eye(d) + 1j * jac)
    return dets.reshape(-1)


def _check_jacobian(jac: np.ndarray, warn: bool) -> None:
    if warn and np.min(np.abs(jac)) < JACOBIAN_FLOOR:
        warnings.warn("det(1 + i h') nearly vanishes; reduce alpha", DeformationTooStrong, stacklevel=3)


def field_from_function(func: Callable[[np.ndarray], np.ndarray], N: int, d: int,
                        method: str = "spectral",
                        params: DeformationParams | None = None) -> DeformationField:
    """Sample an arbitrary periodic displacement ``func(k) -> h`` on the grid."""
    k = monkhorst_pack(N, d)
    h = np.asarray(func(k), dtype=float).reshape(len(k), d)
    jac = jacobian_det(h, N, method)
    _check_jacobian(jac, True)
    return DeformationField(N, d, k, h, jac, params)


def build_deformation(model: TightBindingModel, params: DeformationParams, N: int,
                      method: str = "spectral", warn: bool = True,
                      gradient_floor: float = GRADIENT_FLOOR) -> DeformationField:
    """Sample the band-driven deformation targeted at ``params.E``.

    Warns with :class:`VanHoveProximity` when a grid point inside the energy
    window has a Cartesian band gradient below ``gradient_floor`` or when two
    bands inside the window nearly cross.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    k = monkhorst_pack(N, model.d)
    energies, _, grads = bands_on_points(model, k)
    x = (energies - params.E) / params.deltaE
    chi = CUTOFFS[params.cutoff](x)
    G = model.deformation_metric()
    push = np.einsum("pn,pnd->pd", chi, grads)
    h = -params.alpha * push @ G.T
    jac = jacobian_det(h, N, method)
    if warn:
        inside = np.abs(energies - params.E) < params.deltaE
        speed = np.linalg.norm(model.cartesian_gradient(grads), axis=-1)
        if np.any(inside & (speed < gradient_floor)):
            warnings.warn(f"van Hove point within deltaE of E={params.E}: the continuation "
                          "cannot be pushed below the real axis there", VanHoveProximity, stacklevel=2)
        elif energies.shape[1] > 1:
            gaps = np.diff(energies, axis=1)
            both = inside[:, 1:] & inside[:, :-1]
            if np.any(both & (gaps < gradient_floor)):
                warnings.warn(f"band crossing within deltaE of E={params.E}", VanHoveProximity,
                              stacklevel=2)
    _check_jacobian(jac, warn)
    return DeformationField(N, model.d, k, h, jac, params)


# -- parameter validation ----------------------------------------------------

@dataclass(frozen=True)
class RuleCheck:
    name: str
    description: str
    small_side: float
    large_side: float
    status: str
    note: str = ""

    @property
    def ratio(self) -> float:
        if self.small_side == 0:
            return np.inf if self.large_side > 0 else 0.0
        return self.large_side / self.small_side


@dataclass(frozen=True)
class ValidationReport:
    params: DeformationParams
    N: int
    Rmax: float
    rules: tuple[RuleCheck, ...]
    van_hove: tuple[float, ...]
    nearby_van_hove: tuple[float, ...]

    def __getitem__(self, name: str) -> RuleCheck:
        for rule in self.rules:
            if rule.name == name:
                return rule
        raise KeyError(name)

    @property
    def ok(self) -> bool:
        return all(r.status == "pass" for r in self.rules)

    def summary(self) -> str:
        lines = [f"E={self.params.E} alpha={self.params.alpha} deltaE={self.params.deltaE} "
                 f"N={self.N} Rmax={self.Rmax}"]
        for r in self.rules:
            lines.append(f"{r.status:5s} {r.name:22s} {r.small_side:.4g} << {r.large_side:.4g}"
                         f" (x{r.ratio:.3g}) {r.note}".rstrip())
        lines.append("van Hove energies: " + ", ".join(f"{e:.4f}" for e in self.van_hove))
        return "\n".join(lines)


def _status(small: float, large: float) -> str:
    if small == 0:
        return "pass" if large > 0 else "fail"
    ratio = large / small
    if ratio >= PASS_FACTOR:
        return "pass"
    if ratio >= WARN_FACTOR:
        return "warn"
    return "fail"


def _grid_cube(model: TightBindingModel, n: int):
    k = monkhorst_pack(n, model.d)
    energies, _, grads = bands_on_points(model, k)
    speed = np.linalg.norm(model.cartesian_gradient(grads), axis=-1)
    shape = (n,) * model.d
    return k, energies.reshape(shape + (-1,)), speed.reshape(shape + (-1,))


def _local_minima(cube: np.ndarray) -> np.ndarray:
    mask = np.ones(cube.shape, dtype=bool)
    for a in range(cube.ndim):
        mask &= cube <= np.roll(cube, 1, axis=a)
        mask &= cube <= np.roll(cube, -1, axis=a)
    return np.argwhere(mask)


def van_hove_energies(model: TightBindingModel, n_sample: int | None = None,
                      tol: float = 1e-6) -> list[float]:
    """Energies of band critical points and band crossings.

    Candidates are the local minima of ``|grad eps_n|`` and of the gaps
    between adjacent bands on a sampling grid; each candidate is polished by
    a Nelder-Mead search and kept if the minimum found is below ``tol``
    (relative to the bandwidth).
    """
    d, M = model.d, model.M
    if n_sample is None:
        n_sample = 256 if d == 1 else 64
    k, energies, speed = _grid_cube(model, n_sample)
    kcube = k.reshape((n_sample,) * d + (d,))
    width = max(float(energies.max() - energies.min()), 1.0)
    found: list[float] = []

    def polish(fun, start):
        res = minimize(fun, start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 2000})
        return res.x, res.fun

    for n in range(M):
        for idx in _local_minima(speed[..., n]):
            start = kcube[tuple(idx)]

            def grad_norm(x, n=n):
                _, _, g = bands_on_points(model, x)
                return float(np.linalg.norm(model.cartesian_gradient(g[n])))

            x, val = polish(grad_norm, start)
            if val < tol * width:
                e, _, _ = bands_on_points(model, x)
                found.append(float(e[n]))
    for n in range(M - 1):
        gap = energies[..., n + 1] - energies[..., n]
        for idx in _local_minima(gap):
            start = kcube[tuple(idx)]

            def gap_fun(x, n=n):
                e, _, _ = bands_on_points(model, x)
                return float(e[n + 1] - e[n])

            x, val = polish(gap_fun, start)
            if val < tol * width:
                e, _, _ = bands_on_points(model, x)
                found.append(float(0.5 * (e[n] + e[n + 1])))
    out: list[float] = []
    for e in sorted(found):
        if not out or abs(e - out[-1]) > 1e-4 * width:
            out.append(e)
    return out


def validate_parameters(model: TightBindingModel, params: DeformationParams, N: int,
                        Rmax: float, im_z: float = 0.02,
                        n_sample: int | None = None) -> ValidationReport:
    """Evaluate the rules of thumb relating ``alpha``, ``deltaE``, ``N``.

    ``a << b`` is read as ``b >= 5 a`` (pass), ``b >= 2 a`` (warn), else fail.
    Band speeds are Cartesian and are taken over the shell of sampling points
    with ``|eps_n - E| < deltaE / 4``. ``im_z`` is the depth below the real
    axis at which the continuation is wanted.
    """
    if n_sample is None:
        n_sample = max(N, 256) if model.d == 1 else max(N, 96)
    _, energies, speed = _grid_cube(model, n_sample)
    shell = np.abs(energies - params.E) < params.deltaE / 4
    diam = model.zone_diameter()
    vh = van_hove_energies(model)
    dist = min((abs(params.E - e) for e in vh), default=np.inf)
    nearby = tuple(e for e in vh if abs(params.E - e) < PASS_FACTOR * params.deltaE)
    a, dE = params.alpha, params.deltaE

    rules = [RuleCheck("smoothness", "deltaE << dist(E, van Hove)", dE, dist, _status(dE, dist))]
    if np.any(shell):
        vmin = float(np.min(speed[shell]))
        vmax = float(np.max(speed[shell]))
        rules.append(RuleCheck("first_order", "alpha |grad eps| << diam(B)", a * vmax, diam,
                               _status(a * vmax, diam)))
        rules.append(RuleCheck("spectrum_clearance", "|Im z| << alpha |grad eps|^2", abs(im_z),
                               a * vmin**2, _status(abs(im_z), a * vmin**2)))
        target = min(dE / vmax if vmax > 0 else np.inf, a * vmin)
        rules.append(RuleCheck("integration_accuracy",
                               "diam(B)/N << min(deltaE/|grad eps|, alpha |grad eps|)",
                               diam / N, target, _status(diam / N, target)))
    else:
        note = "no Fermi surface at E"
        rules.append(RuleCheck("first_order", "alpha |grad eps| << diam(B)", 0.0, diam, "pass", note))
        rules.append(RuleCheck("spectrum_clearance", "|Im z| << alpha |grad eps|^2", abs(im_z),
                               np.inf, "pass", note))
        rules.append(RuleCheck("integration_accuracy",
                               "diam(B)/N << min(deltaE/|grad eps|, alpha |grad eps|)",
                               diam / N, np.inf, "pass", note))
    rules.append(RuleCheck("lattice_range", "|R - R'| << N", float(Rmax), float(N),
                           _status(float(Rmax), float(N))))
    return ValidationReport(params, N, float(Rmax), tuple(rules), tuple(vh), nearby)
