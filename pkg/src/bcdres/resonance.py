"""Defect resonances from the source equation ``phi = V R0(z) phi``.

The perturbation ``V`` lives on a finite set of degrees of freedom (the
support): lattice orbitals ``(R, i)`` plus optional extra sites (adatoms)
that are decoupled from the crystal in the unperturbed operator. On the
support the problem becomes the nonlinear eigenproblem

    A(z) x = 0,    A(z) = 1 - V G(z)

with ``G`` the support-restricted resolvent of the extended unperturbed
system, whose lattice part is supplied by a :class:`GreenEvaluator`.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DegenerateResonance, PatternMismatch
from .greens import ComplexEnergyGrid, ComplexMap, GreenEvaluator, map_columns
from .lattice import TightBindingModel
from .nonlinear import bordered_newton, smallest_singular_pair

__all__ = [
    "ExtraSite",
    "DefectOperator",
    "ResonanceResult",
    "defect_resolvent_block",
    "assemble_A",
    "svd_scan",
    "refine_resonance",
    "normalize_residue",
    "residue_condition",
    "support_resolvent",
    "fermi_golden_rule",
    "resonant_state_samples",
]

SIMPLICITY_TOL = 1e-6


@dataclass(frozen=True)
class ExtraSite:
    """A site outside the lattice with energy ``energy`` and couplings
    ``(R, i) -> amplitude`` to lattice orbitals."""

    energy: float
    couplings: Mapping[tuple[tuple[int, ...], int], complex]

    def __post_init__(self):
        if not np.isfinite(self.energy):
            raise ValueError("extra-site energy must be finite")
        if not self.couplings:
            raise ValueError("an extra site needs at least one coupling")


def _key(R) -> tuple[int, ...]:
    return tuple(int(r) for r in np.atleast_1d(R))


class DefectOperator:
    """Finite-rank perturbation on the lattice plus extra sites.

    Parameters
    ----------
    lattice_entries : mapping
        ``(R, i, R', j) -> value``: the matrix element of ``V`` between
        orbital ``i`` of cell ``R`` and orbital ``j`` of cell ``R'``.
    extra_sites : sequence of ExtraSite
    """

    def __init__(self, lattice_entries: Mapping = None, extra_sites: Iterable[ExtraSite] = ()):
        entries = {}
        for (R, i, Rp, j), v in (lattice_entries or {}).items():
            k = (_key(R), int(i), _key(Rp), int(j))
            entries[k] = entries.get(k, 0) + complex(v)
        self.lattice_entries = entries
        self.extra_sites = tuple(ExtraSite(float(s.energy),
                                           {(_key(R), int(i)): complex(v) for (R, i), v in s.couplings.items()})
                                 for s in extra_sites)
        dofs = set()
        for R, i, Rp, j in entries:
            dofs.add((R, i))
            dofs.add((Rp, j))
        for s in self.extra_sites:
            dofs.update(s.couplings)
        self.lattice_dofs: tuple[tuple[tuple[int, ...], int], ...] = tuple(sorted(dofs))
        dims = {len(R) for R, _ in self.lattice_dofs}
        if len(dims) > 1:
            raise ValueError("mixed lattice dimensions in defect")
        index = {dof: n for n, dof in enumerate(self.lattice_dofs)}
        n_lat = len(self.lattice_dofs)
        n = n_lat + len(self.extra_sites)
        V = np.zeros((n, n), dtype=complex)
        for (R, i, Rp, j), v in entries.items():
            V[index[(R, i)], index[(Rp, j)]] += v
        for e, s in enumerate(self.extra_sites):
            for dof, c in s.couplings.items():
                V[index[dof], n_lat + e] += c
                V[n_lat + e, index[dof]] += np.conj(c)
        if not np.allclose(V, V.conj().T, atol=1e-13, rtol=0):
            raise ValueError("defect potential is not Hermitian")
        self.V = V
        self.V.setflags(write=False)
        self._index = index

    @property
    def n_support(self) -> int:
        return self.V.shape[0]

    @property
    def n_lattice(self) -> int:
        return len(self.lattice_dofs)

    @property
    def support(self) -> list:
        return list(self.lattice_dofs) + [("extra", e) for e in range(len(self.extra_sites))]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.V.imag == 0))

    def check_against(self, model: TightBindingModel) -> None:
        for R, i in self.lattice_dofs:
            if len(R) != model.d or not 0 <= i < model.M:
                raise ValueError(f"defect orbital {(R, i)} does not exist in {model.name}")

    def cells(self) -> list[tuple[int, ...]]:
        return sorted({R for R, _ in self.lattice_dofs})


@dataclass(frozen=True, eq=False)
class ResonanceResult:
    """A refined zero ``z0`` of ``A(z)`` and its source vector ``phi``."""

    z0: complex
    phi: np.ndarray
    sigma_min: float
    newton_iters: int
    residual: float
    steps: tuple[float, ...] = ()
    residue_scale: complex | None = None
    psi: np.ndarray | None = None
    psi_samples: dict | None = None


def _lattice_blocks(ev: GreenEvaluator, dofs, z: complex, order: int):
    n = len(dofs)
    Rs = np.array([R for R, _ in dofs], dtype=int).reshape(n, ev.model.d)
    orb = np.array([i for _, i in dofs])
    diffs = Rs[:, None, :] - Rs[None, :, :]
    uniq, inverse = np.unique(diffs.reshape(-1, ev.model.d), axis=0, return_inverse=True)
    inverse = inverse.reshape(n, n)
    out = ev.blocks(z, uniq, order=order)
    oi, oj = np.meshgrid(orb, orb, indexing="ij")
    if order == 0:
        return out[inverse, oi, oj]
    return out[0][inverse, oi, oj], out[1][inverse, oi, oj]


def _support_blocks(ev: GreenEvaluator, defect: DefectOperator, z: complex, order: int):
    defect.check_against(ev.model)
    n_lat = defect.n_lattice
    n = defect.n_support
    G = np.zeros((n, n), dtype=complex)
    dG = np.zeros((n, n), dtype=complex)
    if n_lat:
        if order == 0:
            G[:n_lat, :n_lat] = _lattice_blocks(ev, defect.lattice_dofs, z, 0)
        else:
            G[:n_lat, :n_lat], dG[:n_lat, :n_lat] = _lattice_blocks(ev, defect.lattice_dofs, z, 1)
    for e, s in enumerate(defect.extra_sites):
        G[n_lat + e, n_lat + e] = 1.0 / (z - s.energy)
        dG[n_lat + e, n_lat + e] = -1.0 / (z - s.energy) ** 2
    return G if order == 0 else (G, dG)


def defect_resolvent_block(ev: GreenEvaluator, defect: DefectOperator, z: complex) -> np.ndarray:
    """Resolvent of the extended unperturbed system restricted to the support.

    Lattice-lattice entries are Green function blocks; each extra site adds a
    decoupled diagonal entry ``1/(z - E_d)``.
    """
    return _support_blocks(ev, defect, z, 0)


def assemble_A(ev: GreenEvaluator, defect: DefectOperator, z: complex) -> np.ndarray:
    """``1 - V G(z)`` on the support."""
    return np.eye(defect.n_support) - defect.V @ defect_resolvent_block(ev, defect, z)


def _A_and_derivative(ev, defect, z):
    G, dG = _support_blocks(ev, defect, z, 1)
    return np.eye(defect.n_support) - defect.V @ G, -defect.V @ dG


def svd_scan(ev: GreenEvaluator, defect: DefectOperator, grid: ComplexEnergyGrid,
             mode: str = "fixed", workers: int = 1) -> ComplexMap:
    """``log10`` of the smallest singular value of ``A(z)`` on a grid.

    Nodes where the quadrature is singular are ``nan``. ``mode="adaptive"``
    re-targets the deformation at ``Re z`` for each column.
    """
    if mode == "fixed":
        pick = lambda E: ev
    elif mode == "adaptive":
        pick = lambda E: ev.at_energy(E, warn=False)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    def value(e, z):
        s = np.linalg.svd(assemble_A(e, defect, z), compute_uv=False)[-1]
        return np.log10(s) if s > 0 else -np.inf

    cmap = map_columns(grid, pick, value, workers)
    return ComplexMap(cmap.grid, cmap.z, cmap.values.real)


def refine_resonance(ev: GreenEvaluator, defect: DefectOperator, z_init: complex,
                     trust_radius: float = 0.5, maxiter: int = 50,
                     tol_residual: float = 1e-10, tol_step: float = 1e-12) -> ResonanceResult:
    """Newton refinement of a zero of ``A(z)`` from ``z_init``.

    The derivative ``A'(z) = -V G'(z)`` comes from the same quadrature.
    Raises :class:`NoConvergence` or :class:`DivergedOutsideWindow`.
    """
    res = bordered_newton(lambda z: _A_and_derivative(ev, defect, z), z_init,
                          maxiter=maxiter, tol_residual=tol_residual, tol_step=tol_step,
                          trust_radius=trust_radius)
    A = assemble_A(ev, defect, res.z)
    s = np.linalg.svd(A, compute_uv=False)
    return ResonanceResult(z0=res.z, phi=res.x / np.linalg.norm(res.x), sigma_min=float(s[-1]),
                           newton_iters=res.iterations, residual=res.residual, steps=tuple(res.steps))


def residue_condition(ev: GreenEvaluator, defect: DefectOperator, phi: np.ndarray, z0: complex) -> complex:
    """Bilinear form ``psi^T V G'(z0) phi`` with ``psi = G(z0) phi``."""
    G, dG = _support_blocks(ev, defect, z0, 1)
    psi = G @ phi
    return complex(psi @ (defect.V @ (dG @ phi)))


def normalize_residue(ev: GreenEvaluator, defect: DefectOperator,
                      result: ResonanceResult) -> ResonanceResult:
    """Scale ``phi`` so that ``psi^T V G'(z0) phi = -1``.

    Near ``z0`` the support-restricted resolvent of the perturbed system is
    then ``psi psi^T / (z - z0)`` (real models). The remaining sign is fixed
    by making the largest entry of ``phi`` have a non-negative real part.
    """
    z0 = result.z0
    A = assemble_A(ev, defect, z0)
    s = np.linalg.svd(A, compute_uv=False)
    if len(s) > 1 and s[-2] <= SIMPLICITY_TOL:
        raise DegenerateResonance(f"second singular value {s[-2]:.3g} at z0={z0}")
    G, dG = _support_blocks(ev, defect, z0, 1)
    phi = result.phi
    psi = G @ phi
    cond = complex(psi @ (defect.V @ (dG @ phi)))
    scale = np.sqrt(-1.0 / cond)
    phi = scale * phi
    big = np.argmax(np.abs(phi))
    if phi[big].real < 0:
        scale = -scale
        phi = -phi
    return dataclasses.replace(result, phi=phi, psi=G @ phi, residue_scale=complex(scale))


def support_resolvent(ev: GreenEvaluator, defect: DefectOperator, z: complex) -> np.ndarray:
    """Perturbed resolvent on the support, ``G (1 - V G)^-1``."""
    G = defect_resolvent_block(ev, defect, z)
    return G @ np.linalg.inv(np.eye(defect.n_support) - defect.V @ G)


def fermi_golden_rule(ev: GreenEvaluator, defect: DefectOperator) -> complex:
    """Second-order estimate ``E_d + c^H G(E_d + i0) c`` of an adatom resonance.

    ``c`` are the couplings of the single extra site; for one coupling
    ``eps`` to orbital ``i`` of cell 0 the imaginary part is
    ``eps^2 Im R0(0,0;E_d)_ii``. If the evaluator carries deformation
    parameters the deformation is re-targeted at ``E_d``.
    """
    if len(defect.extra_sites) != 1 or defect.lattice_entries:
        raise PatternMismatch("the golden-rule estimate needs exactly one extra site and no lattice entries")
    site = defect.extra_sites[0]
    if ev.field.params is not None and ev.field.params.E != site.energy:
        ev = ev.at_energy(site.energy)
    n_lat = defect.n_lattice
    if n_lat == 0:
        return complex(site.energy)
    G = _lattice_blocks(ev, defect.lattice_dofs, complex(site.energy), 0)
    c = defect.V[:n_lat, n_lat]
    return complex(site.energy + c.conj() @ G @ c)


def resonant_state_samples(ev: GreenEvaluator, defect: DefectOperator, result: ResonanceResult,
                           window: Iterable) -> dict:
    """Resonant state ``psi = R0(z0) phi`` on the cells of ``window``.

    Returns ``{(R, i): amplitude}`` for every orbital of every cell in the
    window, plus ``{("extra", e): amplitude}`` for extra sites.
    """
    model = ev.model
    d, M = model.d, model.M
    z0 = result.z0
    phi = result.phi
    n_lat = defect.n_lattice
    X = ev.resolvents(z0)
    kappa = ev.field.kappa
    w = ev.field.jacobians / len(kappa)
    source = np.zeros((len(kappa), M), dtype=complex)
    for s, (R, i) in enumerate(defect.lattice_dofs):
        source[:, i] += np.exp(-2j * np.pi * (kappa @ np.asarray(R, dtype=float))) * phi[s]
    Y = np.einsum("kij,kj->ki", X, source) * w[:, None]
    cells = [_key(R) for R in window]
    phases = np.exp(2j * np.pi * (np.asarray(cells, dtype=float).reshape(-1, d) @ kappa.T))
    values = phases @ Y
    out = {}
    for c, R in enumerate(cells):
        for i in range(M):
            out[(R, i)] = complex(values[c, i])
    for e, site in enumerate(defect.extra_sites):
        out[("extra", e)] = complex(phi[n_lat + e] / (z0 - site.energy))
    return out
