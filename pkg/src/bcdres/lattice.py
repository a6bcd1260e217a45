"""Periodic tight-binding Hamiltonians and their Bloch transform.

Wavevectors are handled in reduced coordinates: a point ``kappa`` of the
Brillouin zone is a (possibly complex) vector in ``[-1/2, 1/2)^d`` and the
Bloch matrix is

    H(kappa) = sum_T exp(2 pi i kappa . T) H0(0, T)

with ``kappa . T`` the plain dot product of reduced coordinates and integer
translations. Gradients returned by this module are derivatives with respect
to the reduced coordinates (they carry the ``2 pi`` factor). Cartesian
quantities are only obtained through :meth:`TightBindingModel.reciprocal_vectors`.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DegenerateBands

__all__ = [
    "TightBindingModel",
    "BlochMatrix",
    "BandData",
    "bloch_matrix",
    "bloch_matrices",
    "bloch_derivatives",
    "band_eigens",
    "band_gradient",
    "bands_on_points",
    "monkhorst_pack",
    "sorted_band_path",
    "load_model",
    "save_model",
    "model_to_dict",
    "model_from_dict",
]

DEGENERACY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TightBindingModel:
    """Hopping representation ``T -> H0(0, T)`` of a periodic lattice operator.

    Parameters
    ----------
    hoppings : mapping
        Integer translation tuples of length ``d`` to ``M x M`` matrices.
        ``H0(0, -T)`` must equal ``H0(0, T)^dagger``.
    lattice_vectors : array_like, optional
        Rows are the Cartesian primitive vectors. Only used for Cartesian
        output and for the physical scaling of the deformation amplitude.
        Defaults to the unit hypercubic lattice.
    labels : sequence of str, optional
        Orbital names.
    positions : array_like, optional
        ``M x d`` Cartesian offsets of the orbitals inside the cell, used for
        plotting real-space amplitudes. Defaults to zeros.
    """

    hoppings: Mapping[tuple[int, ...], np.ndarray]
    lattice_vectors: np.ndarray | None = None
    labels: tuple[str, ...] | None = None
    name: str = "model"
    positions: np.ndarray | None = None
    # derived, filled in __post_init__
    translations: np.ndarray = field(init=False, repr=False, compare=False)
    matrices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.hoppings:
            raise ValueError("a model needs at least one hopping matrix")
        keys = [tuple(int(t) for t in T) for T in self.hoppings]
        dims = {len(T) for T in keys}
        if len(dims) != 1:
            raise ValueError("all translations must have the same dimension")
        mats = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in self.hoppings.values()]
        shapes = {m.shape for m in mats}
        if len(shapes) != 1 or mats[0].shape[0] != mats[0].shape[1]:
            raise ValueError("hopping matrices must all be square with the same size")
        hop = {}
        for T, m in zip(keys, mats):
            if T in hop:
                hop[T] = hop[T] + m
            else:
                hop[T] = m.copy()
        for T, m in hop.items():
            mT = tuple(-t for t in T)
            partner = hop.get(mT)
            if partner is None or not np.allclose(partner, m.conj().T, atol=1e-12, rtol=0):
                raise ValueError(f"hoppings are not Hermitian: H0(0,{mT}) != H0(0,{T})^dagger")
        d = dims.pop()
        order = sorted(hop)
        object.__setattr__(self, "hoppings", {T: hop[T] for T in order})
        object.__setattr__(self, "translations", np.array(order, dtype=float).reshape(len(order), d))
        object.__setattr__(self, "matrices", np.array([hop[T] for T in order]))
        if self.lattice_vectors is None:
            object.__setattr__(self, "lattice_vectors", np.eye(d))
        else:
            A = np.atleast_2d(np.asarray(self.lattice_vectors, dtype=float))
            if A.shape != (d, d):
                raise ValueError(f"lattice_vectors must have shape {(d, d)}")
            object.__setattr__(self, "lattice_vectors", A)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.M:
                raise ValueError("one label per orbital is required")
            object.__setattr__(self, "labels", labels)
        if self.positions is None:
            object.__setattr__(self, "positions", np.zeros((self.M, d)))
        else:
            P = np.asarray(self.positions, dtype=float).reshape(self.M, d)
            object.__setattr__(self, "positions", P)

    @property
    def d(self) -> int:
        return self.translations.shape[1]

    @property
    def M(self) -> int:
        return self.matrices.shape[1]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.matrices.imag == 0))

    def reciprocal_vectors(self) -> np.ndarray:
        """Rows ``b_j`` with ``a_i . b_j = 2 pi delta_ij``."""
        return 2 * np.pi * np.linalg.inv(self.lattice_vectors).T

    def deformation_metric(self) -> np.ndarray:
        """Matrix ``G`` mapping a reduced gradient to a reduced displacement.

        A Cartesian displacement ``-alpha grad_k eps`` reads
        ``-alpha G grad_kappa eps`` in reduced coordinates, with
        ``G = A A^T / (4 pi^2)`` and ``A`` the lattice vectors.
        """
        A = self.lattice_vectors
        return A @ A.T / (4 * np.pi**2)

    def cartesian_gradient(self, grad_reduced: np.ndarray) -> np.ndarray:
        """Convert reduced-coordinate gradients (last axis) to Cartesian ones."""
        return np.asarray(grad_reduced) @ self.lattice_vectors / (2 * np.pi)

    def site_position(self, R, i: int) -> np.ndarray:
        """Cartesian position of orbital ``i`` in cell ``R``."""
        return np.asarray(R, dtype=float) @ self.lattice_vectors + self.positions[i]

    def zone_diameter(self) -> float:
        """Cartesian diameter of the parallelotope spanned by the ``b_j``."""
        B = self.reciprocal_vectors()
        d = self.d
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        return float(np.max(np.linalg.norm(signs @ B, axis=1)))


@dataclass(frozen=True, eq=False)
class BlochMatrix:
    kappa: np.ndarray
    value: np.ndarray


@dataclass(frozen=True, eq=False)
class BandData:
    """Eigen-decomposition of a Hermitian Bloch matrix at a real wavevector."""

    k: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray  # columns are the u_nk
    gradients: np.ndarray  # (M, d), reduced coordinates
    degenerate: bool = False


def _as_kappa(model: TightBindingModel, kappa) -> np.ndarray:
    kappa = np.asarray(kappa)
    if kappa.ndim == 0:
        kappa = kappa.reshape(1)
    if kappa.shape[-1] != model.d:
        if model.d == 1:
            kappa = kappa[..., None]
        else:
            raise ValueError(f"wavevectors must have last dimension {model.d}")
    return kappa


def bloch_matrices(model: TightBindingModel, kappa) -> np.ndarray:
    """Bloch matrices for an array of wavevectors of shape ``(..., d)``.

    Returns an array of shape ``(..., M, M)``. ``kappa`` may be complex.
    """
    kappa = _as_kappa(model, kappa)
    phases = np.exp(2j * np.pi * (kappa @ model.translations.T))
    return np.tensordot(phases, model.matrices, axes=(-1, 0))


def bloch_derivatives(model: TightBindingModel, kappa) -> np.ndarray:
    """``dH/dkappa_j`` for all ``j``; shape ``(..., d, M, M)``."""
    kappa = _as_kappa(model, kappa)
    phases = np.exp(2j * np.pi * (kappa @ model.translations.T))  # (..., nT)
    factors = 2j * np.pi * model.translations  # (nT, d)
    weighted = phases[..., :, None] * factors  # (..., nT, d)
    return np.einsum("...td,tij->...dij", weighted, model.matrices)


def bloch_matrix(model: TightBindingModel, kappa) -> BlochMatrix:
    """Bloch matrix ``sum_T exp(2 pi i kappa.T) H0(0,T)`` at one wavevector."""
    kappa = _as_kappa(model, kappa)
    if kappa.ndim != 1:
        raise ValueError("bloch_matrix takes a single wavevector; use bloch_matrices")
    return BlochMatrix(kappa=kappa.astype(complex), value=bloch_matrices(model, kappa))


def bands_on_points(model: TightBindingModel, k) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Energies, eigenvectors and reduced gradients at many real wavevectors.

    Parameters
    ----------
    k : ndarray, shape (..., d)

    Returns
    -------
    energies : (..., M)
    vectors : (..., M, M), columns are eigenvectors
    gradients : (..., M, d)
    """
    k = _as_kappa(model, k)
    if np.iscomplexobj(k) and np.any(np.imag(k) != 0):
        raise ValueError("band structure requires real wavevectors")
    k = np.real(k)
    H = bloch_matrices(model, k)
    energies, vectors = np.linalg.eigh(H)
    dH = bloch_derivatives(model, k)
    # Hellmann-Feynman: d eps_n / dk_j = u_n^dagger dH_j u_n
    grads = np.einsum("...in,...dij,...jn->...nd", vectors.conj(), dH, vectors).real
    return energies, vectors, grads


def _min_gap(energies: np.ndarray) -> np.ndarray:
    if energies.shape[-1] < 2:
        return np.full(energies.shape[:-1], np.inf)
    return np.min(np.diff(energies, axis=-1), axis=-1)


def band_eigens(model: TightBindingModel, k, degeneracy_tol: float = DEGENERACY_TOL) -> BandData:
    """Sorted bands, Bloch vectors and band gradients at a real wavevector.

    The ``degenerate`` flag is set when two bands are closer than
    ``degeneracy_tol * ||H(k)||``; gradients are then only the
    Hellmann-Feynman values for whatever eigenbasis the solver returned.
    """
    k = _as_kappa(model, k)
    energies, vectors, grads = bands_on_points(model, k)
    scale = max(np.linalg.norm(bloch_matrices(model, k), 2), 1.0)
    degenerate = bool(_min_gap(energies) < degeneracy_tol * scale)
    return BandData(k=np.real(k).astype(float), energies=energies, vectors=vectors,
                    gradients=grads, degenerate=degenerate)


def band_gradient(model: TightBindingModel, k, n: int,
                  degeneracy_tol: float = DEGENERACY_TOL) -> np.ndarray:
    """Gradient of band ``n`` in reduced coordinates (Hellmann-Feynman)."""
    data = band_eigens(model, k, degeneracy_tol)
    e = data.energies
    gaps = []
    if n > 0:
        gaps.append(e[n] - e[n - 1])
    if n < len(e) - 1:
        gaps.append(e[n + 1] - e[n])
    scale = max(np.linalg.norm(bloch_matrices(model, data.k), 2), 1.0)
    if gaps and min(gaps) < degeneracy_tol * scale:
        warnings.warn(f"band {n} is degenerate at k={data.k}; gradient is not well defined",
                      DegenerateBands, stacklevel=2)
    return data.gradients[n]


def monkhorst_pack(N: int, d: int) -> np.ndarray:
    """Uniform ``N^d`` grid ``(2r - N - 1) / 2N`` in C order, shape ``(N**d, d)``."""
    if N < 1:
        raise ValueError("grid size must be positive")
    axis = (2 * np.arange(1, N + 1) - N - 1) / (2 * N)
    mesh = np.meshgrid(*[axis] * d, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sorted_band_path(model: TightBindingModel, path) -> np.ndarray:
    """Band energies along a path, reordered so bands stay continuous.

    Ordering at each step follows the largest eigenvector overlap with the
    previous point, which only matters where bands cross.
    """
    path = _as_kappa(model, np.asarray(path, dtype=float))
    energies, vectors, _ = bands_on_points(model, path)
    out = energies.copy()
    prev = vectors[0]
    for i in range(1, len(path)):
        overlap = np.abs(prev.conj().T @ vectors[i])
        perm = np.argmax(overlap, axis=1)
        if len(set(perm.tolist())) == len(perm):
            out[i] = energies[i][perm]
            prev = vectors[i][:, perm]
        else:
            prev = vectors[i]
    return out


def _encode_matrix(m: np.ndarray):
    m = np.asarray(m)
    if np.all(m.imag == 0):
        return m.real.tolist()
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _decode_matrix(rows) -> np.ndarray:
    def entry(x):
        if isinstance(x, (list, tuple)):
            return complex(x[0], x[1])
        return complex(x)
    return np.array([[entry(x) for x in row] for row in rows], dtype=complex)


def model_to_dict(model: TightBindingModel) -> dict:
    """Serializable form; complex entries are written as ``[re, im]`` pairs."""
    return {
        "name": model.name,
        "dimension": model.d,
        "orbitals": model.M,
        "lattice_vectors": model.lattice_vectors.tolist(),
        "labels": list(model.labels) if model.labels else None,
        "positions": model.positions.tolist(),
        "hoppings": [{"T": list(T), "matrix": _encode_matrix(m)} for T, m in model.hoppings.items()],
    }


def model_from_dict(data: dict) -> TightBindingModel:
    d = int(data["dimension"])
    M = int(data["orbitals"])
    hop = {}
    for item in data["hoppings"]:
        T = tuple(int(t) for t in item["T"])
        if len(T) != d:
            raise ValueError(f"translation {T} does not have dimension {d}")
        m = _decode_matrix(item["matrix"])
        if m.shape != (M, M):
            raise ValueError(f"hopping at {T} is not {M}x{M}")
        hop[T] = hop.get(T, 0) + m
    labels = data.get("labels")
    return TightBindingModel(hop, lattice_vectors=data.get("lattice_vectors"),
                             labels=tuple(labels) if labels else None,
                             name=data.get("name", "model"), positions=data.get("positions"))


def load_model(path: str | Path) -> TightBindingModel:
    """Read a model file (JSON, see README for the schema)."""
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: TightBindingModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
