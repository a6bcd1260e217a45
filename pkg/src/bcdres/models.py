"""Built-in systems: diatomic chain, graphene, single-band chain, flat band."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import TightBindingModel
from .resonance import DefectOperator, ExtraSite

__all__ = [
    "NamedSystem",
    "make_diatomic",
    "make_diatomic_defect",
    "make_graphene",
    "make_adatom_defect",
    "make_chain",
    "make_flatband",
    "GRAPHENE_LATTICE",
]

GRAPHENE_LATTICE = np.array([[np.sqrt(3) / 2, 0.5], [np.sqrt(3) / 2, -0.5]])


@dataclass(frozen=True, eq=False)
class NamedSystem:
    model: TightBindingModel
    defect: DefectOperator | None = None
    notes: str = ""

    def __post_init__(self):
        if self.defect is not None:
            self.defect.check_against(self.model)


def make_diatomic(Ea: float = 1.0, Eb: float = 0.0) -> TightBindingModel:
    """Alternating chain ``... a b a b ...`` with unit hoppings.

    The cell holds ``(a_R, b_R)``; ``b_R`` hops to ``a_{R+1}``. At reduced
    wavevector ``kappa`` the Bloch matrix is
    ``[[Ea, 1 + exp(-2 pi i kappa)], [1 + exp(2 pi i kappa), Eb]]``.
    """
    up = np.array([[0.0, 0.0], [1.0, 0.0]])
    return TightBindingModel(
        {(0,): np.array([[Ea, 1.0], [1.0, Eb]]), (1,): up, (-1,): up.T},
        labels=("a", "b"),
        positions=[[0.0], [0.5]],
        name=f"diatomic(Ea={Ea:g},Eb={Eb:g})",
    )


def make_diatomic_defect(eps: float, cells: tuple[int, int] = (-1, 1)) -> DefectOperator:
    """Set the intra-cell bonds of two cells to ``eps``.

    With the default cells the sites ``b_{-1}, a_0, b_0, a_1`` form a
    four-site block that is cut from the rest of the chain when ``eps = 0``.
    """
    eps = float(eps)
    entries = {}
    for c in cells:
        entries[((c,), 0, (c,), 1)] = eps - 1.0
        entries[((c,), 1, (c,), 0)] = eps - 1.0
    return DefectOperator(entries)


def make_graphene(t: float = 1.0) -> TightBindingModel:
    """Nearest-neighbour honeycomb model with sublattices ``(A, B)``.

    In reduced coordinates the off-diagonal Bloch entry is
    ``-t (1 + exp(2 pi i k1) + exp(2 pi i k2))``.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    ab = np.array([[0.0, -t], [0.0, 0.0]])
    onsite = ab + ab.T
    return TightBindingModel(
        {(0, 0): onsite, (1, 0): ab, (-1, 0): ab.T, (0, 1): ab, (0, -1): ab.T},
        lattice_vectors=GRAPHENE_LATTICE,
        labels=("A", "B"),
        positions=[[0.0, 0.0], [-1 / np.sqrt(3), 0.0]],
        name=f"graphene(t={t:g})",
    )


def make_adatom_defect(eps: float, Ed: float, attach: int = 0, cell=(0, 0)) -> DefectOperator:
    """Extra site of energy ``Ed`` bound by ``eps`` to orbital ``attach`` of ``cell``."""
    cell = tuple(int(c) for c in cell)
    return DefectOperator({}, (ExtraSite(float(Ed), {(cell, int(attach)): float(eps)}),))


def make_chain(t: float = 1.0) -> TightBindingModel:
    """One orbital per cell with nearest-neighbour hopping ``t``: ``2 t cos(2 pi k)``."""
    return TightBindingModel({(0,): [[0.0]], (1,): [[t]], (-1,): [[t]]}, name=f"chain1band(t={t:g})")


def make_flatband(D=0.0, d: int = 1) -> TightBindingModel:
    """Dispersionless model: only on-site hoppings ``D`` (scalar or matrix)."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return TightBindingModel({(0,) * d: D}, name="flatband")
