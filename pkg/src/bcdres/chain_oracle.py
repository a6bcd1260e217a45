"""Semi-infinite chain surface Green functions and Schur-complement resonances.

Independent of any Brillouin-zone quadrature: the leads of a 1-d
nearest-neighbour chain are eliminated through their surface Green
functions, which solve the quadratic self-consistency

    g = (z - H00 - H01 g H10)^-1            (right lead)

For ``Im z > 0`` the decaying solution is obtained by Sancho-Rubio
decimation. Below the real axis the solution is carried along a vertical
path from the upper half plane by Newton continuation, which selects the
analytic continuation through the band rather than the advanced branch.
"""
from __future__ import annotations

import numpy as np

from .errors import NoConvergence
from .lattice import TightBindingModel
from .nonlinear import bordered_newton
from .resonance import DefectOperator, ResonanceResult

__all__ = ["decimation_surface_green", "surface_green", "lead_self_energies",
           "effective_matrix", "chain_resonance"]


def decimation_surface_green(z: complex, h00: np.ndarray, h01: np.ndarray,
                             tol: float = 1e-12, maxiter: int = 200) -> np.ndarray:
    """Right-lead surface Green function by Sancho-Rubio decimation (``Im z > 0``)."""
    n = h00.shape[0]
    eye = np.eye(n)
    alpha = np.array(h01, dtype=complex)
    beta = alpha.conj().T.copy()
    eps = np.array(h00, dtype=complex)
    eps_s = eps.copy()
    for _ in range(maxiter):
        g = np.linalg.inv(z * eye - eps)
        agb = alpha @ g @ beta
        bga = beta @ g @ alpha
        eps_s = eps_s + agb
        eps = eps + agb + bga
        alpha = alpha @ g @ alpha
        beta = beta @ g @ beta
        if max(np.abs(alpha).max(), np.abs(beta).max()) < tol:
            return np.linalg.inv(z * eye - eps_s)
    raise NoConvergence("decimation did not converge")


def _newton_polish(g, z, h00, h01, tol=1e-13, maxiter=30):
    n = h00.shape[0]
    h10 = h01.conj().T
    eye = np.eye(n)
    for _ in range(maxiter):
        S = z * eye - h00 - h01 @ g @ h10
        F = g @ S - eye
        if np.abs(F).max() < tol:
            return g, True
        # row-major vec: vec(A X B) = (A kron B^T) vec(X)
        L = np.kron(eye, S.T) - np.kron(g @ h01, h10.T)
        dg = np.linalg.solve(L, -F.reshape(-1)).reshape(n, n)
        g = g + dg
        if not np.all(np.isfinite(g)):
            return g, False
    S = z * eye - h00 - h01 @ g @ h10
    return g, bool(np.abs(g @ S - eye).max() < 1e3 * tol)


def surface_green(z: complex, h00: np.ndarray, h01: np.ndarray, y_start: float = 1.0,
                  min_step: float = 1e-6) -> np.ndarray:
    """Right-lead surface Green function, analytically continued to any ``z``.

    The continuation path is the vertical segment from ``Re z + i max(y_start, Im z)``
    down to ``z``; step sizes adapt so that each Newton correction stays small.
    """
    h00 = np.asarray(h00, dtype=complex)
    h01 = np.asarray(h01, dtype=complex)
    z = complex(z)
    top = complex(z.real, max(y_start, z.imag))
    g = decimation_surface_green(top, h00, h01)
    if top == z:
        return g
    current = top.imag
    step = 0.05
    while current > z.imag:
        nxt = max(current - step, z.imag)
        trial, ok = _newton_polish(g.copy(), complex(z.real, nxt), h00, h01)
        jump = np.abs(trial - g).max() / max(np.abs(g).max(), 1e-300)
        if ok and jump < 0.2:
            g, current = trial, nxt
            step = min(step * 1.5, 0.1)
        else:
            step /= 2
            if step < min_step:
                raise NoConvergence(f"surface Green function continuation stalled at Im z={current}")
    return g


def lead_self_energies(model: TightBindingModel, z: complex):
    """``(Sigma_left, Sigma_right)`` acting on the first / last cell of a central region."""
    h00, h01 = _chain_blocks(model)
    h10 = h01.conj().T
    gR = surface_green(z, h00, h01)
    # the left lead is the right lead of the mirrored chain, whose coupling is h10
    gL = surface_green(z, h00, h10)
    return h10 @ gL @ h01, h01 @ gR @ h10


def _chain_blocks(model: TightBindingModel):
    if model.d != 1:
        raise ValueError("the chain oracle needs a one-dimensional model")
    allowed = {(-1,), (0,), (1,)}
    if not set(model.hoppings) <= allowed:
        raise ValueError("the chain oracle needs nearest-neighbour cells only")
    M = model.M
    zero = np.zeros((M, M), dtype=complex)
    return np.asarray(model.hoppings.get((0,), zero)), np.asarray(model.hoppings.get((1,), zero))


def effective_matrix(model: TightBindingModel, defect: DefectOperator, z: complex,
                     cells: tuple[int, int] | None = None):
    """``z - H_C - Sigma(z)`` on the central cells plus extra sites, and its z-derivative.

    The derivative is a centred finite difference of the lead self-energies.
    Returns ``(T, dT, order)`` where ``order`` lists the degrees of freedom.
    """
    h00, h01 = _chain_blocks(model)
    M = model.M
    if cells is None:
        cs = [R[0] for R in defect.cells()] or [0]
        cells = (min(cs), max(cs))
    c0, c1 = cells
    ncell = c1 - c0 + 1
    n_lat = ncell * M
    n_ext = len(defect.extra_sites)
    n = n_lat + n_ext
    H = np.zeros((n, n), dtype=complex)
    for c in range(ncell):
        H[c * M:(c + 1) * M, c * M:(c + 1) * M] = h00
        if c + 1 < ncell:
            H[c * M:(c + 1) * M, (c + 1) * M:(c + 2) * M] = h01
            H[(c + 1) * M:(c + 2) * M, c * M:(c + 1) * M] = h01.conj().T

    def pos(dof):
        (R,), i = dof
        if not c0 <= R <= c1:
            raise ValueError("defect reaches outside the central cells")
        return (R - c0) * M + i

    for (R, i, Rp, j), v in defect.lattice_entries.items():
        H[pos((R, i)), pos((Rp, j))] += v
    for e, site in enumerate(defect.extra_sites):
        H[n_lat + e, n_lat + e] = site.energy
        for dof, c in site.couplings.items():
            H[pos(dof), n_lat + e] += c
            H[n_lat + e, pos(dof)] += np.conj(c)

    def sigma(zz):
        S = np.zeros((n, n), dtype=complex)
        sl, sr = lead_self_energies(model, zz)
        S[:M, :M] += sl
        S[n_lat - M:n_lat, n_lat - M:n_lat] += sr
        return S

    step = 1e-5
    T = z * np.eye(n) - H - sigma(z)
    dS = (sigma(z + step) - sigma(z - step)) / (2 * step)
    order = [((c0 + c,), i) for c in range(ncell) for i in range(M)] + \
            [("extra", e) for e in range(n_ext)]
    return T, np.eye(n) - dS, order


def chain_resonance(model: TightBindingModel, defect: DefectOperator, z_init: complex,
                    trust_radius: float = 0.5) -> ResonanceResult:
    """Zero of ``det(z - H_C - Sigma_L(z) - Sigma_R(z))`` near ``z_init``."""
    res = bordered_newton(lambda z: effective_matrix(model, defect, z)[:2], z_init,
                          tol_residual=1e-11, tol_step=1e-11, trust_radius=trust_radius)
    T = effective_matrix(model, defect, res.z)[0]
    s = np.linalg.svd(T, compute_uv=False)
    return ResonanceResult(z0=res.z, phi=res.x, sigma_min=float(s[-1]), newton_iters=res.iterations,
                           residual=res.residual, steps=tuple(res.steps))
