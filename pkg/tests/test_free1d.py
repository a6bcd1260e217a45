import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcdres import BranchPoint
from bcdres.free1d import (Grid1D, assemble_free_A, assemble_free_dA, complex_scaled_spectrum,
                           double_well, free_scan, helmholtz_kernel, nearest_eigenvalue,
                           principal_sqrt, refine_free, resonant_pair_free)
from bcdres.greens import ComplexEnergyGrid
from bcdres.nonlinear import local_minima

P1, P2 = 0.68 - 0.13j, 1.45 - 1.21j


@pytest.fixture(scope="module")
def p1_L20():
    grid = Grid1D(20, 0.05)
    return grid, refine_free(grid, P1)


def test_grid():
    g = Grid1D(10, 0.05)
    assert g.n == 201 and np.isclose(g.x[0], -5) and np.isclose(g.x[-1], 5)
    assert np.isclose(g.weights.sum(), 10)
    with pytest.raises(ValueError):
        Grid1D(10, 0.03)
    with pytest.raises(ValueError):
        Grid1D(10, -0.05)


def test_kernel_values():
    assert abs(helmholtz_kernel(1.0, 0.3, 0.3) + 0.5j) < 1e-15
    k = helmholtz_kernel(-1.0, 0.0, 2.0)
    assert abs(k.imag) < 1e-15 and np.isclose(k, -np.exp(-2) / 2)
    r = np.array([1.0, 5.0, 10.0])
    assert np.all(np.diff(np.abs(helmholtz_kernel(1 - 0.2j, 0.0, r))) > 0)
    with pytest.raises(BranchPoint):
        helmholtz_kernel(0.0, 0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
       st.floats(-3, 3), st.floats(-3, 3))
def test_kernel_branch_and_symmetry(re, im, x, xp):
    z = complex(re, im)
    s = principal_sqrt(z)
    assert abs(s * s - z) < 1e-12 * max(1, abs(z))
    assert s.real >= 0
    # the principal branch follows Im z; below the axis the kernel grows
    assert np.sign(s.imag) == np.sign(im)
    assert helmholtz_kernel(z, x, xp) == helmholtz_kernel(z, xp, x)
    assert abs(principal_sqrt(-abs(re) - 1 + 0j).imag) > 0


def test_kernel_solves_helmholtz():
    """-K'' - z K = 0 away from the diagonal."""
    z, h = 0.9 - 0.3j, 1e-3
    x = np.array([0.7, 1.5, 3.0])
    K = lambda y: helmholtz_kernel(z, y, 0.0)
    lap = (K(x + h) - 2 * K(x) + K(x - h)) / h ** 2
    assert np.allclose(-lap - z * K(x), 0, atol=1e-5)


def test_zero_potential_gives_identity():
    g = Grid1D(4, 0.1)
    A = assemble_free_A(g, lambda x: np.zeros_like(x), 1.3 - 0.4j)
    assert np.array_equal(A, np.eye(g.n))


def test_derivative_matches_difference_quotient():
    g = Grid1D(6, 0.1)
    z, d = 0.8 - 0.2j, 1e-6
    fd = (assemble_free_A(g, z=z + d) - assemble_free_A(g, z=z - d)) / (2 * d)
    assert np.allclose(assemble_free_dA(g, z=z), fd, atol=1e-7)


def test_upper_half_plane_nonsingular():
    g = Grid1D(10, 0.1)
    for z in (0.5 + 0.2j, 1.5 + 0.5j, -1 + 0.1j, 2 + 1j):
        s = np.linalg.svd(assemble_free_A(g, z=z), compute_uv=False)
        assert s[-1] > 0.05


def test_resonances_stable_in_box_length(p1_L20):
    _, r20 = p1_L20
    r30 = refine_free(Grid1D(30, 0.05), r20.z)
    assert abs(r20.z - r30.z) < 1e-8
    assert abs(r20.z - P1) < 0.01
    p2 = refine_free(Grid1D(20, 0.05), P2).z
    assert abs(p2 - P2) < 0.01


def test_simple_singular_value(p1_L20):
    grid, res = p1_L20
    s = np.linalg.svd(assemble_free_A(grid, z=res.z), compute_uv=False)
    assert s[-1] < 1e-10 and s[-2] > 1e-2


def test_scaled_free_spectrum_lies_on_ray():
    theta = np.pi / 5
    eigs = complex_scaled_spectrum(Grid1D(10, 0.05), lambda x: np.zeros_like(x), theta)
    assert np.allclose(np.angle(eigs), -2 * theta, atol=1e-10)
    with pytest.raises(ValueError):
        complex_scaled_spectrum(Grid1D(10, 0.05), theta=1.0)


def test_complex_scaling_agrees(p1_L20):
    grid, res = p1_L20
    eigs = complex_scaled_spectrum(grid, theta=np.pi / 5)
    assert abs(nearest_eigenvalue(eigs, res.z) - res.z) < 2e-3
    # the resonance is isolated from the rotated continuum
    assert abs(np.angle(res.z) + 2 * np.pi / 5) > 0.5


def test_resonant_pair(p1_L20):
    grid, res = p1_L20
    phi, psi = resonant_pair_free(grid, res.z, phi=res.x)
    x = grid.x
    assert np.isclose(np.abs(phi).max(), 1) and np.isclose(phi[np.argmax(np.abs(phi))], 1)
    # source localized on the potential, state growing towards the box edges
    assert np.all(np.abs(phi[np.abs(x) > 9]) < 1e-6)
    assert abs(psi[0]) > abs(psi[len(x) // 4]) and abs(psi[-1]) > abs(psi[3 * len(x) // 4])
    # phi = V psi up to the discretization of the null vector
    assert np.max(np.abs(double_well(x) * psi - phi)) < 1e-8


def test_scan_minimum_near_p1_is_box_independent():
    eg = ComplexEnergyGrid((0.05, 2.5), (-1.5, 0.05), 26, 17)
    found = {}
    for L in (10, 14):
        cmap = free_scan(Grid1D(L, 0.1), eg)
        found[L] = [refine_free(Grid1D(L, 0.1), z).z for z in local_minima(cmap.values, cmap.z)[:2]]
    p1 = [min(found[L], key=lambda z: abs(z - P1)) for L in found]
    assert abs(p1[0] - p1[1]) < 1e-3
