import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcdres import (DegenerateBands, TightBindingModel, band_eigens, band_gradient, bloch_matrices,
                    load_model, make_chain, make_diatomic, make_flatband, make_graphene,
                    monkhorst_pack, save_model)
from bcdres.lattice import bloch_derivatives, model_from_dict, model_to_dict, sorted_band_path


def diatomic_closed_form(k, Ea=1.0, Eb=0.0):
    mid = (Ea + Eb) / 2
    r = np.sqrt(((Ea - Eb) / 2) ** 2 + np.abs(1 + np.exp(2j * np.pi * k)) ** 2)
    return np.stack([mid - r, mid + r], axis=-1)


def test_diatomic_bands_match_closed_form():
    m = make_diatomic()
    k = np.linspace(-0.5, 0.5, 1000)
    energies = np.array([band_eigens(m, [kk]).energies for kk in k])
    assert np.max(np.abs(energies - diatomic_closed_form(k))) < 1e-12


def test_graphene_special_points():
    g = make_graphene()
    assert np.allclose(band_eigens(g, [0, 0]).energies, [-3, 3], atol=1e-12)
    assert np.allclose(band_eigens(g, [0.5, 0]).energies, [-1, 1], atol=1e-12)
    dirac = band_eigens(g, [1 / 3, -1 / 3])
    assert np.allclose(dirac.energies, 0, atol=1e-12)
    assert dirac.degenerate


def test_degenerate_gradient_warns():
    with pytest.warns(DegenerateBands):
        band_gradient(make_graphene(), [1 / 3, -1 / 3], 0)


def test_non_hermitian_hoppings_rejected():
    with pytest.raises(ValueError, match="Hermitian"):
        TightBindingModel({(0,): [[0.0]], (1,): [[1.0]], (-1,): [[2.0]]})
    with pytest.raises(ValueError):
        TightBindingModel({(0,): [[0.0]], (1,): [[1.0]]})


def test_flatband_is_constant():
    m = make_flatband(0.7)
    k = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 1))
    assert np.allclose(bloch_matrices(m, k), 0.7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_bloch_matrix_periodic_and_analytic(k1, k2, h1, h2):
    g = make_graphene()
    kappa = np.array([k1 + 1j * h1, k2 + 1j * h2])
    H = bloch_matrices(g, kappa)
    assert np.allclose(H, bloch_matrices(g, kappa + [1, 0]), atol=1e-12)
    assert np.allclose(H, bloch_matrices(g, kappa + [0, -1]), atol=1e-12)
    # complex derivative agrees with a difference quotient along an imaginary step
    dH = bloch_derivatives(g, kappa)
    step = 1e-6j
    fd = (bloch_matrices(g, kappa + [step, 0]) - bloch_matrices(g, kappa - [step, 0])) / (2 * step)
    assert np.allclose(dH[0], fd, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5))
def test_gradient_matches_finite_difference(k):
    m = make_diatomic(1.0, 0.0)
    grads = band_eigens(m, [k]).gradients
    d = 1e-6
    fd = (diatomic_closed_form(k + d) - diatomic_closed_form(k - d)) / (2 * d)
    assert np.allclose(grads[:, 0], fd, atol=1e-6)


def test_monkhorst_pack_grid():
    k = monkhorst_pack(9, 2)
    assert k.shape == (81, 2)
    assert np.all(np.abs(k) < 0.5)
    # symmetric under k -> -k and contains the Dirac point for N = 9
    assert np.allclose(np.sort(k, axis=0), np.sort(-k, axis=0))
    assert np.min(np.linalg.norm(k - [1 / 3, -1 / 3], axis=1)) < 1e-12


def test_chain_band():
    m = make_chain(0.5)
    assert np.isclose(band_eigens(m, [0.2]).energies[0], np.cos(2 * np.pi * 0.2))


def test_sorted_band_path_is_continuous():
    m = make_diatomic(0.0, 0.0)   # bands touch at k = 1/2
    k = np.linspace(0, 1, 401).reshape(-1, 1)
    e = sorted_band_path(m, k)
    assert np.max(np.abs(np.diff(e, axis=0))) < 0.05


def test_json_round_trip(tmp_path):
    hop = {(0,): np.array([[0.2, 1j], [-1j, 0.0]]), (1,): np.array([[0.0, 0.0], [0.3 + 0.1j, 0.0]])}
    hop[(-1,)] = hop[(1,)].conj().T
    m = TightBindingModel(hop, labels=("x", "y"), name="complex", positions=[[0.0], [0.25]])
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert back.name == "complex" and back.labels == ("x", "y")
    assert np.allclose(back.positions, m.positions)
    k = monkhorst_pack(7, 1)
    assert np.allclose(bloch_matrices(back, k), bloch_matrices(m, k))
    assert json.loads(path.read_text())["orbitals"] == 2
    assert model_to_dict(model_from_dict(model_to_dict(m))) == model_to_dict(m)


def test_model_file_validation():
    bad = model_to_dict(make_diatomic())
    bad["hoppings"][0]["T"] = [0, 0]
    with pytest.raises(ValueError):
        model_from_dict(bad)


def test_graphene_geometry():
    g = make_graphene()
    A = g.site_position((0, 0), 0)
    neighbours = [g.site_position(R, 1) for R in [(0, 0), (1, 0), (0, 1)]]
    assert np.allclose([np.linalg.norm(B - A) for B in neighbours], 1 / np.sqrt(3))
    # reciprocal vectors are dual to the lattice vectors
    assert np.allclose(g.lattice_vectors @ g.reciprocal_vectors().T, 2 * np.pi * np.eye(2))


def test_cartesian_speed_of_graphene_dirac_cone():
    g = make_graphene()
    k = np.array([1 / 3 + 1e-4, -1 / 3])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grad = band_eigens(g, k).gradients[1]
    # Fermi velocity of the honeycomb lattice with unit lattice constant: sqrt(3)/2 t
    assert np.isclose(np.linalg.norm(g.cartesian_gradient(grad)), np.sqrt(3) / 2, rtol=1e-3)
