import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from junctionlab.errors import EmptyModelError, PoleError
from junctionlab.extension import extension_eigenvalues
from junctionlab.vertexmodel import (assemble_model, bc_plugback_residual, build_phi_map, energy_dependent_bc,
                                     essential_smatrix, fit_vertex_model, gram_factorize, model_from_dict,
                                     model_smatrix, verify_fit)

from conftest import WINDOW

THRESHOLDS = np.array([4.0, 4.0, 4.0])


@pytest.fixture(scope="module")
def fitted(asym):
    return fit_vertex_model(asym.idn, asym.eigen)


def _one_pole(lam0=4.9, v=(0.4, -0.3, 0.2)):
    k_M = np.diag([1.0, 2.0, 1.5])
    return assemble_model(np.array([lam0]), np.array(v)[:, None], THRESHOLDS, k_M, 5.0)


def test_single_pole_phi_column():
    v = np.array([[0.3], [-1.2], [0.5]])
    np.testing.assert_allclose(build_phi_map(np.array([4.9]), v), v / math.sqrt(1 + 4.9**2), rtol=1e-15)


def test_rank_one_map_gives_one_dimensional_subspace():
    v = np.array([1.0, 2.0, -1.0])
    phi = np.outer(v, [0.5, -0.2, 0.7])
    g = gram_factorize(phi)
    assert g.d == 1
    direction = g.beta01[:, 0] / np.linalg.norm(g.beta01)
    assert abs(abs(direction @ v) / np.linalg.norm(v) - 1.0) < 1e-14


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 10_000))
def test_gram_factor_reconstructs(n, N, seed):
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(n, N)) + 1j * rng.normal(size=(n, N))
    g = gram_factorize(phi)
    assert np.linalg.norm(phi - g.beta01 @ g.P_Ni, 2) < 1e-12 * max(1.0, np.linalg.norm(phi, 2))
    np.testing.assert_allclose(g.P_Ni @ g.P_Ni.conj().T, np.eye(g.d), atol=1e-12)
    assert g.d == min(n, N)


def test_zero_map_is_rejected():
    with pytest.raises(EmptyModelError):
        gram_factorize(np.zeros((3, 2)))


def test_example_four_map_has_rank_two(fitted):
    assert (fitted.n_open, fitted.N, fitted.d) == (3, 2, 2)
    assert fitted.gram_residual < 1e-12


def test_fitting_identity(fitted):
    assert fitted.report["fitting_identity_residual"] < 1e-10
    # beta00 + beta01 P A P beta10 reproduces the frozen regular part
    F = fitted.setup.F
    PAP = F.conj().T @ fitted.setup.inner.A @ F
    np.testing.assert_allclose(fitted.beta00 + fitted.beta01 @ PAP @ fitted.beta01.conj().T, fitted.k_M, atol=1e-12)


def test_fitted_model_is_certified(fitted):
    report = verify_fit(fitted, WINDOW.window)
    assert report["certified"] and report["smatrix_defect"] < 1e-8


def test_perturbed_eigenvalue_raises_defect_linearly(fitted):
    defects = []
    for eps in (1e-3, 1e-4):
        shifted = assemble_model(fitted.lam_values + np.array([eps, 0.0]), fitted.currents,
                                 fitted.open_thresholds, fitted.k_M, fitted.Lambda)
        defects.append(verify_fit(shifted, WINDOW.window, reference=fitted)["smatrix_defect"])
    assert defects[0] > 1e-4
    assert defects[0] / defects[1] == pytest.approx(10.0, rel=0.1)


def test_empty_interval_model_is_the_essential_matrix(asym):
    from junctionlab.dnmap import split_dn
    from junctionlab.intermediate import IntermediateDN

    idn = IntermediateDN(split_dn(asym.eigendata, (5.5, 7.5), 40.0))
    model = fit_vertex_model(idn)
    assert model.N == 0
    report = verify_fit(model, (5.6, 7.4), n_grid=41)
    assert report["smatrix_defect"] == 0.0


def test_constant_boundary_operator_without_coupling():
    k_M = np.array([[1.0, 0.2, 0.0], [0.2, 2.0, 0.1], [0.0, 0.1, 1.5]])
    model = assemble_model(np.zeros(0), np.zeros((3, 0)), THRESHOLDS, k_M, 5.0)
    assert not model.beta01.size
    for lam in (4.3, 5.5):
        ik = 1j * np.diag(np.sqrt(lam - THRESHOLDS))
        expected = (ik - k_M) @ np.linalg.inv(ik + k_M)
        np.testing.assert_allclose(model_smatrix(model, lam).S, expected, atol=1e-14)


@pytest.mark.parametrize("lam", [4.3, 4.88, 5.2])
def test_single_pole_model_matches_closed_form(lam):
    model = _one_pole()
    ik = 1j * np.diag(np.sqrt(lam - THRESHOLDS))
    a2 = model.lam_values[0]
    F = model.setup.F
    bq = model.beta01 @ F.conj().T[:, :1]
    pole = (1 + a2**2) / (a2 - lam) * (bq @ bq.conj().T)
    expected = np.linalg.solve(ik + model.k_M - pole, ik - model.k_M + pole)
    np.testing.assert_allclose(model_smatrix(model, lam).S, expected, atol=1e-13)


def test_model_is_unitary_on_the_band(fitted):
    for lam in np.linspace(4.05, 15.9, 120):
        if np.min(np.abs(fitted.lam_values - lam)) < 1e-9:
            continue
        assert model_smatrix(fitted, lam).unitarity_defect() < 1e-8


def test_krein_function_equals_polar_sum(fitted):
    for lam in np.linspace(4.3, 5.7, 57):
        np.testing.assert_allclose(fitted.krein_function(lam), fitted.essential_dn(lam), atol=1e-10)
        np.testing.assert_allclose(fitted.boundary_operator(lam), fitted.essential_dn(lam), atol=1e-10)


def test_model_is_analytic_off_poles(fitted):
    h = 1e-5
    for x in (4.5, 5.1, 5.6):
        for y in (0.05, 0.3):
            z = complex(x, y)
            f = lambda w: np.linalg.solve(1j * fitted.k_plus(w) + fitted.boundary_operator(w),
                                          1j * fitted.k_plus(w) - fitted.boundary_operator(w))
            dx = (f(z + h) - f(z - h)) / (2 * h)
            dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
            assert np.abs(dy - 1j * dx).max() < 1e-6


def test_bound_state_is_an_extension_eigenvalue(fitted):
    def det(lam):
        X = -np.diag(np.sqrt(fitted.open_thresholds - lam)) + fitted.boundary_operator(lam)
        return np.linalg.det(X).real

    grid = np.linspace(-30.0, 3.999, 4000)
    vals = np.array([det(x) for x in grid])
    crossings = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    assert len(crossings) >= 1
    for j in crossings:
        lam0 = brentq(det, grid[j], grid[j + 1], xtol=1e-14)
        # the open leads act on the inner space as the Hermitian parameter -beta10 X^-1 beta01
        X = -np.diag(np.sqrt(fitted.open_thresholds - lam0)) + fitted.beta00
        M_param = -fitted.beta01.conj().T @ np.linalg.solve(X, fitted.beta01)
        got = extension_eigenvalues(fitted.setup, M_param, window=(-30.0, 30.0), n_grid=20001)
        assert np.min(np.abs(np.array(got) - lam0)) < 1e-9


def test_model_wave_satisfies_energy_dependent_condition(fitted):
    for lam in (4.4, 4.93, 5.5):
        assert bc_plugback_residual(fitted, lam) < 1e-10


def test_without_poles_the_condition_is_neumann():
    model = assemble_model(np.zeros(0), np.zeros((3, 0)), THRESHOLDS, np.zeros((3, 3)), 5.0)
    assert not np.any(energy_dependent_bc(model, 4.7))
    np.testing.assert_allclose(model_smatrix(model, 4.7).S, np.eye(3), atol=1e-15)


def test_single_pole_condition_near_the_pole_is_dirichlet_on_the_current():
    model = _one_pole()
    v = model.currents[:, 0]
    B = energy_dependent_bc(model, 4.9 + 1e-9)
    # B U = U' stays bounded only for U orthogonal to the current direction
    assert abs(v @ B @ v) / (v @ v) > 1e7
    perp = np.cross(v, [1.0, 0.0, 0.0])
    assert np.abs(B @ perp).max() < 10.0
    with pytest.raises(PoleError):
        energy_dependent_bc(model, 4.9)


def test_model_round_trips_through_json(fitted):
    again = model_from_dict(json.loads(json.dumps(fitted.to_dict())))
    for lam in (4.5, 5.2):
        np.testing.assert_allclose(model_smatrix(again, lam).S, model_smatrix(fitted, lam).S, atol=1e-13)
    assert again.d == fitted.d


def test_essential_matrix_matches_model(fitted):
    lam = 5.05
    np.testing.assert_allclose(essential_smatrix(fitted, lam).S, model_smatrix(fitted, lam).S, atol=1e-10)
