import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from junctionlab.errors import DegenerateSymmetry
from junctionlab.graphvertex import (condition_matrices, datta_projection, fit_symmetric_beta, lagrangian_rank,
                                     symmetric_directions, symmetric_gamma, symmetric_model_smatrix,
                                     vertex_bc_residual)

betas = st.floats(-20.0, 20.0, allow_nan=False)


def test_equal_weights_give_the_averaging_projection():
    np.testing.assert_allclose(datta_projection(1.0).P, np.full((3, 3), 1.0 / 3.0), atol=1e-15)


@given(betas)
def test_datta_matrix_is_a_reflection(beta):
    S = datta_projection(beta).S
    np.testing.assert_allclose(S @ S, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(S)), [-1.0, 1.0, 1.0], atol=1e-14)


def test_weight_vector_for_other_vertex_degrees():
    v = datta_projection(0.0, M=4, weights=np.array([1.0, 1.0, 1.0, 1.0]))
    np.testing.assert_allclose(v.P, np.full((4, 4), 0.25), atol=1e-15)
    with pytest.raises(ValueError):
        datta_projection(0.0, M=4)


def test_symmetric_beta_fit():
    assert fit_symmetric_beta(-2.0) == 1.0
    with pytest.raises(DegenerateSymmetry):
        fit_symmetric_beta(0.0)


@given(st.floats(-10, 10).filter(lambda g: abs(g) > 1e-3))
def test_fitted_weight_is_orthogonal_to_resonance_directions(gamma):
    e_a, e_s, e_perp = symmetric_directions(gamma)
    beta = fit_symmetric_beta(gamma)
    assert 2.0 + beta * gamma == pytest.approx(0.0, abs=1e-12)
    assert abs(e_perp @ e_a) < 1e-15 and abs(e_perp @ e_s) < 1e-12


def test_symmetric_junction_gamma_fits_exactly(sym_junction):
    gamma = symmetric_gamma(sym_junction)
    beta = fit_symmetric_beta(gamma)
    assert 2.0 + beta * gamma == 0.0


def test_symmetric_model_at_level(sym_junction):
    gamma = symmetric_gamma(sym_junction)
    e_a, e_s, e_perp = symmetric_directions(gamma)
    S = symmetric_model_smatrix(9.8, 0.4, 0.7, 9.8, 2.0, gamma).S
    P_Q = np.outer(e_a, e_a) + np.outer(e_s, e_s)
    np.testing.assert_allclose(S, (np.eye(3) - P_Q) - P_Q, atol=1e-15)
    far = symmetric_model_smatrix(9.8 + 1e7, 0.4, 0.7, 9.8, 2.0, gamma).S
    np.testing.assert_allclose(far, np.eye(3), atol=1e-6)


@given(betas)
def test_exact_datta_matrix_satisfies_its_conditions(beta):
    v = datta_projection(beta)
    assert vertex_bc_residual(v.S, v.weight, kind="resonance") < 1e-12
    assert vertex_bc_residual(-v.S, v.weight, kind="complement") < 1e-12


def test_residual_grows_linearly_with_perturbation():
    v = datta_projection(0.4)
    P = v.P
    res = []
    for eps in (1e-2, 1e-3, 1e-4):
        S = (np.eye(3) - P) + (-1.0 + eps) * P
        res.append(vertex_bc_residual(S, v.weight, kind="resonance"))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    np.testing.assert_allclose(ratios, 10.0, rtol=1e-3)


def test_random_unitary_violates_conditions():
    S = unitary_group.rvs(3, random_state=4)
    assert vertex_bc_residual(S, np.array([1.0, 0.3, 1.0])) > 1e-2


@given(betas)
def test_conditions_define_a_lagrangian_plane(beta):
    v = datta_projection(beta)
    for kind in ("resonance", "complement"):
        A, B = condition_matrices(v.weight, kind)
        assert lagrangian_rank(A, B) == 3
        # A B^* is Hermitian for self-adjoint vertex conditions
        np.testing.assert_allclose(A @ B.T, (A @ B.T).T, atol=1e-15)
    A, B = v.conditions()
    assert lagrangian_rank(A, B) == 3


def test_printed_conditions_give_the_opposite_matrix():
    v = datta_projection(0.4)
    A, B = v.conditions()
    p = 1.3
    # A (I + S) + ip B (I - S) = 0 solves for S
    S = -np.linalg.solve(A - 1j * p * B, A + 1j * p * B)
    np.testing.assert_allclose(S, -v.S, atol=1e-14)
