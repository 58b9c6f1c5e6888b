import math
import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from junctionlab.errors import ExtensionEigenvalue, OverlapError, PoleError
from junctionlab.extension import (InnerHamiltonian, boundary_coordinates, boundary_form, boundary_form_direct,
                                   direct_extension, extension_eigenvalues, krein_bracket, krein_resolvent,
                                   krein_resolvent_matrix, make_setup, resolvent_residue, weyl_function)


def _hermitian(rng, n, scale=1.0):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (x + x.conj().T) / 2


def _instance(rng):
    N = int(rng.integers(2, 9))
    d = int(rng.integers(1, min(3, N // 2) + 1))
    A = _hermitian(rng, N, 2.0)
    basis = rng.normal(size=(N, d)) + 1j * rng.normal(size=(N, d))
    return make_setup(A, basis), _hermitian(rng, d)


def _vec(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def _upper(rng):
    return complex(rng.uniform(-5, 5), rng.uniform(0.05, 3.0))


def test_random_instances_satisfy_resolvent_identities():
    rng = np.random.default_rng(17)
    start = time.perf_counter()
    for _ in range(100):
        setup, M = _instance(rng)
        lam, mu = _upper(rng), _upper(rng)
        f = _vec(rng, setup.inner.size)
        Rl, Rm = krein_resolvent_matrix(setup, M, lam), krein_resolvent_matrix(setup, M, mu)
        lhs = (Rl - Rm) @ f
        rhs = (lam - mu) * Rl @ (Rm @ f)
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(lhs).max())
        adj = krein_resolvent_matrix(setup, M, lam.conjugate())
        assert np.abs(adj - Rl.conj().T).max() <= 1e-10 * max(1.0, np.abs(Rl).max())
    assert time.perf_counter() - start < 30.0


def test_krein_resolvent_inverts_the_direct_extension():
    rng = np.random.default_rng(3)
    for _ in range(20):
        setup, M = _instance(rng)
        lam = _upper(rng)
        AM = direct_extension(setup, M)
        expected = np.linalg.inv(AM - lam * np.eye(setup.inner.size))
        np.testing.assert_allclose(krein_resolvent_matrix(setup, M, lam), expected, atol=1e-9)
        np.testing.assert_allclose(AM, AM.conj().T, atol=1e-9 * max(1.0, np.abs(AM).max()))


def test_resolvent_output_lies_on_the_lagrangian_plane():
    rng = np.random.default_rng(5)
    setup, M = _instance(rng)
    f = _vec(rng, setup.inner.size)
    lam = _upper(rng)
    xp, xm = boundary_coordinates(setup, M, lam, f)
    np.testing.assert_allclose(xp, M @ xm, atol=1e-14)
    u = krein_resolvent(setup, M, lam, f)
    # the element with these coordinates differs from u by a restricted-domain part
    leftover = u - setup.element(xp, xm)
    assert np.abs(setup.F.conj().T @ (setup.inner.A - 1j * np.eye(setup.inner.size)) @ leftover).max() < 1e-10


def test_weyl_function_has_negative_imaginary_part():
    rng = np.random.default_rng(11)
    setup, _ = _instance(rng)
    for _ in range(50):
        W = weyl_function(setup, _upper(rng))
        im = (W - W.conj().T) / 2j
        assert np.linalg.eigvalsh(im).max() < 0.0


def test_weyl_function_decreases_between_poles():
    rng = np.random.default_rng(12)
    setup, _ = _instance(rng)
    vals = setup.inner.values
    a, b = vals[0], vals[1]
    if b - a < 1e-3:
        pytest.skip("poles too close for a finite difference")
    prev = None
    for lam in np.linspace(a, b, 12)[1:-1]:
        W = weyl_function(setup, lam).real
        if prev is not None:
            assert np.linalg.eigvalsh(W - prev).max() <= 1e-12
        prev = W


@given(st.floats(-10, 10), st.floats(0.1, 5.0))
def test_weyl_forms_agree(x, y):
    setup = make_setup(np.diag([1.0, 2.0, 4.0, -1.0]), np.array([[1.0, 0.5], [1.0, -0.3], [0.2, 1.0], [0.7, 0.0]]))
    lam = complex(x, y)
    np.testing.assert_allclose(weyl_function(setup, lam, "product"), weyl_function(setup, lam, "split"), atol=1e-12)


def test_scalar_weyl_function():
    alpha2 = 1.7
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        setup = make_setup(np.array([[alpha2]]), np.array([1.0]), strict=False)
    lam = 0.4 + 0.2j
    assert weyl_function(setup, lam)[0, 0] == pytest.approx(-(1 + lam * alpha2) / (alpha2 - lam), rel=1e-14)
    with pytest.raises(PoleError):
        weyl_function(setup, alpha2)


def test_eigenvector_span_is_rejected():
    rng = np.random.default_rng(2)
    for _ in range(10):
        inner = InnerHamiltonian(_hermitian(rng, 6))
        k = rng.choice(6, size=int(rng.integers(1, 4)), replace=False)
        with pytest.raises(OverlapError):
            make_setup(inner, inner.vectors[:, k])


def test_two_level_setup_angle():
    setup = make_setup(np.diag([1.0, 2.0]), np.array([1.0, 1.0]) / math.sqrt(2))
    assert setup.d == 1
    # |<f, (A+i)(A-i)^-1 f>|^2 = 9/10 for this pair
    assert setup.min_angle_sine == pytest.approx(math.sqrt(0.1), rel=1e-12)


def test_large_deficiency_only_warns():
    rng = np.random.default_rng(8)
    with pytest.warns(UserWarning):
        make_setup(_hermitian(rng, 4), rng.normal(size=(4, 3)), strict=False)


def test_boundary_form_properties():
    rng = np.random.default_rng(9)
    setup, M = _instance(rng)
    d = setup.d
    xp, xm = _vec(rng, d), _vec(rng, d)
    val = boundary_form(setup, xp, xm, xp, xm)
    assert abs(val.real) < 1e-14 * max(1.0, abs(val))
    a, b = _vec(rng, d), _vec(rng, d)
    assert abs(boundary_form(setup, a, M @ a, b, M @ b)) < 1e-12
    assert abs(boundary_form(setup, M @ a, a, M @ b, b)) < 1e-12
    yp, ym = _vec(rng, d), _vec(rng, d)
    assert boundary_form(setup, xp, xm, yp, ym) == pytest.approx(
        boundary_form_direct(setup, xp, xm, yp, ym), abs=1e-12)
    assert abs(boundary_form(setup, a, np.zeros(d), np.zeros(d), a)) > 1e-3


def test_lagrangian_plane_stays_apart_from_restricted_domain():
    rng = np.random.default_rng(21)
    for _ in range(30):
        setup, M = _instance(rng)
        direct_extension(setup, M)  # raises OverlapError if the pieces fail to span


def test_eigenvalues_match_direct_extension():
    rng = np.random.default_rng(4)
    for _ in range(10):
        setup, M = _instance(rng)
        expected = np.linalg.eigvalsh(direct_extension(setup, M))
        got = extension_eigenvalues(setup, M, n_grid=8001)
        np.testing.assert_allclose(got, expected, atol=1e-8)
        with pytest.raises(ExtensionEigenvalue):
            krein_resolvent_matrix(setup, M, got[0])


def test_small_parameter_recovers_inner_spectrum():
    rng = np.random.default_rng(6)
    setup, M = _instance(rng)
    gaps = []
    for eps in (1e-2, 1e-4):
        got = extension_eigenvalues(setup, eps * M, n_grid=8001)
        gaps.append(np.abs(np.array(got) - setup.inner.values).max())
    # eigenvalues move linearly in the parameter
    assert gaps[0] / gaps[1] == pytest.approx(100.0, rel=0.1)
    assert not np.any(krein_bracket(setup, 0 * M, 1j) - np.eye(setup.d))


def test_residues_are_projections():
    rng = np.random.default_rng(7)
    setup, M = _instance(rng)
    for pole in extension_eigenvalues(setup, M):
        P = resolvent_residue(setup, M, pole)
        assert np.abs(P @ P - P).max() < 1e-8
