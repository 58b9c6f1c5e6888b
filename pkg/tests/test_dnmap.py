import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from junctionlab.dnmap import (RationalDN, aggregate_M_raw, aggregate_N_raw, dn_blocks, frame_blocks, raw_M,
                               split_dn, thinness_report)
from junctionlab.errors import PoleError, SplitError
from junctionlab.geometry import build_junction, k_minus, thresholds
from junctionlab.presets import asymmetric_junction, symmetric_junction, synthetic_dn
from junctionlab.spectral import rectangle_eigendata

PI = math.pi


@pytest.fixture(scope="module")
def square_data():
    return rectangle_eigendata(asymmetric_junction(), 40.0, 8)


def test_example_split_has_double_pole_at_five(square_data):
    rdn = split_dn(square_data, (4.0, 6.0), 40.0)
    np.testing.assert_allclose(rdn.pole_values, [5.0, 5.0])
    for v in (8.0, 10.0, 13.0):
        assert np.any(np.isclose(rdn.tail_values, v))


def test_symmetric_split_around_ten():
    data = rectangle_eigendata(symmetric_junction(), 40.0, 4)
    rdn = split_dn(data, (9.0, 11.0), 40.0, regularize=False)
    np.testing.assert_allclose(rdn.pole_values, [10.0, 10.0])
    for v in (5.0, 8.0, 13.0):
        assert np.any(np.isclose(rdn.tail_values, v))


def test_interval_without_eigenvalues_has_no_polar_part(square_data):
    rdn = split_dn(square_data, (5.5, 7.5), 40.0, regularize=False)
    assert rdn.n_poles == 0
    assert not np.any(rdn.dn_delta(6.0))
    np.testing.assert_allclose(rdn.dn(6.0), rdn.k_delta(6.0))


def test_eigenvalue_on_the_edge_is_rejected(square_data):
    with pytest.raises(SplitError):
        split_dn(square_data, (5.0, 6.0), 40.0)


def test_blocks_match_projection_of_full_matrix():
    rdn = synthetic_dn()
    full = rdn.dn(4.9)
    blocks = dn_blocks(rdn, 4.9)
    op, cl = rdn.open_index(), rdn.closed_index()
    for got, rows, cols in ((blocks.pp, op, op), (blocks.pm, op, cl), (blocks.mp, cl, op), (blocks.mm, cl, cl)):
        np.testing.assert_allclose(got, full[np.ix_(rows, cols)], atol=1e-14)


def test_pole_hit_names_the_pole():
    rdn = synthetic_dn()
    with pytest.raises(PoleError) as info:
        rdn.dn(float(rdn.pole_values[1]))
    assert info.value.pole == pytest.approx(rdn.pole_values[1])


def test_one_lead_toy_matches_hand_expansion():
    j = build_junction({"well": {"a": PI, "b": PI}, "leads": [{"side": "top", "offset": PI / 4, "width": PI / 2}]})
    ch = thresholds(j, 2)
    jp, jm, lam_s = 0.7, -0.4, 5.3
    K = np.array([[1.5, 0.2], [0.2, 2.5]])
    rdn = RationalDN(delta=(4.5, 6.0), channels=ch, pole_values=np.array([lam_s]),
                     pole_currents=np.array([[jp, jm]]), tail_values=np.zeros(0), tail_currents=np.zeros((0, 2)),
                     lam_cut=7.0, remainder=K[None])
    lam = 4.9
    g = 1.0 / (lam - lam_s)
    dpp, dpm, dmm = jp * jp * g + K[0, 0], jp * jm * g + K[0, 1], jm * jm * g + K[1, 1]
    expected = dpp - dpm * dpm / (dmm + math.sqrt(16.0 - lam))
    assert raw_M(rdn, lam)[0, 0] == pytest.approx(expected, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(4.3, 5.7), st.integers(0, 10_000))
def test_aggregate_of_inverse_map_is_inverse_aggregate(lam, seed):
    rdn = synthetic_dn(seed=seed)
    if np.min(np.abs(rdn.pole_values - lam)) < 1e-6:
        return
    ch = rdn.channels
    full = rdn.dn(lam)
    km = k_minus(ch, lam)
    M = aggregate_M_raw(frame_blocks(full, ch.open_index(), ch.closed_index()), km, lam)
    N = aggregate_N_raw(frame_blocks(np.linalg.inv(full), ch.open_index(), ch.closed_index()), km, lam)
    np.testing.assert_allclose(M @ N, np.eye(ch.n_leads), atol=1e-8 * max(1.0, np.linalg.cond(M)))


def test_aggregate_reports_condition_number():
    rdn = synthetic_dn()
    _, cond = aggregate_M_raw(dn_blocks(rdn, 4.55), k_minus(rdn.channels, 4.55), 4.55, return_condition=True)
    assert 1.0 <= cond < 1e6


def test_assembled_dn_is_herglotz():
    rdn = synthetic_dn()
    for lam in (4.7 + 0.2j, 5.1 + 0.01j):
        dn = rdn.dn_delta(lam)
        im = (dn - dn.conj().T) / 2j
        assert np.linalg.eigvalsh(im).max() < 1e-12


def test_example_four_is_thin(square_data):
    report = thinness_report(split_dn(square_data, (4.0, 6.0), 40.0))
    assert report.thin, f"sup ||K_-^-1 K_--|| = {report.sup_norm}"


def test_example_four_closed_denominator_is_invertible(square_data):
    report = thinness_report(split_dn(square_data, (4.0, 6.0), 40.0))
    assert report.min_denominator_sv > 1.0
    assert report.max_denominator_cond < 100.0


def test_wide_leads_are_not_thin():
    j = build_junction({"well": {"a": PI, "b": PI},
                        "leads": [{"side": s, "offset": 0.0, "width": PI} for s in ("right", "top", "left")]})
    data = rectangle_eigendata(j, 30.0, 6)
    assert not thinness_report(split_dn(data, (1.5, 3.0), 30.0), n_grid=41).thin


def test_empty_polar_part_has_empty_zero_set(square_data):
    report = thinness_report(split_dn(square_data, (5.5, 7.5), 40.0), n_grid=41)
    assert report.zero_set == ()
