import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from junctionlab.dnmap import RationalDN, raw_M
from junctionlab.errors import IntermediatePole, PoleError
from junctionlab.intermediate import (IntermediateDN, NDPoleData, compensated_N, dual_nd_data,
                                      intermediate_eigenvalues, raw_N, residue_by_limit)
from junctionlab.presets import ALPHA, BETA, synthetic_dn, synthetic_nd


def _open_only(rdn: RationalDN) -> RationalDN:
    cur = np.zeros_like(rdn.pole_currents)
    op = rdn.open_index()
    cur[:, op] = rdn.pole_currents[:, op]
    return RationalDN(rdn.delta, rdn.channels, rdn.pole_values, cur, rdn.tail_values, rdn.tail_currents,
                      rdn.lam_cut, rdn.remainder)


def test_no_closed_coupling_means_no_potential():
    idn = IntermediateDN(_open_only(synthetic_dn()))
    assert not np.any(idn.potential_Q(4.9))
    values = [ev.value for ev in intermediate_eigenvalues(idn)]
    np.testing.assert_array_equal(values, idn.rdn.pole_values)


def test_printed_model_potential(printed):
    idn, _ = printed
    for lam in (4.5, 5.0, 5.7):
        expected = math.pi / (4 * math.sqrt(16 - lam)) * np.array([[ALPHA**2, -ALPHA * BETA], [-ALPHA * BETA, BETA**2]])
        np.testing.assert_allclose(idn.potential_Q(lam), expected, atol=1e-14)


def test_potential_derivative_positive_at_five(asym):
    assert np.linalg.eigvalsh(asym.idn.dQ(5.0)).min() > 0.0


def test_potential_is_hermitian(asym):
    q = asym.idn.potential_Q(4.77)
    np.testing.assert_allclose(q, q.T, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(4.3, 5.7), st.integers(0, 500))
def test_compensated_agrees_with_raw(lam, seed):
    rdn = synthetic_dn(seed=seed)
    idn = IntermediateDN(rdn)
    zeros = [ev.value for ev in intermediate_eigenvalues(idn)]
    if min(abs(lam - z) for z in list(zeros) + list(rdn.pole_values)) < 1e-3:
        return
    raw = raw_M(rdn, lam)
    comp = idn.compensated_M(lam)
    assert np.abs(raw - comp).max() <= 1e-9 * max(1.0, np.abs(raw).max())


def test_compensated_is_finite_at_well_eigenvalue(asym):
    with pytest.raises(PoleError):
        raw_M(asym.rdn, 5.0)
    assert np.all(np.isfinite(asym.idn.compensated_M(5.0)))


def test_zero_of_denominator_is_reported(asym):
    with pytest.raises(IntermediatePole):
        asym.idn.compensated_M(asym.eigen[0].value)


def test_residue_matches_limit(asym):
    for ev in asym.eigen:
        limit = residue_by_limit(asym.idn, ev.value)
        np.testing.assert_allclose(ev.residue(), limit, atol=1e-6 * np.abs(limit).max())


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_residues_are_psd_with_rank_of_null_space(seed):
    idn = IntermediateDN(synthetic_dn(seed=seed))
    for ev in intermediate_eigenvalues(idn):
        w = np.linalg.eigvalsh(ev.residue())
        assert w.min() > -1e-12 * w.max()
        assert ev.residue_rank() == ev.multiplicity


def test_printed_model_zeros_are_simple(printed):
    _, eigen = printed
    assert [ev.multiplicity for ev in eigen] == [1, 1]
    assert [ev.residue_rank() for ev in eigen] == [1, 1]


def test_compensated_nd_agrees_with_raw():
    data, channels = synthetic_nd()
    for lam in np.linspace(4.55, 5.45, 37):
        if np.min(np.abs(data.values - lam)) < 1e-3:
            continue
        raw = raw_N(data, channels, lam)
        comp = compensated_N(data, channels, lam)
        assert np.abs(raw - comp).max() <= 1e-9 * max(1.0, np.abs(raw).max())


def test_compensated_nd_is_finite_at_nd_poles():
    data, channels = synthetic_nd()
    for v in data.values:
        with pytest.raises(PoleError):
            raw_N(data, channels, float(v))
        assert np.all(np.isfinite(compensated_N(data, channels, float(v))))


def test_nd_without_closed_coupling_is_open_block():
    data, channels = synthetic_nd()
    op, cl = channels.open_index(), channels.closed_index()
    traces = data.traces.copy()
    traces[:, cl] = 0.0
    tail = lambda lam: np.diag(np.arange(1.0, channels.size + 1))
    stripped = NDPoleData(data.values, traces, tail)
    lam = 4.83
    expected = (traces[:, op].T / (data.values - lam)) @ traces[:, op] + tail(lam)[np.ix_(op, op)]
    np.testing.assert_allclose(compensated_N(stripped, channels, lam), expected, atol=1e-13)


def test_compensated_maps_are_mutual_inverses():
    rdn = synthetic_dn(seed=5)
    const_tail = rdn.remainder[0]
    nd = dual_nd_data(rdn.pole_values, rdn.pole_currents, const_tail)
    idn = IntermediateDN(rdn)
    zeros = [ev.value for ev in intermediate_eigenvalues(idn)]
    for lam in np.linspace(4.6, 5.4, 41):
        if min(abs(lam - z) for z in zeros + list(rdn.pole_values) + list(nd.values)) < 1e-3:
            continue
        M = idn.compensated_M(lam)
        N = compensated_N(nd, rdn.channels, lam)
        assert np.abs(M @ N - np.eye(len(M))).max() < 1e-8
