"""Rational splitting of the DN map and the raw Krein aggregates.

With the outward normal, the DN map of the well is the operator function

    DN(lam) = sum_s  j_s j_s^T / (lam - lam_s),   j_s = d phi_s / dn |_Gamma,

understood after regularization, since the sum itself diverges.  For an
auxiliary interval ``delta`` the poles inside it form ``DN^delta`` and the
rest is the regular tail ``K^delta``.  The tail is a truncated pole sum up
to ``lam_cut``.  For rectangles it also carries a smooth remainder, fitted
to the exact separation-of-variables DN map on ``delta``, which stands in
for the poles beyond the cutoff.  Without the
remainder the truncated sum misses the large positive part of the DN map
on high transverse modes.

Blocks are framed by the open/closed projections ``P_+`` and ``P_-`` of the
first band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import DenominatorSingular, PoleError, SchemaError, SplitError
from .geometry import ChannelSet, k_minus, thresholds
from .spectral import EigenData, exact_dn_batch

# Poles closer than this (relative) to the evaluation point count as hits.
POLE_TOL = 1e-13


@dataclass(frozen=True)
class RationalDN:
    """DN map split on an auxiliary interval into polar part and regular tail."""

    delta: tuple[float, float]
    channels: ChannelSet
    pole_values: np.ndarray          # (N,)
    pole_currents: np.ndarray        # (N, C)
    tail_values: np.ndarray          # (T,)
    tail_currents: np.ndarray        # (T, C)
    lam_cut: float
    remainder: np.ndarray | None = None  # Chebyshev coefficients over delta, shape (deg+1, C, C)

    @property
    def n_poles(self) -> int:
        return len(self.pole_values)

    @property
    def n_channels(self) -> int:
        return self.channels.size

    def _pole_sum(self, values: np.ndarray, currents: np.ndarray, lam: complex, kind: str) -> np.ndarray:
        if len(values) == 0:
            return np.zeros((self.n_channels, self.n_channels))
        gap = lam - values
        hit = np.flatnonzero(np.abs(gap) <= POLE_TOL * max(1.0, abs(lam)))
        if hit.size:
            raise PoleError(f"lambda={lam} hits {kind} pole {values[hit[0]]}", pole=float(values[hit[0]]), index=int(hit[0]))
        return (currents.T / gap) @ currents

    def dn_delta(self, lam: complex) -> np.ndarray:
        """Polar part: poles inside the auxiliary interval."""
        return self._pole_sum(self.pole_values, self.pole_currents, lam, "interior")

    def remainder_at(self, lam: complex) -> np.ndarray:
        if self.remainder is None:
            return np.zeros((self.n_channels, self.n_channels))
        lo, hi = self.delta
        x = (2.0 * lam - lo - hi) / (hi - lo)
        return np.polynomial.chebyshev.chebval(x, self.remainder)

    def k_delta(self, lam: complex) -> np.ndarray:
        """Regular tail: truncated pole sum plus the fitted remainder."""
        return self._pole_sum(self.tail_values, self.tail_currents, lam, "tail") + self.remainder_at(lam)

    def dn(self, lam: complex) -> np.ndarray:
        return self.dn_delta(lam) + self.k_delta(lam)

    def open_index(self) -> np.ndarray:
        return self.channels.open_index()

    def closed_index(self) -> np.ndarray:
        return self.channels.closed_index()


def split_dn(
    eigendata: EigenData,
    delta: tuple[float, float],
    lam_cut: float,
    l_max: int | None = None,
    channels: ChannelSet | None = None,
    regularize: bool = True,
    n_terms: int = 20000,
) -> RationalDN:
    """Split eigen-data into poles inside ``delta`` and a regular tail.

    ``regularize`` adds the fitted remainder when the data come from an
    analytic rectangle (``eigendata.junction`` is set); external data get a
    plain truncated tail.
    """
    lo, hi = float(delta[0]), float(delta[1])
    if not lo < hi:
        raise SplitError(f"empty interval {delta}")
    if not lam_cut > hi:
        raise SplitError(f"lam_cut={lam_cut} must exceed the interval's upper end {hi}")
    l_max = eigendata.l_max if l_max is None else l_max
    if l_max > eigendata.l_max:
        raise SchemaError(f"eigen-data carry {eigendata.l_max} modes, {l_max} requested")
    currents = eigendata.currents[:, :, :l_max].reshape(len(eigendata.values), -1)
    values = np.asarray(eigendata.values, dtype=float)
    keep = values <= lam_cut
    values, currents = values[keep], currents[keep]
    edge = np.abs(values - lo) < 1e-12 * max(1.0, abs(lo))
    edge |= np.abs(values - hi) < 1e-12 * max(1.0, abs(hi))
    if np.any(edge):
        raise SplitError(f"eigenvalue {values[edge][0]} lies on the interval edge; nudge the interval")
    inside = (values > lo) & (values < hi)
    if channels is None:
        if eigendata.junction is None:
            raise SchemaError("channels must be supplied for imported eigen-data")
        channels = thresholds(eigendata.junction, l_max)
    if channels.size != currents.shape[1]:
        raise SchemaError(f"channel count {channels.size} does not match eigen-data ({currents.shape[1]})")
    remainder = None
    if regularize and eigendata.junction is not None:
        remainder = _remainder_chebyshev(eigendata.junction, values, currents, (lo, hi), l_max, n_terms)
    return RationalDN(
        delta=(lo, hi),
        channels=channels,
        pole_values=values[inside],
        pole_currents=currents[inside],
        tail_values=values[~inside],
        tail_currents=currents[~inside],
        lam_cut=float(lam_cut),
        remainder=remainder,
    )


def _remainder_chebyshev(junction, values, currents, delta, l_max, n_terms, n_nodes=8, degree=5):
    """Chebyshev fit over ``delta`` of ``exact DN - truncated pole sum``.

    The difference only has poles beyond the cutoff, so it is analytic on a
    large ellipse around ``delta`` and a low-degree fit is accurate to near
    machine precision.  Nodes sitting close to a pole are dropped, since the
    subtraction loses digits there.
    """
    lo, hi = delta
    nodes = np.cos(np.pi * (np.arange(n_nodes) + 0.5) / n_nodes)
    lams = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    gap = np.min(np.abs(lams[:, None] - values[None, :]), axis=1) if len(values) else np.full(n_nodes, np.inf)
    keep = gap > 1e-2 * (hi - lo)
    nodes, lams = nodes[keep], lams[keep]
    exact = exact_dn_batch(junction, lams, l_max, n_terms).real
    truncated = np.einsum("sc,ns,sd->ncd", currents, 1.0 / (lams[:, None] - values[None, :]), currents)
    diff = exact - truncated
    diff = 0.5 * (diff + diff.transpose(0, 2, 1))
    deg = min(degree, len(nodes) - 1)
    n_ch = diff.shape[1]
    coef = np.polynomial.chebyshev.chebfit(nodes, diff.reshape(len(nodes), -1), deg)
    return coef.reshape(deg + 1, n_ch, n_ch)


class Blocks(NamedTuple):
    pp: np.ndarray
    pm: np.ndarray
    mp: np.ndarray
    mm: np.ndarray


def frame_blocks(full: np.ndarray, open_idx: np.ndarray, closed_idx: np.ndarray) -> Blocks:
    return Blocks(
        full[np.ix_(open_idx, open_idx)],
        full[np.ix_(open_idx, closed_idx)],
        full[np.ix_(closed_idx, open_idx)],
        full[np.ix_(closed_idx, closed_idx)],
    )


def dn_blocks(rdn: RationalDN, lam: complex) -> Blocks:
    """``P_+ / P_-`` blocks of the full DN matrix at ``lam``."""
    return frame_blocks(rdn.dn(lam), rdn.open_index(), rdn.closed_index())


def _solve(mat: np.ndarray, rhs: np.ndarray, lam: complex, cond_limit: float = 1e14) -> tuple[np.ndarray, float]:
    try:
        lu = sla.lu_factor(mat, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise DenominatorSingular(lam) from exc
    cond = np.linalg.cond(mat) if mat.size else 1.0
    if not np.isfinite(cond) or cond > cond_limit:
        raise DenominatorSingular(lam, cond)
    return sla.lu_solve(lu, rhs), float(cond)


def aggregate_M_raw(blocks: Blocks, kminus: np.ndarray, lam: complex = float("nan"), return_condition: bool = False):
    """``M = DN_{++} - DN_{+-} (DN_{--} + K_-)^{-1} DN_{-+}``."""
    x, cond = _solve(blocks.mm + kminus, blocks.mp, lam)
    out = blocks.pp - blocks.pm @ x
    return (out, cond) if return_condition else out


def aggregate_N_raw(nd_blocks: Blocks, kminus: np.ndarray, lam: complex = float("nan"), return_condition: bool = False):
    """``N = ND_{++} - ND_{+-} K_- (I + ND_{--} K_-)^{-1} ND_{-+}``."""
    eye = np.eye(kminus.shape[0])
    x, cond = _solve(eye + nd_blocks.mm @ kminus, nd_blocks.mp, lam)
    out = nd_blocks.pp - nd_blocks.pm @ kminus @ x
    return (out, cond) if return_condition else out


def raw_M(rdn: RationalDN, lam: float) -> np.ndarray:
    """Convenience: raw aggregate straight from a split DN map."""
    return aggregate_M_raw(dn_blocks(rdn, lam), k_minus(rdn.channels, lam), lam)


# ---------------------------------------------------------------------------
# Regularized resolvent-type series
# ---------------------------------------------------------------------------


def regularized_pole_sum(values: np.ndarray, currents: np.ndarray, lam: float, anchor: float,
                         at_anchor: np.ndarray, slope_at_anchor: np.ndarray) -> np.ndarray:
    """Second-order regularized sum of ``j j^T / (lam - lam_s)``.

    Uses the identity

        F(lam) = F(mu) + (lam - mu) F'(mu) + (lam - mu)^2 sum_s j j^T / ((lam - lam_s)(mu - lam_s)^2),

    whose truncated series has double poles in the anchor and converges
    much faster than the plain pole sum.
    """
    gap_l = lam - values
    gap_m = anchor - values
    weights = (lam - anchor) ** 2 / (gap_l * gap_m**2)
    return at_anchor + (lam - anchor) * slope_at_anchor + (currents.T * weights) @ currents


# ---------------------------------------------------------------------------
# Thinness diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThinnessReport:
    sup_norm: float            # sup over grid of ||K_-^{-1} K^delta_{--}||
    thin: bool                 # sup_norm < 1
    min_denominator_sv: float  # min over grid of smallest singular value of K^delta_{--} + K_-
    max_denominator_cond: float
    zero_set: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "sup_norm": self.sup_norm,
            "thin": self.thin,
            "min_denominator_sv": self.min_denominator_sv,
            "max_denominator_cond": self.max_denominator_cond,
            "zero_set": list(self.zero_set),
        }


def _closed_det_ratio(rdn: RationalDN, lam: float) -> float:
    """``det[I + (K_--^delta + K_-)^{-1} DN^delta_{--}]`` (real for real lam)."""
    cl = rdn.closed_index()
    km = k_minus(rdn.channels, lam)
    tail = rdn.k_delta(lam)[np.ix_(cl, cl)] + km
    polar = rdn.dn_delta(lam)[np.ix_(cl, cl)]
    mat = np.eye(len(cl)) + np.linalg.solve(tail, polar)
    return float(np.real(np.linalg.det(mat)))


def thinness_report(rdn: RationalDN, channels: ChannelSet | None = None,
                    delta: tuple[float, float] | None = None, n_grid: int = 401) -> ThinnessReport:
    """Evaluate the thin-junction criteria on a grid over ``delta``."""
    channels = rdn.channels if channels is None else channels
    lo, hi = rdn.delta if delta is None else delta
    cl = channels.closed_index()
    grid = np.linspace(lo, hi, n_grid)
    sup, min_sv, max_cond = 0.0, math.inf, 0.0
    for lam in grid:
        if _near_any(lam, rdn.tail_values):
            continue
        km = k_minus(channels, lam)
        kmm = rdn.k_delta(lam)[np.ix_(cl, cl)]
        sup = max(sup, float(np.linalg.norm(np.linalg.solve(km, kmm), 2)))
        sv = np.linalg.svd(kmm + km, compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))
        max_cond = max(max_cond, float(sv[0] / sv[-1]))
    zeros = _closed_zero_set(rdn, grid) if rdn.n_poles else ()
    return ThinnessReport(sup, sup < 1.0, min_sv, max_cond, tuple(zeros))


def _near_any(lam: float, values: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(len(values)) and bool(np.min(np.abs(values - lam)) < tol)


def _closed_zero_set(rdn: RationalDN, grid: np.ndarray) -> list[float]:
    """Zeros of the closed-channel determinant ratio.

    The ratio also changes sign across poles of ``DN^delta``, so each bracket
    is refined and kept only if the function value shrinks rather than blows up.
    """
    from scipy.optimize import brentq

    poles = rdn.pole_values
    pts = [x for x in grid if not _near_any(x, poles, 1e-7)]
    vals = [_closed_det_ratio(rdn, x) for x in pts]
    zeros = []
    for (x0, f0), (x1, f1) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
        if f0 == 0.0:
            zeros.append(x0)
            continue
        if f0 * f1 < 0 and not np.any((poles > x0) & (poles < x1)):
            root = brentq(lambda x: _closed_det_ratio(rdn, x), x0, x1, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            zeros.append(float(root))
    return zeros
