"""Worked T-junction configurations and their printed constants.

Two square wells of side pi with three leads of width pi/2:

* the asymmetric junction: leads on the right (offset pi/4), top (offset
  pi/4) and left (offset 0) sides.  This placement reproduces the printed
  overlap integrals alpha and gamma and the form of every printed boundary
  current;
* the symmetric junction: the same three sides, every lead centred.

The module also rebuilds the printed second-channel model of the
asymmetric junction, which replaces K_- by its second-branch contribution
and keeps only the dominant tail pole at 8.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .dnmap import RationalDN
from .geometry import Junction, build_junction, thresholds

PI = math.pi

ALPHA = 2.0 / 3.0
GAMMA = -4.0 / 15.0
BETA = ALPHA + GAMMA  # 2/5

# Open-channel current vectors over (Gamma_1, Gamma_2, Gamma_3), as printed.
PRINTED_J12 = np.array([0.0, 16.0 * math.sqrt(2.0) / (3.0 * PI**2), -4.0 / PI])
PRINTED_J21 = np.array([16.0 / (3.0 * PI**2), 0.0, -16.0 / (3.0 * PI**2)])
# The printed relation P_+ J = (2/sqrt(pi)) sin(2x) psi.
PRINTED_PSI12 = 0.5 * math.sqrt(PI) * PRINTED_J12
PRINTED_PSI21 = 0.5 * math.sqrt(PI) * PRINTED_J21


def asymmetric_config() -> dict:
    return {
        "well": {"a": PI, "b": PI, "V": 0.0},
        "leads": [
            {"side": "right", "offset": PI / 4, "width": PI / 2},
            {"side": "top", "offset": PI / 4, "width": PI / 2},
            {"side": "left", "offset": 0.0, "width": PI / 2},
        ],
        "V_lead": 0.0,
    }


def symmetric_config() -> dict:
    return {
        "well": {"a": PI, "b": PI, "V": 0.0},
        "leads": [
            {"side": "right", "offset": PI / 4, "width": PI / 2},
            {"side": "top", "offset": PI / 4, "width": PI / 2},
            {"side": "left", "offset": PI / 4, "width": PI / 2},
        ],
        "V_lead": 0.0,
    }


def asymmetric_junction() -> Junction:
    return build_junction(asymmetric_config())


def symmetric_junction() -> Junction:
    return build_junction(symmetric_config())


def delta_q(lam: float, alpha: float = ALPHA, beta: float = BETA) -> float:
    """Level shift ``pi (alpha^2 + beta^2) / (4 sqrt(16 - lam))``."""
    return PI * (alpha**2 + beta**2) / (4.0 * math.sqrt(16.0 - lam))


def shifted_level(alpha: float = ALPHA, beta: float = BETA) -> float:
    """Fixed point of ``lam = 5 - delta_q(lam)`` below 5."""
    return brentq(lambda x: x - 5.0 + delta_q(x, alpha, beta), 4.0 + 1e-9, 5.0, xtol=1e-15, rtol=1e-15)


def printed_model_dn(alpha: float = ALPHA, beta: float = BETA) -> RationalDN:
    """Second-channel model of the asymmetric junction as a split DN map.

    Channels are three leads with two modes each (thresholds 4 and 16).
    The double pole at 5 carries the printed open currents and a single
    effective closed-channel coefficient, ``(sqrt(pi)/2) alpha`` for phi_12
    and ``-(sqrt(pi)/2) beta`` for phi_21, so that

        Q(lam) = pi / (4 sqrt(16 - lam)) [[alpha^2, -alpha beta], [-alpha beta, beta^2]].

    The tail is the pole at 8 on the third lead's open channel with weight
    4/pi^2 in the normalized basis.
    """
    channels = thresholds(asymmetric_junction(), 2)
    n_ch = channels.size
    currents = np.zeros((2, n_ch))
    currents[:, channels.open_index()] = np.vstack([PRINTED_PSI12, PRINTED_PSI21])
    closed = channels.index(0, 2)
    half = 0.5 * math.sqrt(PI)
    currents[0, closed] = half * alpha
    currents[1, closed] = -half * beta
    tail = np.zeros((1, n_ch))
    tail[0, channels.index(2, 1)] = 2.0 / PI
    return RationalDN(
        delta=(4.0, 6.0),
        channels=channels,
        pole_values=np.array([5.0, 5.0]),
        pole_currents=currents,
        tail_values=np.array([8.0]),
        tail_currents=tail,
        lam_cut=8.0,
    )


def synthetic_dn(n_poles: int = 3, l_max: int = 3, seed: int = 7,
                 delta: tuple[float, float] = (4.5, 5.5)) -> RationalDN:
    """Random split DN map with constant positive tail, for cross-formula checks."""
    rng = np.random.default_rng(seed)
    channels = thresholds(asymmetric_junction(), l_max)
    n_ch = channels.size
    lo, hi = delta
    values = np.sort(lo + (hi - lo) * (0.15 + 0.7 * rng.random(n_poles)))
    currents = rng.normal(size=(n_poles, n_ch))
    g = rng.normal(size=(n_ch, n_ch)) / math.sqrt(n_ch)
    tail = g @ g.T + np.eye(n_ch)
    return RationalDN(
        delta=(lo, hi),
        channels=channels,
        pole_values=values,
        pole_currents=currents,
        tail_values=np.zeros(0),
        tail_currents=np.zeros((0, n_ch)),
        lam_cut=hi + 1.0,
        remainder=tail[None, :, :],
    )


def synthetic_nd(n_poles: int = 3, l_max: int = 3, seed: int = 11,
                 delta: tuple[float, float] = (4.5, 5.5)):
    """Random ND pole data with poles inside ``delta`` and a linear tail.

    The tail ``K0 + (lam - mid) K1`` has ``K1`` positive semidefinite, so the
    assembled ND map increases with the energy like a genuine one.
    """
    from .intermediate import NDPoleData

    rng = np.random.default_rng(seed)
    channels = thresholds(asymmetric_junction(), l_max)
    n_ch = channels.size
    lo, hi = delta
    mid = 0.5 * (lo + hi)
    values = np.sort(lo + (hi - lo) * (0.15 + 0.7 * rng.random(n_poles)))
    traces = 0.5 * rng.normal(size=(n_poles, n_ch))
    g0 = rng.normal(size=(n_ch, n_ch)) / n_ch
    g1 = rng.normal(size=(n_ch, n_ch)) / n_ch
    k0 = 0.5 * (g0 + g0.T)
    k1 = g1 @ g1.T
    data = NDPoleData(values=values, traces=traces, tail=lambda lam: k0 + (lam - mid) * k1)
    return data, channels
