"""Reproduction of the printed constants of the asymmetric and symmetric T-junctions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import fixed_quad

from .geometry import Junction
from .graphvertex import datta_projection, fit_symmetric_beta, symmetric_gamma
from .intermediate import IntermediateDN
from .presets import (ALPHA, BETA, GAMMA, PRINTED_J12, PRINTED_J21, asymmetric_junction, delta_q,
                      printed_model_dn, symmetric_junction)
from .spectral import EigenPair, sine_overlap

EXPECTED = {
    "alpha": ALPHA,
    "gamma": GAMMA,
    "beta": BETA,
    "current_12": PRINTED_J12.tolist(),
    "current_21": PRINTED_J21.tolist(),
}


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    computed: float | list
    expected: float | list
    error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _check(name: str, computed, expected, tol: float = 1e-12) -> GoldenCheck:
    c = np.atleast_1d(np.asarray(computed, dtype=float))
    e = np.atleast_1d(np.asarray(expected, dtype=float))
    err = float(np.max(np.abs(c - e)))
    as_value = (lambda a: float(a[0])) if c.size == 1 else (lambda a: a.tolist())
    return GoldenCheck(name, as_value(c), as_value(e), err, tol)


def _pair(junction: Junction, m: int, n: int) -> EigenPair:
    return EigenPair(value=m * m + n * n, m=m, n=n, a=junction.a, b=junction.b)


def side_mode_overlap(junction: Junction, pair: EigenPair, lead_index: int, l: int) -> float:
    """``int_lead sin(k pi t / L) sin(l pi (t - offset) / w) dt`` for the pair's trace on the lead's side."""
    lead = junction.leads[lead_index]
    _, k, side_len = pair.boundary_current(lead.side)
    return float(sine_overlap(k * math.pi / side_len, l * math.pi / lead.width, lead.offset, lead.width))


def overlap_constants(junction: Junction | None = None) -> dict:
    """``alpha`` and ``gamma`` from the traces of ``phi_21`` against the second lead mode.

    ``alpha`` lives on the top lead (centred), ``gamma`` on the left lead
    (flush with the corner).
    """
    junction = asymmetric_junction() if junction is None else junction
    phi21 = _pair(junction, 2, 1)
    alpha = side_mode_overlap(junction, phi21, 1, 2)
    gamma = side_mode_overlap(junction, phi21, 2, 2)
    return {"alpha": alpha, "gamma": gamma, "beta": alpha + gamma}


def quadrature_constants() -> dict:
    # 40-point Gauss-Legendre is exact to rounding for these trigonometric integrands.
    alpha = 2.0 * fixed_quad(lambda x: np.sin(2 * x) * np.sin(4 * x), 0.0, math.pi / 4, n=40)[0]
    gamma = fixed_quad(lambda x: np.sin(x) * np.sin(4 * x), 0.0, math.pi / 2, n=40)[0]
    return {"alpha": alpha, "gamma": gamma, "beta": alpha + gamma}


def projected_currents(junction: Junction | None = None) -> dict:
    """Coefficients ``c`` in ``P_+ d phi / dn |_Gamma_m = c_m sin 2 x_m`` for ``phi_12`` and ``phi_21``.

    With the normalized lead mode ``e = sqrt(2/w) sin(pi t / w)`` this is
    ``c_m = sqrt(2/w) <d phi/dn, e>``.
    """
    from .spectral import channel_overlap

    junction = asymmetric_junction() if junction is None else junction
    out = {}
    for key, (m, n) in (("current_12", (1, 2)), ("current_21", (2, 1))):
        pair = _pair(junction, m, n)
        out[key] = [math.sqrt(2.0 / lead.width) * channel_overlap(pair, lead, 1) for lead in junction.leads]
    return out


def level_shift_check(lams=(4.5, 4.9, 5.3)) -> float:
    """Largest gap between the printed level shift and the trace of the model's ``Q``."""
    idn = IntermediateDN(printed_model_dn())
    return max(abs(np.trace(idn.potential_Q(x)).real - delta_q(x)) for x in lams)


def golden_report(expected: dict | None = None) -> list[GoldenCheck]:
    exp = dict(EXPECTED)
    if expected:
        exp.update(expected)
    checks: list[GoldenCheck] = []
    overlap = overlap_constants()
    quadr = quadrature_constants()
    for name in ("alpha", "gamma", "beta"):
        checks.append(_check(f"{name}_overlap", overlap[name], exp[name]))
        checks.append(_check(f"{name}_quadrature", quadr[name], exp[name]))
    for key, vec in projected_currents().items():
        checks.append(_check(key, vec, exp[key]))
    shift_gap = level_shift_check()
    checks.append(GoldenCheck("level_shift", shift_gap, 0.0, shift_gap, 1e-12))
    beta_sample = 0.7
    dv = datta_projection(beta_sample)
    P = dv.P.real
    structure = max(float(np.max(np.abs(P[1] - beta_sample * P[0]))), abs(float(np.trace(P)) - 1.0),
                    float(np.max(np.abs(P @ P - P))))
    checks.append(GoldenCheck("datta_projection_structure", structure, 0.0, structure, 1e-14))
    gamma_s = symmetric_gamma(symmetric_junction())
    beta_s = fit_symmetric_beta(gamma_s)
    checks.append(GoldenCheck("symmetric_orthogonality", 2.0 + beta_s * gamma_s, 0.0, abs(2.0 + beta_s * gamma_s), 0.0))
    return checks


def report_json(checks: list[GoldenCheck]) -> str:
    payload = {"checks": [c.to_dict() for c in checks], "all_passed": all(c.passed for c in checks)}
    return json.dumps(payload, sort_keys=True, indent=2)
