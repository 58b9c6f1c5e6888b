"""Dirichlet eigen-data of the rectangular well and boundary-current overlaps.

Eigenfunctions of the Dirichlet Laplacian on ``[0, a] x [0, b]`` are

    phi_mn(x, y) = 2 / sqrt(a b) * sin(m pi x / a) * sin(n pi y / b),

with eigenvalue ``(m pi / a)^2 + (n pi / b)^2 + V_well``.  On every side the
outward normal derivative of ``phi_mn`` is a single sine of the side's
tangential coordinate times an amplitude, so each channel coefficient

    c[s, lead, l] = < d phi_s / dn |_lead , e_l >

reduces to a closed-form sine-sine integral.  The module also evaluates the
exact DN matrix of the rectangle by separation of variables.  That matrix is
used to regularize the truncated pole sums in ``dnmap``, and tests use it
as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError
from .geometry import ChannelSet, Junction, Lead, thresholds


@dataclass(frozen=True, order=True)
class EigenPair:
    value: float
    m: int
    n: int
    a: float = field(compare=False)
    b: float = field(compare=False)

    @property
    def norm(self) -> float:
        return 2.0 / math.sqrt(self.a * self.b)

    def __call__(self, x: np.ndarray | float, y: np.ndarray | float) -> np.ndarray:
        return self.norm * np.sin(self.m * np.pi * np.asarray(x) / self.a) * np.sin(self.n * np.pi * np.asarray(y) / self.b)

    def boundary_current(self, side: str) -> tuple[float, int, float]:
        """Outward normal derivative on ``side`` as ``amp * sin(k pi t / L)``.

        Returns ``(amp, k, L)``.
        """
        if side == "bottom":
            return -self.norm * self.n * np.pi / self.b, self.m, self.a
        if side == "top":
            return self.norm * self.n * np.pi / self.b * (-1.0) ** self.n, self.m, self.a
        if side == "left":
            return -self.norm * self.m * np.pi / self.a, self.n, self.b
        if side == "right":
            return self.norm * self.m * np.pi / self.a * (-1.0) ** self.m, self.n, self.b
        raise ValueError(f"unknown side {side!r}")


def dirichlet_eigenpairs(junction: Junction, lam_cut: float) -> list[EigenPair]:
    """All eigenpairs with eigenvalue <= lam_cut, ascending.

    Degenerate eigenvalues appear as separate entries, ordered by (m, n).
    """
    a, b, V = junction.a, junction.b, junction.V_well
    pairs = []
    m = 1
    while (m * np.pi / a) ** 2 + (np.pi / b) ** 2 + V <= lam_cut:
        n = 1
        while True:
            value = (m * np.pi / a) ** 2 + (n * np.pi / b) ** 2 + V
            if value > lam_cut:
                break
            pairs.append(EigenPair(value, m, n, a, b))
            n += 1
        m += 1
    pairs.sort()
    return pairs


def _cos_integral(freq: np.ndarray, phase: np.ndarray, length: float) -> np.ndarray:
    """``int_0^length cos(freq * t + phase) dt``, stable as freq -> 0."""
    half = 0.5 * freq * length
    return length * np.cos(phase + half) * np.sinc(half / np.pi)


def sine_overlap(side_freq, lead_freq, offset: float, width: float):
    """``int_{offset}^{offset+width} sin(side_freq t) sin(lead_freq (t - offset)) dt``.

    Closed form by product-to-sum.  Vectorized over ``side_freq``.
    """
    q = np.asarray(side_freq, dtype=float)
    p = float(lead_freq)
    out = 0.5 * (_cos_integral(p - q, -q * offset, width) - _cos_integral(p + q, q * offset, width))
    return out if out.ndim else float(out)


def lead_mode(lead: Lead, l: int, t: np.ndarray) -> np.ndarray:
    """Normalized transverse mode ``sqrt(2/w) sin(l pi (t - offset) / w)`` on the lead."""
    return math.sqrt(2.0 / lead.width) * np.sin(l * np.pi * (np.asarray(t) - lead.offset) / lead.width)


def channel_overlap(pair: EigenPair, lead: Lead, l: int) -> float:
    """Channel coefficient ``< d phi / dn |_lead, e_l >`` (outward normal)."""
    amp, k, side_len = pair.boundary_current(lead.side)
    raw = sine_overlap(k * np.pi / side_len, l * np.pi / lead.width, lead.offset, lead.width)
    return amp * math.sqrt(2.0 / lead.width) * raw


# ---------------------------------------------------------------------------
# Eigen-data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenData:
    """Eigenvalues with their boundary-current channel coefficients.

    ``currents[s, m, l-1]`` is the coefficient of eigenfunction ``s`` on lead
    ``m``, mode ``l``.  ``junction`` is set when the data come from the
    analytic rectangle, which enables exact regularization of DN tails.
    """

    values: np.ndarray
    currents: np.ndarray
    labels: tuple[tuple[int, int], ...] = ()
    junction: Junction | None = None

    @property
    def n_leads(self) -> int:
        return self.currents.shape[1]

    @property
    def l_max(self) -> int:
        return self.currents.shape[2]

    def flat(self) -> np.ndarray:
        """Currents as an ``(S, M * l_max)`` array in channel order."""
        return self.currents.reshape(len(self.values), -1)

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {"lambda": float(v), "currents": self.currents[s].tolist()}
            for s, v in enumerate(self.values)
        ]


def current_table(pairs: Sequence[EigenPair], junction: Junction, l_max: int) -> EigenData:
    """Channel coefficients of every eigenpair on every lead and mode."""
    table = np.zeros((len(pairs), junction.n_leads, l_max))
    for m, lead in enumerate(junction.leads):
        side_len = junction.side_length(lead.side)
        modes = np.arange(1, l_max + 1)
        for s, pair in enumerate(pairs):
            amp, k, _ = pair.boundary_current(lead.side)
            raw = np.array([
                sine_overlap(k * np.pi / side_len, l * np.pi / lead.width, lead.offset, lead.width)
                for l in modes
            ])
            table[s, m] = amp * math.sqrt(2.0 / lead.width) * raw
    return EigenData(
        values=np.array([p.value for p in pairs]),
        currents=table,
        labels=tuple((p.m, p.n) for p in pairs),
        junction=junction,
    )


def rectangle_eigendata(junction: Junction, lam_cut: float, l_max: int) -> EigenData:
    return current_table(dirichlet_eigenpairs(junction, lam_cut), junction, l_max)


def import_eigendata(records: Iterable[Mapping[str, Any]], n_leads: int | None = None, l_max: int | None = None) -> EigenData:
    """Validate externally supplied eigen-data.

    Each record is ``{"lambda": float, "currents": [[c_m1, ..., c_mL], ...]}``
    with one row per lead.  Every record must share the same shape.
    """
    values, tables = [], []
    for i, rec in enumerate(records):
        try:
            lam = float(rec["lambda"])
            cur = np.asarray(rec["currents"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"record {i}: {exc}") from exc
        if cur.ndim != 2:
            raise SchemaError(f"record {i}: currents must be a lead-by-mode table")
        if not np.all(np.isfinite(cur)) or not math.isfinite(lam):
            raise SchemaError(f"record {i}: non-finite entries")
        values.append(lam)
        tables.append(cur)
    if not tables:
        raise SchemaError("no eigen-data records")
    shape = tables[0].shape
    for i, cur in enumerate(tables):
        if cur.shape != shape:
            raise SchemaError(f"record {i}: currents shape {cur.shape} differs from {shape}")
    if n_leads is not None and shape[0] != n_leads:
        raise SchemaError(f"expected {n_leads} leads, got {shape[0]}")
    if l_max is not None and shape[1] != l_max:
        raise SchemaError(f"expected l_max={l_max}, got {shape[1]}")
    if shape[1] < 2:
        raise SchemaError("need at least two modes per lead")
    order = np.argsort(values, kind="stable")
    return EigenData(values=np.asarray(values)[order], currents=np.asarray(tables)[order])


# ---------------------------------------------------------------------------
# Exact DN matrix of the rectangle
# ---------------------------------------------------------------------------


def _phi1(w: np.ndarray) -> np.ndarray:
    """``(exp(w) - 1) / w`` for small |w| (Taylor, 12 terms)."""
    out = np.ones_like(w)
    term = np.ones_like(w)
    for j in range(2, 14):
        term = term * w / j
        out = out + term
    return out


def _exp_mode_integral(c: np.ndarray, shift: float, lead: Lead, l: int) -> np.ndarray:
    """``int_lead e_l(t) exp(c (t - shift)) dt`` for complex ``c``.

    Callers choose ``shift`` so that ``Re c (t - shift) <= 0`` on the lead;
    then nothing overflows however large ``|c|`` gets.
    """
    t0, w = lead.offset, lead.width
    p = l * np.pi / w
    total = np.zeros_like(c)
    base = np.exp(c * (t0 - shift))
    for sign in (1.0, -1.0):
        z = c + sign * 1j * p
        zw = z * w
        small = np.abs(zw) < 0.5
        part = np.empty_like(c)
        big = ~small
        part[big] = (np.exp(c[big] * (t0 - shift) + zw[big]) - base[big]) / z[big]
        if small.any():
            part[small] = base[small] * w * _phi1(zw[small])
        total = total + sign * part
    return math.sqrt(2.0 / w) * total / 2j


def _adjacent_sides(side: str) -> tuple[str, str]:
    """Sides sitting at tangential coordinate 0 and at the far end."""
    return ("left", "right") if side in ("bottom", "top") else ("bottom", "top")


def _opposite(side: str) -> str:
    return {"bottom": "top", "top": "bottom", "left": "right", "right": "left"}[side]


def exact_dn_matrix(junction: Junction, lam: complex, l_max: int, n_terms: int = 20000) -> np.ndarray:
    """DN matrix ``<e_(m,l), DN(lam) e_(m',l')>`` by separation of variables.

    Dirichlet data on one lead are expanded in the sine basis of that lead's
    side.  Each term decays or grows hyperbolically into the rectangle and
    vanishes on the other three sides.  Its outward normal derivative is
    then projected onto every lead mode.  The series over the side's sine
    index converges like ``n_terms**-2``.
    """
    out = exact_dn_batch(junction, np.array([lam]), l_max, n_terms)[0]
    if np.isrealobj(lam) or (isinstance(lam, complex) and lam.imag == 0.0):
        return out.real.copy()
    return out


def exact_dn_batch(junction: Junction, lams: np.ndarray, l_max: int, n_terms: int = 20000) -> np.ndarray:
    """``exact_dn_matrix`` at several energies, sharing the overlap tables.

    Returns a complex array of shape ``(len(lams), channels, channels)``.
    """
    lams = np.asarray(lams, dtype=complex).reshape(-1)
    leads = junction.leads
    n_ch = len(leads) * l_max
    out = np.zeros((len(lams), n_ch, n_ch), dtype=complex)
    k = np.arange(1, n_terms + 1, dtype=float)
    for src, lead_s in enumerate(leads):
        L = junction.side_length(lead_s.side)
        W = junction.side_depth(lead_s.side)
        q = k * np.pi / L
        src_coef = np.array([
            (2.0 / L) * math.sqrt(2.0 / lead_s.width)
            * sine_overlap(q, lp * np.pi / lead_s.width, lead_s.offset, lead_s.width)
            for lp in range(1, l_max + 1)
        ])
        near, far = _adjacent_sides(lead_s.side)
        from_origin = lead_s.side in ("bottom", "left")
        sine_proj = {}
        for tgt, lead_t in enumerate(leads):
            if lead_t.side in (lead_s.side, _opposite(lead_s.side)):
                sine_proj[tgt] = np.array([
                    math.sqrt(2.0 / lead_t.width) * sine_overlap(q, l * np.pi / lead_t.width, lead_t.offset, lead_t.width)
                    for l in range(1, l_max + 1)
                ])
        for i, lam in enumerate(lams):
            kappa = np.sqrt(q**2 + junction.V_well - lam + 0j)
            # Principal sqrt: Re kappa >= 0, so exp(-kappa * x) never overflows.
            # At kappa = 0 the profile is linear; a tiny kappa reproduces it to
            # O(kappa^2 W^2) without a separate code path.
            kappa = np.where(np.abs(kappa) * W < 1e-7, 1e-7 / W, kappa)
            e2 = np.exp(-2.0 * kappa * W)
            denom = 1.0 - e2
            coth_term = kappa * (1.0 + e2) / denom          # -F'(0)
            csch_term = 2.0 * kappa * np.exp(-kappa * W) / denom  # -F'(W)
            for tgt, lead_t in enumerate(leads):
                if lead_t.side == lead_s.side:
                    weights = coth_term * sine_proj[tgt]
                elif lead_t.side == _opposite(lead_s.side):
                    weights = -csch_term * sine_proj[tgt]
                else:
                    rows = []
                    for l in range(1, l_max + 1):
                        # Depth from the source side as a function of the
                        # target's tangential coordinate t: n = t or n = W - t.
                        if from_origin:
                            prof = _exp_mode_integral(-kappa, 0.0, lead_t, l) - _exp_mode_integral(kappa, 2.0 * W, lead_t, l)
                        else:
                            prof = _exp_mode_integral(kappa, W, lead_t, l) - _exp_mode_integral(-kappa, -W, lead_t, l)
                        prof = prof / denom
                        rows.append(-q * prof if lead_t.side == near else q * (-1.0) ** k * prof)
                    weights = np.array(rows)
                block = weights @ src_coef.T
                out[i, tgt * l_max:(tgt + 1) * l_max, src * l_max:(src + 1) * l_max] = block
    return out


def exact_dn_derivative(junction: Junction, lam: float, l_max: int, n_terms: int = 20000, step: float = 1e-4) -> np.ndarray:
    """Central-difference derivative of ``exact_dn_matrix`` in the energy."""
    h = step * max(1.0, abs(lam))
    plus = exact_dn_matrix(junction, lam + h, l_max, n_terms)
    minus = exact_dn_matrix(junction, lam - h, l_max, n_terms)
    return (plus - minus) / (2.0 * h)


def weyl_count(junction: Junction, lam: float) -> float:
    """Leading Weyl term ``a b lam / (4 pi)`` for the eigenvalue count."""
    return junction.a * junction.b * (lam - junction.V_well) / (4.0 * np.pi)


def channel_set(junction: Junction, l_max: int) -> ChannelSet:
    return thresholds(junction, l_max)
