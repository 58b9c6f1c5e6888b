"""Junction geometry: rectangular well, straight leads, channel thresholds.

A junction is a rectangle ``[0, a] x [0, b]`` (the vertex domain) with
semi-infinite straight leads glued orthogonally onto segments of its
sides.  Every side has a tangential coordinate that starts at the
side's origin:

* ``bottom`` (y = 0) and ``top`` (y = b) use x, running over ``[0, a]``;
* ``left`` (x = 0) and ``right`` (x = a) use y, running over ``[0, b]``.

A lead is then the segment ``[offset, offset + width]`` of that coordinate.
Transverse modes of lead ``m`` are ``sqrt(2/w) sin(l pi t / w)`` with
``t`` measured from the lead's lower edge, and their thresholds are
``pi^2 l^2 / w^2 + V_lead``.

Channels are flattened lead-major: channel ``(m, l)`` has index
``m * l_max + (l - 1)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import GeometryError, SchemaError, ThresholdError

SIDES = ("bottom", "top", "left", "right")

# Edge-coincidence tolerance used when checking that leads fit on a side.
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class Lead:
    side: str
    offset: float
    width: float

    @property
    def upper(self) -> float:
        return self.offset + self.width

    @property
    def midpoint(self) -> float:
        return self.offset + 0.5 * self.width


@dataclass(frozen=True)
class Well:
    a: float
    b: float
    V: float = 0.0


@dataclass(frozen=True)
class JunctionSpec:
    """Unvalidated junction description, as read from a config file."""

    well: Well
    leads: tuple[Lead, ...]
    V_lead: float = 0.0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "JunctionSpec":
        try:
            w = data["well"]
            well = Well(float(w["a"]), float(w["b"]), float(w.get("V", 0.0)))
            leads = tuple(
                Lead(str(item["side"]), float(item["offset"]), float(item["width"]))
                for item in data["leads"]
            )
            v_lead = float(data.get("V_lead", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"junction config is missing or has a bad field: {exc}") from exc
        return cls(well, leads, v_lead)

    def to_dict(self) -> dict[str, Any]:
        return {
            "well": {"a": self.well.a, "b": self.well.b, "V": self.well.V},
            "leads": [{"side": l.side, "offset": l.offset, "width": l.width} for l in self.leads],
            "V_lead": self.V_lead,
        }


@dataclass(frozen=True)
class Junction:
    """Validated junction.  Immutable, so it can be shared between threads."""

    spec: JunctionSpec
    # Global boundary arclength of each lead's lower and upper edge, with the
    # boundary traversed counter-clockwise from the origin corner.
    arclength: tuple[tuple[float, float], ...] = field(default=())

    @property
    def a(self) -> float:
        return self.spec.well.a

    @property
    def b(self) -> float:
        return self.spec.well.b

    @property
    def V_well(self) -> float:
        return self.spec.well.V

    @property
    def V_lead(self) -> float:
        return self.spec.V_lead

    @property
    def leads(self) -> tuple[Lead, ...]:
        return self.spec.leads

    @property
    def n_leads(self) -> int:
        return len(self.spec.leads)

    def side_length(self, side: str) -> float:
        return self.a if side in ("bottom", "top") else self.b

    def side_depth(self, side: str) -> float:
        """Distance from a side to the opposite side."""
        return self.b if side in ("bottom", "top") else self.a

    def to_json(self) -> str:
        return dumps_junction(self.spec)


def dumps_junction(spec: JunctionSpec) -> str:
    """Canonical JSON text of a junction (sorted keys, repr floats)."""
    return json.dumps(spec.to_dict(), sort_keys=True, indent=2)


def _boundary_arclength(side: str, t: float, a: float, b: float) -> float:
    # Counter-clockwise walk: bottom (0,0)->(a,0), right (a,0)->(a,b),
    # top (a,b)->(0,b), left (0,b)->(0,0).
    if side == "bottom":
        return t
    if side == "right":
        return a + t
    if side == "top":
        return a + b + (a - t)
    return 2 * a + b + (b - t)


def build_junction(spec: JunctionSpec | Mapping[str, Any]) -> Junction:
    """Validate a junction description.

    Raises GeometryError for non-positive sizes, unknown sides, leads that
    leave their side, or overlapping leads.  Leads that merely touch (one
    ends where the next begins) are allowed.
    """
    if not isinstance(spec, JunctionSpec):
        spec = JunctionSpec.from_dict(spec)
    a, b = spec.well.a, spec.well.b
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise GeometryError(f"well sides must be positive, got a={a}, b={b}")
    if len(spec.leads) < 1:
        raise GeometryError("a junction needs at least one lead")
    per_side: dict[str, list[tuple[float, float, int]]] = {s: [] for s in SIDES}
    for idx, lead in enumerate(spec.leads):
        if lead.side not in SIDES:
            raise GeometryError(f"lead {idx}: unknown side {lead.side!r}")
        if not lead.width > 0:
            raise GeometryError(f"lead {idx}: width must be positive")
        length = a if lead.side in ("bottom", "top") else b
        if lead.width > length + _EDGE_TOL:
            raise GeometryError(f"lead {idx}: width {lead.width} exceeds side length {length}")
        if lead.offset < -_EDGE_TOL or lead.upper > length + _EDGE_TOL:
            raise GeometryError(f"lead {idx}: segment [{lead.offset}, {lead.upper}] leaves its side")
        per_side[lead.side].append((lead.offset, lead.upper, idx))
    for side, segs in per_side.items():
        segs.sort()
        for (lo0, hi0, i0), (lo1, hi1, i1) in zip(segs, segs[1:]):
            if lo1 < hi0 - _EDGE_TOL:
                raise GeometryError(f"leads {i0} and {i1} overlap on side {side}")
    arcs = []
    for lead in spec.leads:
        s0 = _boundary_arclength(lead.side, lead.offset, a, b)
        s1 = _boundary_arclength(lead.side, lead.upper, a, b)
        arcs.append((min(s0, s1), max(s0, s1)))
    return Junction(spec=spec, arclength=tuple(arcs))


def load_junction(text: str) -> Junction:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"junction config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError("junction config must be a JSON object")
    return build_junction(data)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSet:
    """Transverse channels of every lead, truncated at ``l_max`` modes.

    ``thresholds[m, l-1]`` is the threshold of mode ``l`` on lead ``m``.
    """

    thresholds: np.ndarray
    widths: tuple[float, ...]
    l_max: int

    @property
    def n_leads(self) -> int:
        return self.thresholds.shape[0]

    @property
    def size(self) -> int:
        return self.thresholds.size

    def index(self, lead: int, mode: int) -> int:
        return lead * self.l_max + (mode - 1)

    def flat_thresholds(self) -> np.ndarray:
        return self.thresholds.reshape(-1)

    def first_band(self) -> tuple[float, float]:
        """Energies where every lead has exactly one open channel."""
        return float(self.thresholds[:, 0].max()), float(self.thresholds[:, 1].min())

    def open_mask(self, lam: float) -> np.ndarray:
        return self.flat_thresholds() < lam

    def open_index(self, lam: float | None = None) -> np.ndarray:
        """Indices of open channels.  Without an energy, the first-band split."""
        if lam is None:
            return np.array([self.index(m, 1) for m in range(self.n_leads)])
        return np.flatnonzero(self.open_mask(lam))

    def closed_index(self, lam: float | None = None) -> np.ndarray:
        if lam is None:
            keep = np.ones(self.size, dtype=bool)
            keep[self.open_index()] = False
            return np.flatnonzero(keep)
        return np.flatnonzero(~self.open_mask(lam))

    def in_first_band(self, lam: float) -> bool:
        lo, hi = self.first_band()
        return lo < lam < hi


def thresholds(junction: Junction, l_max: int) -> ChannelSet:
    """Channel thresholds ``pi^2 l^2 / w_m^2 + V_lead`` for l = 1..l_max."""
    if l_max < 2:
        raise GeometryError("l_max must be at least 2 (one open plus one closed mode)")
    widths = tuple(lead.width for lead in junction.leads)
    modes = np.arange(1, l_max + 1, dtype=float)
    table = np.array([(np.pi * modes / w) ** 2 + junction.V_lead for w in widths])
    return ChannelSet(thresholds=table, widths=widths, l_max=l_max)


def _check_branch(channels: ChannelSet, lam: float, tol: float, index: np.ndarray) -> None:
    gaps = np.abs(channels.flat_thresholds()[index] - lam)
    hit = np.flatnonzero(gaps <= tol * max(1.0, abs(lam)))
    if hit.size:
        m, l = divmod(int(index[hit[0]]), channels.l_max)
        raise ThresholdError(f"lambda={lam} sits on the threshold of lead {m}, mode {l + 1}")


def _is_off_axis(lam: complex) -> bool:
    return bool(np.iscomplexobj(lam) and np.imag(lam) != 0.0)


def k_plus(channels: ChannelSet, lam: complex, tol: float = 1e-14) -> np.ndarray:
    """Diagonal exponent ``sqrt(lam - lambda_1)`` on the open channels.

    Off the real axis the principal root is used, which continues the
    physical sheet into the upper half-plane.
    """
    _check_branch(channels, lam, tol, channels.open_index())
    thr = channels.flat_thresholds()[channels.open_index()]
    if _is_off_axis(lam):
        return np.diag(np.sqrt(lam - thr + 0j))
    if np.any(thr >= lam):
        raise ThresholdError(f"lambda={lam} is below the first threshold of some lead")
    return np.diag(np.sqrt(lam - thr))


def k_minus(channels: ChannelSet, lam: complex, tol: float = 1e-14) -> np.ndarray:
    """Diagonal exponent ``sqrt(lambda_l - lam)`` on the closed channels."""
    _check_branch(channels, lam, tol, channels.closed_index())
    thr = channels.flat_thresholds()[channels.closed_index()]
    if _is_off_axis(lam):
        return np.diag(np.sqrt(thr - lam + 0j))
    if np.any(thr <= lam):
        raise ThresholdError(f"lambda={lam} is above the second threshold of some lead")
    return np.diag(np.sqrt(thr - lam))


def wave_number(channels: ChannelSet, lam: float) -> float:
    """Open-channel wave number ``p`` when all leads share one threshold."""
    thr = channels.thresholds[:, 0]
    if np.ptp(thr) > 1e-12:
        raise GeometryError("leads have different widths; use k_plus for per-channel wave numbers")
    return math.sqrt(lam - thr[0])


# ---------------------------------------------------------------------------
# Essential interval
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EssentialInterval:
    """Fermi level ``Lambda`` with a symmetric thermal window inside ``delta``.

    The thermal window is ``[Lambda - half_width, Lambda + half_width]``.
    """

    Lambda: float
    half_width: float
    delta: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = self.delta
        if not lo < hi:
            raise GeometryError(f"auxiliary interval {self.delta} is empty")
        if self.half_width < 0:
            raise GeometryError("thermal half-width must be non-negative")
        if not (lo <= self.Lambda - self.half_width and self.Lambda + self.half_width <= hi):
            raise GeometryError("thermal window must lie inside the auxiliary interval")

    @property
    def window(self) -> tuple[float, float]:
        return (self.Lambda - self.half_width, self.Lambda + self.half_width)

    def check_band(self, channels: ChannelSet) -> None:
        lo, hi = channels.first_band()
        if not (lo < self.delta[0] and self.delta[1] < hi):
            raise GeometryError(f"auxiliary interval {self.delta} is not inside the first band ({lo}, {hi})")


def thermal_half_width(temperature: float, effective_mass: float = 1.0, hbar: float = 1.0, k_B: float = 1.0) -> float:
    """Half-width ``2 m* k_B T / hbar^2`` of the thermal window in scaled units."""
    return 2.0 * effective_mass * k_B * temperature / hbar**2


def parse_interval(text: str) -> tuple[float, float]:
    """Parse ``LO:HI`` into a float pair."""
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = float(lo_s), float(hi_s)
    except ValueError as exc:
        raise SchemaError(f"interval must look like LO:HI, got {text!r}") from exc
    if not lo < hi:
        raise SchemaError(f"interval {text!r} is empty")
    return lo, hi


def lead_segments(junction: Junction) -> Iterable[tuple[int, Lead, float, float]]:
    """Yield ``(index, lead, side_length, depth)`` for every lead."""
    for idx, lead in enumerate(junction.leads):
        yield idx, lead, junction.side_length(lead.side), junction.side_depth(lead.side)
