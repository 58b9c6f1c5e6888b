"""Compensated Krein formulas for the intermediate DN and ND maps.

Inside the auxiliary interval the raw aggregate

    M = DN_{++} - DN_{+-} (DN_{--} + K_-)^{-1} DN_{-+}

is a ratio of two quantities that both blow up at every eigenvalue of the
well.  Writing the polar part through the map ``T`` (eigenfunctions to
boundary currents) and the Woodbury identity removes those spurious poles:

    M = k + (J T^+) d^{-1} (T J^+),     d = lam - L + Q(lam),

with ``Q = T (K_--^delta + K_-)^{-1} T^+`` and ``J = P_+ - K_+-^delta (K_--^delta + K_-)^{-1} P_-``.
The only remaining poles are the zeros of ``det d``: the eigenvalues of the
intermediate Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .dnmap import RationalDN
from .errors import (
    DenominatorSingular,
    IntermediatePole,
    NeumannThinViolated,
    warn_degenerate_residue,
)
from .geometry import ChannelSet, k_minus

# Relative step for the central difference of Q.
DQ_STEP = 1e-5
# A zero of det d is "hit" when the smallest |eigenvalue| of d falls below this.
HIT_TOL = 1e-13
# Null-space threshold relative to ||d||.
NULL_TOL = 1e-8


def _solve_checked(mat: np.ndarray, rhs: np.ndarray, lam: complex, exc=DenominatorSingular) -> np.ndarray:
    try:
        lu = sla.lu_factor(mat, check_finite=True)
    except (ValueError, sla.LinAlgError) as err:
        raise exc(lam) from err
    if mat.size and np.linalg.cond(mat) > 1e14:
        raise exc(lam)
    return sla.lu_solve(lu, rhs)


@dataclass(frozen=True)
class IntermediateDN:
    """Evaluators of the compensated DN map on one auxiliary interval."""

    rdn: RationalDN

    @property
    def channels(self) -> ChannelSet:
        return self.rdn.channels

    @property
    def n_poles(self) -> int:
        return self.rdn.n_poles

    @property
    def delta(self) -> tuple[float, float]:
        return self.rdn.delta

    @property
    def L(self) -> np.ndarray:
        return np.diag(self.rdn.pole_values)

    def _pieces(self, lam: complex):
        op, cl = self.rdn.open_index(), self.rdn.closed_index()
        tail = self.rdn.k_delta(lam)
        denom = tail[np.ix_(cl, cl)] + k_minus(self.channels, lam)
        t_minus = self.rdn.pole_currents[:, cl].T        # closed-channel currents, (C-, N)
        t_plus = self.rdn.pole_currents[:, op].T         # open-channel currents, (C+, N)
        return tail, op, cl, denom, t_plus, t_minus

    def closed_denominator(self, lam: complex) -> np.ndarray:
        """``K_--^delta + K_-``."""
        return self._pieces(lam)[3]

    def potential_Q(self, lam: complex) -> np.ndarray:
        """``Q(lam) = T (K_--^delta + K_-)^{-1} T^+`` as an N x N matrix."""
        *_, denom, _, t_minus = self._pieces(lam)
        q = t_minus.T @ _solve_checked(denom, t_minus, lam)
        return 0.5 * (q + q.T) if not np.iscomplexobj(q) else q

    def dQ(self, lam: float, step: float = DQ_STEP) -> np.ndarray:
        """Central-difference derivative of ``Q``."""
        h = step * max(1.0, abs(lam))
        return (self.potential_Q(lam + h) - self.potential_Q(lam - h)) / (2.0 * h)

    def denominator(self, lam: complex) -> np.ndarray:
        """``d(lam) = lam I - L + Q(lam)``."""
        return lam * np.eye(self.n_poles) - self.L + self.potential_Q(lam)

    def regular_part(self, lam: complex) -> np.ndarray:
        """``k(lam) = K_++ - K_+- (K_-- + K_-)^{-1} K_-+``."""
        tail, op, cl, denom, *_ = self._pieces(lam)
        return tail[np.ix_(op, op)] - tail[np.ix_(op, cl)] @ _solve_checked(denom, tail[np.ix_(cl, op)], lam)

    def corrector(self, lam: complex) -> np.ndarray:
        """``J(lam) = P_+ - K_+- (K_-- + K_-)^{-1} P_-`` as a (C+, C) matrix."""
        tail, op, cl, denom, *_ = self._pieces(lam)
        out = np.zeros((len(op), self.channels.size), dtype=np.result_type(tail, denom))
        out[:, op] = np.eye(len(op))
        out[:, cl] = -tail[np.ix_(op, cl)] @ np.linalg.inv(denom)
        return out

    def residue_currents(self, lam: complex) -> np.ndarray:
        """``J T^+``: open-channel images of the interval's boundary currents, (C+, N)."""
        tail, op, cl, denom, t_plus, t_minus = self._pieces(lam)
        return t_plus - tail[np.ix_(op, cl)] @ _solve_checked(denom, t_minus, lam)

    def wronskian(self, lam: float) -> float:
        """Gram determinant of the columns of ``J T^+``."""
        jt = self.residue_currents(lam)
        return float(np.real(np.linalg.det(jt.conj().T @ jt)))

    def compensated_M(self, lam: complex) -> np.ndarray:
        """``k + (J T^+) d^{-1} (T J^+)``, finite at the well's eigenvalues."""
        if self.n_poles == 0:
            return self.regular_part(lam)
        d = self.denominator(lam)
        ev = np.linalg.eigvals(d)
        scale = max(1.0, np.linalg.norm(d, 2))
        if np.min(np.abs(ev)) < HIT_TOL * scale:
            raise IntermediatePole(lam)
        jt = self.residue_currents(lam)
        return self.regular_part(lam) + jt @ np.linalg.solve(d, jt.T)


def build_intermediate(rdn: RationalDN) -> IntermediateDN:
    return IntermediateDN(rdn)


# Thin functional aliases mirroring the operation names.
def potential_Q(rdn: RationalDN, channels: ChannelSet | None, lam: complex) -> np.ndarray:
    return IntermediateDN(rdn).potential_Q(lam)


def denominator_d(idn: IntermediateDN, lam: complex) -> np.ndarray:
    return idn.denominator(lam)


def compensated_M(idn: IntermediateDN, lam: complex) -> np.ndarray:
    return idn.compensated_M(lam)


# ---------------------------------------------------------------------------
# Intermediate eigenvalues
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntermediateEigenvalue:
    value: float
    null_space: np.ndarray        # (N, r) orthonormal columns
    weights: np.ndarray           # (r,) residue weights alpha_r
    weight_vectors: np.ndarray    # (N, r) eigenvectors of P [I + P Q' P]^{-1} P
    residue_vectors: np.ndarray   # (C+, r) J T^+ nu_r
    wronskian: float

    @property
    def multiplicity(self) -> int:
        return self.null_space.shape[1]

    def residue(self) -> np.ndarray:
        """Polar coefficient of ``compensated_M`` at this eigenvalue."""
        v = self.residue_vectors
        return (v * self.weights) @ v.conj().T

    def residue_rank(self, tol: float = 1e-10) -> int:
        sv = np.linalg.svd(self.residue(), compute_uv=False)
        return int(np.sum(sv > tol * max(sv[0], 1e-300))) if sv.size else 0

    def to_dict(self) -> dict:
        return {
            "lambda": self.value,
            "multiplicity": self.multiplicity,
            "residue_norms": [float(np.linalg.norm(self.residue_vectors[:, r]) * math.sqrt(self.weights[r]))
                              for r in range(self.multiplicity)],
            "wronskian": self.wronskian,
        }


def _sorted_branches(idn: IntermediateDN, lam: float) -> np.ndarray:
    return np.linalg.eigvalsh(idn.denominator(lam))


def intermediate_eigenvalues(idn: IntermediateDN, delta: tuple[float, float] | None = None,
                             n_grid: int = 1001, xtol: float = 1e-12) -> list[IntermediateEigenvalue]:
    """All zeros of ``det d`` in ``delta`` with null-spaces and residues.

    ``d`` is Hermitian with ``d' = I + Q' > 0``, so each sorted eigenvalue
    branch of ``d`` increases and crosses zero at most once.  Branches are
    bracketed on the grid and refined with Brent's method; coinciding
    crossings are merged into one multiple zero.
    """
    if idn.n_poles == 0:
        return []
    lo, hi = idn.delta if delta is None else delta
    grid = np.linspace(lo, hi, n_grid)
    branches = np.array([_sorted_branches(idn, x) for x in grid])
    roots: list[float] = []
    for i in range(idn.n_poles):
        col = branches[:, i]
        exact = np.flatnonzero(col == 0.0)
        if exact.size:
            roots.append(float(grid[exact[0]]))
            continue
        flips = np.flatnonzero(np.sign(col[:-1]) * np.sign(col[1:]) < 0)
        for j in flips:
            f = lambda x, i=i: _sorted_branches(idn, x)[i]
            roots.append(float(brentq(f, grid[j], grid[j + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) < 1e-9 * max(1.0, abs(r)):
            continue
        merged.append(r)
    return [_describe_zero(idn, r) for r in merged]


def _describe_zero(idn: IntermediateDN, lam: float) -> IntermediateEigenvalue:
    d = idn.denominator(lam)
    w, vecs = np.linalg.eigh(d)
    scale = max(1.0, np.linalg.norm(d, 2))
    null = vecs[:, np.abs(w) <= NULL_TOL * scale]
    if null.shape[1] == 0:
        null = vecs[:, [int(np.argmin(np.abs(w)))]]
    dq = idn.dQ(lam)
    inner = np.eye(null.shape[1]) + null.T @ dq @ null
    inv = np.linalg.inv(0.5 * (inner + inner.T))
    alphas, mix = np.linalg.eigh(inv)
    nu = null @ mix
    jt = idn.residue_currents(lam)
    wron = idn.wronskian(lam)
    gram_scale = float(np.prod(np.sum(jt**2, axis=0))) if jt.size else 0.0
    if gram_scale == 0.0 or abs(wron) < 1e-10 * gram_scale:
        warn_degenerate_residue(lam, wron)
    return IntermediateEigenvalue(
        value=lam,
        null_space=null,
        weights=alphas,
        weight_vectors=nu,
        residue_vectors=jt @ nu,
        wronskian=wron,
    )


def residue_by_limit(idn: IntermediateDN, lam_q: float, offsets=(1e-4, 1e-5, 1e-6, 1e-7)) -> np.ndarray:
    """Richardson-extrapolated limit of ``(lam - lam_q) M(lam)`` from both sides."""
    est = []
    for h in offsets:
        plus = h * idn.compensated_M(lam_q + h)
        minus = -h * idn.compensated_M(lam_q - h)
        est.append(0.5 * (plus + minus))
    # Symmetric averaging cancels the odd term; one Richardson step removes h^2.
    a, b = est[-2], est[-1]
    ratio = (offsets[-2] / offsets[-1]) ** 2
    return (ratio * b - a) / (ratio - 1.0)


# ---------------------------------------------------------------------------
# Compensated ND map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NDPoleData:
    """Poles of the ND map inside an interval and the traces ``psi_s|_Gamma``.

    ``tail`` evaluates the regular remainder ``K~(lam)`` over all channels.
    """

    values: np.ndarray             # (N~,)
    traces: np.ndarray             # (N~, C)
    tail: Callable[[complex], np.ndarray]

    def nd(self, lam: complex) -> np.ndarray:
        """Full ND matrix ``sum psi psi^T / (lam_s - lam) + K~``."""
        gap = self.values - lam
        if len(gap) and np.min(np.abs(gap)) < 1e-13 * max(1.0, abs(lam)):
            from .errors import PoleError

            k = int(np.argmin(np.abs(gap)))
            raise PoleError(f"lambda={lam} hits ND pole {self.values[k]}", pole=float(self.values[k]), index=k)
        return (self.traces.T / gap) @ self.traces + self.tail(lam)


def compensated_N(pole_data: NDPoleData, channels: ChannelSet, lam: complex) -> np.ndarray:
    """``N_reg + (J~ T~^+) [L - lam + V(lam)]^{-1} (T~ J~^+)``.

    With ``G = (I + K~_-- K_-)^{-1}``:

        N_reg = K~_++ - K~_+- K_- G K~_-+
        J~T~^+ = (P_+ - K~_+- K_- G P_-) T~^+
        V = T~ K_- G T~^+
    """
    op, cl = channels.open_index(), channels.closed_index()
    km = k_minus(channels, lam)
    kt = pole_data.tail(lam)
    inner = np.eye(len(cl)) + kt[np.ix_(cl, cl)] @ km
    try:
        g = _solve_checked(inner, np.eye(len(cl)), lam, exc=NeumannThinViolated)
    except NeumannThinViolated:
        raise
    kmg = km @ g
    n_reg = kt[np.ix_(op, op)] - kt[np.ix_(op, cl)] @ kmg @ kt[np.ix_(cl, op)]
    if len(pole_data.values) == 0:
        return n_reg
    tr_plus = pole_data.traces[:, op].T
    tr_minus = pole_data.traces[:, cl].T
    jt = tr_plus - kt[np.ix_(op, cl)] @ kmg @ tr_minus
    tj = tr_plus.T - tr_minus.T @ kmg @ kt[np.ix_(cl, op)]
    v = tr_minus.T @ kmg @ tr_minus
    big_l = np.diag(pole_data.values) - lam * np.eye(len(pole_data.values)) + v
    return n_reg + jt @ _solve_checked(big_l, tj, lam, exc=IntermediatePole)


def raw_N(pole_data: NDPoleData, channels: ChannelSet, lam: complex) -> np.ndarray:
    """Uncompensated ``ND_++ - ND_+- K_- (I + ND_-- K_-)^{-1} ND_-+``."""
    from .dnmap import aggregate_N_raw, frame_blocks

    blocks = frame_blocks(pole_data.nd(lam), channels.open_index(), channels.closed_index())
    return aggregate_N_raw(blocks, k_minus(channels, lam), lam)


def dual_nd_data(values: np.ndarray, currents: np.ndarray, const_tail: np.ndarray) -> NDPoleData:
    """Exact ND data of ``DN = sum j j^T/(lam - lam_s) + K`` with constant ``K``.

    ``ND = DN^{-1} = K^{-1} + B (Lambda - lam)^{-1} B^T`` where ``Lambda`` and
    ``U`` diagonalize ``L - A^T K^{-1} A`` and ``B = K^{-1} A U``.
    """
    kinv = np.linalg.inv(const_tail)
    a = currents.T
    shifted = np.diag(values) - a.T @ kinv @ a
    lam_n, u = np.linalg.eigh(0.5 * (shifted + shifted.T))
    b = kinv @ a @ u
    return NDPoleData(values=lam_n, traces=b.T.copy(), tail=lambda lam, k=kinv: k)
