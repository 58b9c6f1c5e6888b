"""Scattering matrices of the junction on the first band.

The open-channel Ansatz on every lead is ``exp(iK_+ x) e + exp(-iK_+ x) S e``
plus evanescent terms ``exp(-K_- x) s e``, with ``x`` the distance from the
well.  Matching its boundary data through the intermediate DN map gives

    S = [iK_+ + M]^{-1} [iK_+ - M].

Every Moebius-type solve is certified by the residual of the linear system
it came from; an ill-conditioned bracket raises ``SMatrixSingular`` rather
than returning a quietly wrong matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dnmap import Blocks, RationalDN, aggregate_M_raw, dn_blocks
from .errors import PoleError, SMatrixSingular, WindowError
from .geometry import ChannelSet, k_minus, k_plus
from .intermediate import IntermediateDN, IntermediateEigenvalue, intermediate_eigenvalues

CERTIFY_TOL = 1e-10

PROVENANCES = ("exact_M", "exact_N", "approx", "jump_start", "datta", "model", "example4")


@dataclass(frozen=True)
class SMatrix:
    lam: float
    S: np.ndarray
    provenance: str
    evanescent: np.ndarray | None = None
    residual: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return self.S.shape[0]

    def unitarity_defect(self) -> float:
        return float(np.linalg.norm(self.S.conj().T @ self.S - np.eye(self.size), 2))

    def reciprocity_defect(self) -> float:
        return float(np.abs(self.S - self.S.T).max())

    def transmissions(self) -> np.ndarray:
        return np.abs(self.S) ** 2


def mobius(ik: np.ndarray, m: np.ndarray, lam: float = float("nan"), tol: float = CERTIFY_TOL) -> tuple[np.ndarray, float]:
    """Solve ``(ik + m) S = (ik - m)`` and certify the residual."""
    left, right = ik + m, ik - m
    try:
        s = np.linalg.solve(left, right)
    except np.linalg.LinAlgError as err:
        raise SMatrixSingular(f"singular scattering bracket at lambda={lam}") from err
    scale = max(1.0, np.linalg.norm(left, 2), np.linalg.norm(right, 2))
    res = float(np.linalg.norm(left @ s - right, 2) / scale)
    if not np.isfinite(res) or res > tol:
        raise SMatrixSingular(f"scattering bracket ill-conditioned at lambda={lam} (residual {res:.2e})")
    return s, res


def smatrix_exact(M_eval: Callable[[float], np.ndarray], kplus: np.ndarray, lam: float,
                  N_eval: Callable[[float], np.ndarray] | None = None) -> SMatrix:
    """``S = [iK_+ + M]^{-1}[iK_+ - M]``; with ``N_eval`` also the ND form.

    The ND form is ``[N iK_+ + I]^{-1}[N iK_+ - I]``.  When both are given the
    maximal entrywise difference is stored under ``extras['agreement']``.
    """
    ik = 1j * np.asarray(kplus)
    m = M_eval(lam)
    s, res = mobius(ik, m, lam)
    extras = {}
    if N_eval is not None:
        n = N_eval(lam)
        eye = np.eye(ik.shape[0])
        s_n, _ = mobius(n @ ik, eye, lam)
        extras["S_N"] = s_n
        extras["agreement"] = float(np.abs(s - s_n).max())
    return SMatrix(lam=lam, S=s, provenance="exact_M", residual=res, extras=extras)


def smatrix_from_N(N_eval: Callable[[float], np.ndarray], kplus: np.ndarray, lam: float) -> SMatrix:
    """ND form on its own, ``S = [N iK_+ + I]^{-1}[N iK_+ - I]``."""
    ik = 1j * np.asarray(kplus)
    s, res = mobius(N_eval(lam) @ ik, np.eye(ik.shape[0]), lam)
    return SMatrix(lam=lam, S=s, provenance="exact_N", residual=res)


def evanescent_amplitudes(blocks: Blocks, kminus: np.ndarray, S: np.ndarray, e: np.ndarray | None = None) -> np.ndarray:
    """Closed-channel amplitudes from ``-K_- s = DN_-+ (I + S) + DN_-- s``.

    Returns the table ``s`` (closed channels x incoming open channels), or
    the single column for an incoming vector ``e``.
    """
    rhs = -blocks.mp @ (np.eye(S.shape[0]) + S)
    s = np.linalg.solve(blocks.mm + kminus, rhs)
    return s if e is None else s @ e


def matching_residual(blocks: Blocks, kplus: np.ndarray, kminus: np.ndarray, S: np.ndarray, s: np.ndarray) -> float:
    """Max residual of both matching lines for every incoming open channel."""
    eye = np.eye(S.shape[0])
    open_line = 1j * kplus @ (eye - S) - blocks.pp @ (eye + S) - blocks.pm @ s
    closed_line = -kminus @ s - blocks.mp @ (eye + S) - blocks.mm @ s
    scale = max(1.0, np.abs(blocks.pp).max(), np.abs(blocks.mm).max())
    return float(max(np.abs(open_line).max(), np.abs(closed_line).max()) / scale)


def smatrix_full(rdn: RationalDN, lam: float, compensated: IntermediateDN | None = None) -> SMatrix:
    """Exact pipeline: aggregate M (raw or compensated), S and evanescent table.

    With ``compensated`` the aggregate comes from the modified Krein formula,
    which stays finite at the well's eigenvalues; the evanescent table needs
    the raw DN blocks and is omitted when the energy sits on a pole.
    """
    channels = rdn.channels
    kp, km = k_plus(channels, lam), k_minus(channels, lam)
    try:
        blocks = dn_blocks(rdn, lam)
    except PoleError:
        if compensated is None:
            raise
        blocks = None
    if compensated is None:
        m_eval = lambda x: aggregate_M_raw(blocks, km, x)
    else:
        m_eval = compensated.compensated_M
    res = smatrix_exact(m_eval, kp, lam)
    if blocks is None:
        return res
    s = evanescent_amplitudes(blocks, km, res.S)
    return SMatrix(lam=lam, S=res.S, provenance="exact_M", evanescent=s,
                   residual=matching_residual(blocks, kp, km, res.S, s))


# ---------------------------------------------------------------------------
# Approximate S and the product correction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApproxResult:
    approx: SMatrix
    left: np.ndarray     # (I + [ip + M^delta]^{-1} K^delta)^{-1}
    right: np.ndarray    # I - [ip - M^delta]^{-1} K^delta
    polar: np.ndarray    # M^delta
    remainder: np.ndarray  # K^delta = M - M^delta

    def corrected(self) -> np.ndarray:
        return self.left @ self.approx.S @ self.right


def polar_part(eigen: Sequence[IntermediateEigenvalue], lam: complex) -> np.ndarray:
    """``sum_r w_r w_r^T / (lam - lam_r)`` over intermediate eigenvalues."""
    out = None
    for ev in eigen:
        term = ev.residue() / (lam - ev.value)
        out = term if out is None else out + term
    return out


def smatrix_approx(idn: IntermediateDN, lam: float,
                   eigen: Sequence[IntermediateEigenvalue] | None = None) -> ApproxResult:
    """``S_approx = [ip + M^delta]^{-1}[ip - M^delta]`` with its correction factors.

    ``M^delta`` is the polar part of the compensated DN map at the
    intermediate eigenvalues inside the interval, and ``K^delta = M - M^delta``.
    """
    eigen = intermediate_eigenvalues(idn) if eigen is None else eigen
    kp = k_plus(idn.channels, lam)
    ik = 1j * kp
    m_full = idn.compensated_M(lam)
    polar = polar_part(eigen, lam)
    if polar is None:
        polar = np.zeros_like(m_full)
    rem = m_full - polar
    s_app, res = mobius(ik, polar, lam)
    eye = np.eye(ik.shape[0])
    left = np.linalg.inv(eye + np.linalg.solve(ik + polar, rem))
    right = eye - np.linalg.solve(ik - polar, rem)
    return ApproxResult(SMatrix(lam, s_app, "approx", residual=res), left, right, polar, rem)


# ---------------------------------------------------------------------------
# Jump-start and Datta limit
# ---------------------------------------------------------------------------


def blaschke_theta(lam: float, lam1: float, alpha_sq: float, p: float, k: float = 0.0) -> complex:
    """``(ip(lam - lam1) - k(lam - lam1) - a^2) / (ip(lam - lam1) + k(lam - lam1) + a^2)``.

    Multiplying through by ``lam - lam1`` keeps the value exact at the
    eigenvalue itself, where it equals -1.
    """
    x = lam - lam1
    return (1j * p * x - k * x - alpha_sq) / (1j * p * x + k * x + alpha_sq)


@dataclass(frozen=True)
class JumpStart:
    lam1: float
    alpha_sq: float
    direction: np.ndarray  # unit vector spanning P_1
    k: float = 0.0

    @property
    def P1(self) -> np.ndarray:
        e = self.direction
        return np.outer(e, e.conj())

    def window_half_width(self, p: float) -> float:
        return self.alpha_sq / p


def jump_start(lam: float, lam1: float, alpha_sq: float, P1: np.ndarray, p: float, k: float = 0.0) -> SMatrix:
    """``S = P_1^perp + Theta(lam) P_1`` with the single Blaschke factor."""
    P1 = np.asarray(P1)
    theta = blaschke_theta(lam, lam1, alpha_sq, p, k)
    S = (np.eye(P1.shape[0]) - P1) + theta * P1
    return SMatrix(lam=lam, S=S, provenance="jump_start", extras={"theta": theta})


def jump_start_matrix(lam: float, kplus: np.ndarray, k_mat: np.ndarray, eigen: Sequence[IntermediateEigenvalue]) -> SMatrix:
    """``[iK_+ + k + sum alpha^2 P/(lam - lam_r)]^{-1}[iK_+ - ...]`` with matrix ``k``."""
    m = np.asarray(k_mat) + polar_part(eigen, lam)
    s, res = mobius(1j * np.asarray(kplus), m, lam)
    return SMatrix(lam=lam, S=s, provenance="jump_start", residual=res)


def jump_start_from_eigen(ev: IntermediateEigenvalue) -> JumpStart:
    """Rank-one jump-start data of a simple intermediate eigenvalue."""
    w = ev.residue_vectors[:, 0] * math.sqrt(ev.weights[0])
    a2 = float(np.vdot(w, w).real)
    return JumpStart(lam1=ev.value, alpha_sq=a2, direction=w / math.sqrt(a2))


def datta_limit(js: JumpStart, lam: float, p: float) -> SMatrix:
    """Constant ``S = P_1^perp - P_1`` valid inside ``|lam - lam1| < alpha^2 / p``."""
    if not abs(lam - js.lam1) < js.window_half_width(p):
        raise WindowError(
            f"lambda={lam} is outside the low-temperature window "
            f"|lambda - {js.lam1}| < {js.window_half_width(p)}"
        )
    P1 = js.P1
    S = np.eye(P1.shape[0]) - 2.0 * P1
    return SMatrix(lam=lam, S=S, provenance="datta")


def m_thin(lam: float, pole_values: np.ndarray, currents: np.ndarray, channels: ChannelSet,
           k_pp: np.ndarray) -> np.ndarray:
    """``K_++ + P_+ j (lam - L + <j_-, K_-^{-1} j_->)^{-1} j^T P_+``.

    For one pole this is ``K_++ + alpha_1^2 P_1^Q / (lam - lam_1^Q)`` with
    ``lam_1^Q = lam_1 - <j_-, K_-^{-1} j_->``.  Several poles give the matrix
    denominator of the same first-order approximation.
    """
    op, cl = channels.open_index(), channels.closed_index()
    cur = np.atleast_2d(currents)
    j_plus, j_minus = cur[:, op].T, cur[:, cl].T
    kinv = 1.0 / np.diag(k_minus(channels, lam))
    shift = j_minus.T @ (kinv[:, None] * j_minus)
    d = lam * np.eye(len(pole_values)) - np.diag(pole_values) + shift
    return np.asarray(k_pp) + j_plus @ np.linalg.solve(d, j_plus.T)


def thin_level(lam: float, pole_value: float, current: np.ndarray, channels: ChannelSet) -> tuple[float, float]:
    """``(lam_1^Q, alpha_1)`` of the thin approximation for one pole."""
    op, cl = channels.open_index(), channels.closed_index()
    kinv = 1.0 / np.diag(k_minus(channels, lam))
    shift = float(current[cl] @ (kinv * current[cl]))
    return pole_value - shift, float(np.linalg.norm(current[op]))


# ---------------------------------------------------------------------------
# The printed jump-start of the asymmetric T-junction
# ---------------------------------------------------------------------------


def example4_ingredients(lam: float) -> dict:
    """Vectors and projections entering the printed 3x3 jump-start."""
    from .presets import ALPHA, BETA, PRINTED_PSI12, PRINTED_PSI21, delta_q

    norm2 = ALPHA**2 + BETA**2
    u5 = np.array([BETA, ALPHA])
    u_shift = np.array([-ALPHA, BETA])
    return {
        "psi": np.vstack([PRINTED_PSI12, PRINTED_PSI21]),  # rows psi_12, psi_21
        "P5": np.outer(u5, u5) / norm2,
        "P_shift": np.outer(u_shift, u_shift) / norm2,
        "delta_q": delta_q(lam),
    }


def smatrix_example4(lam: float) -> SMatrix:
    """Printed jump-start ``[ipI + X]^{-1}[ipI - X]`` of the asymmetric junction.

    ``X = 4 E_3 / (lam - 8) + Psi^T [P_5/(lam - 5) + P_shift/(lam - 5 + dQ)] Psi``
    with ``E_3`` the projection on the third lead and ``Psi`` the stacked
    printed vectors.
    """
    if not 4.0 < lam < 16.0:
        raise WindowError(f"lambda={lam} outside the first band (4, 16)")
    ing = example4_ingredients(lam)
    psi = ing["psi"]
    inner = ing["P5"] / (lam - 5.0) + ing["P_shift"] / (lam - 5.0 + ing["delta_q"])
    x = psi.T @ inner @ psi
    x[2, 2] += 4.0 / (lam - 8.0)
    p = math.sqrt(lam - 4.0)
    s, res = mobius(1j * p * np.eye(3), x, lam)
    return SMatrix(lam=lam, S=s, provenance="example4", residual=res)
