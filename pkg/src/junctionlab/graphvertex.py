"""Vertex conditions of the one-dimensional graph model.

A rank-one projection ``P`` on the open channels gives the constant vertex
scattering matrix of the Datta-Das Sarma type.  Scattering states on the
graph are ``Psi(x) = exp(ipx) nu + exp(-ipx) S nu``, so at the vertex

    Psi(0) = (I + S) nu,        Psi'(0) = ip (I - S) nu.

For ``S = P^perp - P`` this reads ``P Psi(0) = 0`` and ``P^perp Psi'(0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSymmetry
from .smatrix import SMatrix


@dataclass(frozen=True)
class DattaVertex:
    beta: float
    weight: np.ndarray  # unit vector spanning P_beta

    @property
    def P(self) -> np.ndarray:
        return np.outer(self.weight, self.weight.conj())

    @property
    def S(self) -> np.ndarray:
        """``S_beta = I - 2 P_beta``."""
        return np.eye(len(self.weight)) - 2.0 * self.P

    def conditions(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, B)`` with ``A psi(0) + B psi'(0) = 0`` as printed: ``P^perp psi = 0``, ``P psi' = 0``.

        These conditions produce ``2 P - I``, the negative of ``S``.
        """
        P = self.P
        return np.eye(len(self.weight)) - P, P


def datta_projection(beta: float, M: int = 3, weights: np.ndarray | None = None) -> DattaVertex:
    """Projection on ``(1, beta, 1) / sqrt(2 + beta^2)``.

    For ``M != 3`` a weight vector must be supplied; it is normalized and
    ``beta`` is kept only as a label.
    """
    if weights is None:
        if M != 3:
            raise ValueError("a weight vector is required when M != 3")
        vec = np.array([1.0, beta, 1.0])
    else:
        vec = np.asarray(weights, dtype=float)
        if vec.shape != (M,):
            raise ValueError(f"weight vector must have length {M}")
    nrm = np.linalg.norm(vec)
    if nrm == 0.0:
        raise ValueError("zero weight vector")
    return DattaVertex(beta=float(beta), weight=vec / nrm)


def fit_symmetric_beta(gamma: float) -> float:
    """``beta = -2 / gamma``: makes ``(1, beta, 1)`` orthogonal to ``(1, gamma, 1)`` and ``(1, 0, -1)``."""
    if gamma == 0.0:
        raise DegenerateSymmetry("gamma = 0: the symmetric current has no middle-lead component")
    return -2.0 / gamma


def symmetric_directions(gamma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(e_a, e_s, e_perp)`` of the symmetric three-lead junction."""
    e_a = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
    e_s = np.array([1.0, gamma, 1.0]) / math.sqrt(2.0 + gamma**2)
    beta = fit_symmetric_beta(gamma)
    e_perp = np.array([1.0, beta, 1.0]) / math.sqrt(2.0 + beta**2)
    return e_a, e_s, e_perp


def symmetric_model_smatrix(lam: float, alpha_a: float, alpha_s: float, lam_q: float, p: float,
                            gamma: float) -> SMatrix:
    """``S = P^perp + Theta`` with ``Theta`` diagonal on ``{e_a, e_s}``.

    ``Theta = [ip(lam - lam_q) P_Q - A][ip(lam - lam_q) P_Q + A]^{-1}`` on the
    range of ``P_Q``, with ``A = alpha_a^2 P_a + alpha_s^2 P_s``.
    """
    e_a, e_s, e_perp = symmetric_directions(gamma)
    x = lam - lam_q
    S = np.outer(e_perp, e_perp).astype(complex)
    for e, a in ((e_a, alpha_a), (e_s, alpha_s)):
        theta = (1j * p * x - a**2) / (1j * p * x + a**2)
        S = S + theta * np.outer(e, e)
    return SMatrix(lam=lam, S=S, provenance="jump_start", extras={"e_perp": e_perp})


def ansatz_boundary_values(S: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Vertex values and derivatives of every Ansatz column: ``(I + S, ip(I - S))``."""
    eye = np.eye(S.shape[0])
    return eye + S, 1j * p * (eye - S)


def vertex_bc_residual(S: SMatrix | np.ndarray, direction: np.ndarray, lam: float | None = None,
                       p: float = 1.0, kind: str = "resonance") -> float:
    """Residual of the exported vertex conditions on all Ansatz columns.

    ``kind='resonance'``: ``direction`` is the resonance current ``psi``;
    ``<psi, Psi(0)> = 0`` and ``Psi'(0)`` parallel to ``psi``.

    ``kind='complement'``: ``direction`` is ``e_perp``; ``<e_perp, Psi'(0)> = 0``
    and ``Psi(0)`` parallel to ``e_perp``.

    The residual is scaled by the Ansatz size, so it is O(1) for a generic S.
    """
    S = S.S if isinstance(S, SMatrix) else np.asarray(S)
    e = np.asarray(direction, dtype=complex)
    e = e / np.linalg.norm(e)
    proj = np.outer(e, e.conj())
    perp = np.eye(len(e)) - proj
    val, der = ansatz_boundary_values(S, p)
    if kind == "resonance":
        r_val, r_der = proj @ val, perp @ der
    elif kind == "complement":
        r_val, r_der = perp @ val, proj @ der
    else:
        raise ValueError(f"unknown condition kind {kind!r}")
    return float(max(np.abs(r_val).max() / 2.0, np.abs(r_der).max() / (2.0 * abs(p))))


def condition_matrices(direction: np.ndarray, kind: str = "resonance") -> tuple[np.ndarray, np.ndarray]:
    """``(A, B)`` with ``A Psi(0) + B Psi'(0) = 0`` for the exported conditions."""
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    proj = np.outer(e, e)
    perp = np.eye(len(e)) - proj
    return (proj, perp) if kind == "resonance" else (perp, proj)


def lagrangian_rank(A: np.ndarray, B: np.ndarray, tol: float = 1e-10) -> int:
    return int(np.linalg.matrix_rank(np.hstack([A, B]), tol=tol))


def symmetric_gamma(junction, lam: float = 10.0, pair=((1, 3), (3, 1))) -> float:
    """Signed ratio middle/side of the symmetric resonance current's open coefficients.

    The symmetric combination is ``(phi_pair0 + phi_pair1) / sqrt(2)`` on the
    resonance level; the middle lead is the second one.
    """
    from .spectral import EigenPair, channel_overlap

    total = np.zeros(junction.n_leads)
    for m, n in pair:
        ep = EigenPair(value=lam, m=m, n=n, a=junction.a, b=junction.b)
        total += np.array([channel_overlap(ep, lead, 1) for lead in junction.leads]) / math.sqrt(2.0)
    side = total[0]
    if abs(total[0] - total[2]) > 1e-12 * max(1.0, abs(side)):
        raise DegenerateSymmetry("the combination is not symmetric under the left-right reflection")
    if side == 0.0:
        raise DegenerateSymmetry("vanishing side-lead coefficient")
    return float(total[1] / side)
