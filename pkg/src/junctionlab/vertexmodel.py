"""Solvable star-graph model fitted to the intermediate eigenvalues.

The inner space carries ``A = diag(lam_r)`` over the intermediate
eigenvalues on the interval.  The open-channel residue currents ``w_r``
(polar coefficient ``w_r w_r^*`` of the compensated DN map) are weighted
into the columns of ``Phi``,

    Phi[:, r] = w_r / sqrt(1 + lam_r^2),

and the Gram factorization ``Phi = beta01 P_Ni`` produces the boundary
operator.  With ``beta00 = k_M - beta01 P A P beta10`` the model's Krein
function reproduces ``k_M + sum_r w_r w_r^* / (lam - lam_r)`` exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyModelError, PoleError, SchemaError
from .extension import DeficiencySetup, InnerHamiltonian, make_setup, weyl_function
from .intermediate import IntermediateDN, IntermediateEigenvalue, intermediate_eigenvalues
from .smatrix import SMatrix, mobius

RANK_TOL = 1e-12


def residue_columns(eigen: Sequence[IntermediateEigenvalue]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten eigenvalues (with multiplicity) and their weighted residue currents."""
    values, cols = [], []
    for ev in eigen:
        for j in range(ev.multiplicity):
            values.append(ev.value)
            cols.append(ev.residue_vectors[:, j] * math.sqrt(ev.weights[j]))
    if not cols:
        return np.zeros(0), np.zeros((0, 0))
    return np.array(values), np.array(cols).T


def build_phi_map(values: np.ndarray, currents: np.ndarray) -> np.ndarray:
    """``Phi`` with columns ``w_r (1 + lam_r^2)^{-1/2}``; ``currents`` is ``(n, N)``."""
    values = np.asarray(values, dtype=float)
    return np.asarray(currents) / np.sqrt(1.0 + values**2)


@dataclass(frozen=True)
class GramFactor:
    beta01: np.ndarray      # (n, d)
    P_Ni: np.ndarray        # (d, N), orthonormal rows
    d: int
    residual: float         # ||Phi - beta01 P_Ni||


def gram_factorize(phi: np.ndarray, rank_tol: float = RANK_TOL) -> GramFactor:
    """Factor ``Phi = beta01 P_Ni`` through the range of the Gram matrix.

    ``Phi Phi^* = U D U^*`` gives ``beta01 = U_d D_d^{1/2}`` and
    ``P_Ni = D_d^{-1/2} U_d^* Phi``.  The singular value decomposition of
    ``Phi`` yields the same factors without squaring, which keeps the rank
    cut meaningful at the relative tolerance used here.
    """
    phi = np.atleast_2d(np.asarray(phi))
    if phi.size == 0:
        raise EmptyModelError("boundary map has no columns")
    U, sv, Vh = np.linalg.svd(phi, full_matrices=False)
    if sv[0] == 0.0:
        raise EmptyModelError("boundary map is zero")
    keep = sv > rank_tol * sv[0]
    d = int(keep.sum())
    U_d, s_d = U[:, keep], sv[keep]
    beta01 = U_d * s_d
    P_Ni = Vh[keep]
    return GramFactor(beta01, P_Ni, d, float(np.linalg.norm(phi - beta01 @ P_Ni, 2)))


@dataclass(frozen=True)
class VertexModel:
    lam_values: np.ndarray          # alpha_r^2 = intermediate eigenvalues
    currents: np.ndarray            # (n, N) residue currents w_r
    open_thresholds: np.ndarray     # (n,)
    k_M: np.ndarray                 # regular part frozen at Lambda
    Lambda: float
    setup: DeficiencySetup | None
    beta01: np.ndarray              # (n, d) in the orthonormal N_i basis
    beta00: np.ndarray
    gram_residual: float
    report: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.lam_values)

    @property
    def d(self) -> int:
        return self.beta01.shape[1]

    @property
    def n_open(self) -> int:
        return len(self.open_thresholds)

    def k_plus(self, lam: complex) -> np.ndarray:
        return np.diag(np.sqrt(lam - self.open_thresholds + 0j))

    def boundary_operator(self, lam: complex) -> np.ndarray:
        """``beta00 + beta01 Weyl(lam) beta10``."""
        if self.setup is None:
            return self.beta00.astype(complex)
        weyl = weyl_function(self.setup, lam, form="split")
        return self.beta00 + self.beta01 @ weyl @ self.beta01.conj().T

    def krein_function(self, lam: complex) -> np.ndarray:
        """``k_M + sum_r (1 + lam_r^2) beta01 Q_r beta10 / (lam - lam_r)``."""
        out = self.k_M.astype(complex)
        if self.setup is None:
            return out
        F = self.setup.F
        for r, a2 in enumerate(self.lam_values):
            col = self.beta01 @ F.conj().T[:, r]
            out = out + (1.0 + a2**2) * np.outer(col, col.conj()) / (lam - a2)
        return out

    def essential_dn(self, lam: complex) -> np.ndarray:
        """Few-pole essential DN map ``k_M + sum_r w_r w_r^* / (lam - lam_r)``."""
        hit = np.abs(self.lam_values - lam) <= 1e-13 * max(1.0, abs(lam))
        if hit.any():
            k = int(np.flatnonzero(hit)[0])
            raise PoleError(f"lambda={lam!r} is a model pole", pole=float(self.lam_values[k]), index=k)
        w = self.currents
        return self.k_M + (w / (lam - self.lam_values)) @ w.conj().T

    def to_dict(self) -> dict:
        return {
            "A_spectrum": self.lam_values.tolist(),
            "currents": _matrix_json(self.currents),
            "open_thresholds": self.open_thresholds.tolist(),
            "N": self.N,
            "d": self.d,
            "Lambda": self.Lambda,
            "beta01": _matrix_json(self.beta01),
            "beta00": _matrix_json(self.beta00),
            "k_M": _matrix_json(self.k_M),
            "gram_residual": self.gram_residual,
            "report": self.report,
        }


def _matrix_json(mat: np.ndarray) -> dict:
    mat = np.asarray(mat)
    return {"re": np.real(mat).tolist(), "im": np.imag(mat).tolist()}


def _matrix_from_json(data: dict, shape: tuple[int, int]) -> np.ndarray:
    re = np.asarray(data["re"], dtype=float).reshape(shape)
    im = np.asarray(data["im"], dtype=float).reshape(shape)
    return re if not im.any() else re + 1j * im


def model_from_dict(data: dict) -> VertexModel:
    """Rebuild a fitted model from ``VertexModel.to_dict`` output."""
    try:
        values = np.asarray(data["A_spectrum"], dtype=float)
        thr = np.asarray(data["open_thresholds"], dtype=float)
        n = len(thr)
        currents = _matrix_from_json(data["currents"], (n, len(values)))
        k_M = np.real(_matrix_from_json(data["k_M"], (n, n)))
        Lambda = float(data["Lambda"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed vertex model: {exc}") from exc
    return assemble_model(values, currents, thr, k_M, Lambda)


def fit_vertex_model(idn: IntermediateDN, eigen: Sequence[IntermediateEigenvalue] | None = None,
                     Lambda: float | None = None, strict: bool = False) -> VertexModel:
    """Fit the star-graph model to the intermediate data on the interval.

    ``k_M`` is the regular part ``k(Lambda)`` of the compensated DN map;
    ``Lambda`` defaults to the interval midpoint.  With ``strict=False`` a
    deficiency subspace that meets its Cayley image (always the case when
    ``d > N/2``) is accepted and the overlap reported.
    """
    eigen = intermediate_eigenvalues(idn) if eigen is None else list(eigen)
    lo, hi = idn.delta
    Lambda = 0.5 * (lo + hi) if Lambda is None else float(Lambda)
    k_M = np.real(idn.regular_part(Lambda))
    k_M = 0.5 * (k_M + k_M.T)
    op = idn.channels.open_index()
    thr = idn.channels.flat_thresholds()[op]
    values, currents = residue_columns(eigen)
    return assemble_model(values, currents, thr, k_M, Lambda, strict=strict)


def assemble_model(values: np.ndarray, currents: np.ndarray, open_thresholds: np.ndarray,
                   k_M: np.ndarray, Lambda: float, strict: bool = False) -> VertexModel:
    values = np.asarray(values, dtype=float)
    n = len(open_thresholds)
    if values.size == 0:
        return VertexModel(values, np.zeros((n, 0)), np.asarray(open_thresholds), np.asarray(k_M), Lambda,
                           None, np.zeros((n, 0)), np.asarray(k_M, dtype=complex), 0.0,
                           {"empty": True})
    currents = np.asarray(currents)
    phi = build_phi_map(values, currents)
    gram = gram_factorize(phi)
    inner = InnerHamiltonian.from_spectrum(values)
    with warnings.catch_warnings():
        if not strict:
            warnings.simplefilter("ignore", UserWarning)
        setup = make_setup(inner, gram.P_Ni.conj().T, strict=strict)
    beta01 = phi @ setup.F
    PAP = setup.F.conj().T @ inner.A @ setup.F
    beta00 = k_M - beta01 @ PAP @ beta01.conj().T
    fit_res = max(
        float(np.linalg.norm(currents[:, r] - math.sqrt(1.0 + a2**2) * beta01 @ setup.F.conj().T[:, r]))
        for r, a2 in enumerate(values)
    )
    report = {
        "deficiency_overlap_sine": setup.min_angle_sine,
        "non_overlap_certified": not setup.overlapping,
        "fitting_identity_residual": fit_res,
        "k_M_is_frozen_at_Lambda": True,
    }
    return VertexModel(values, currents, np.asarray(open_thresholds, dtype=float), np.asarray(k_M), Lambda,
                       setup, beta01, beta00, gram.residual, report)


def model_smatrix(model: VertexModel, lam: float) -> SMatrix:
    """``[iK_+ + B(lam)]^{-1}[iK_+ - B(lam)]`` with the model's boundary operator."""
    ik = 1j * model.k_plus(lam)
    s, res = mobius(ik, model.boundary_operator(lam), lam)
    return SMatrix(lam=lam, S=s, provenance="model", residual=res)


def essential_smatrix(model: VertexModel, lam: float) -> SMatrix:
    ik = 1j * model.k_plus(lam)
    s, res = mobius(ik, model.essential_dn(lam), lam)
    return SMatrix(lam=lam, S=s, provenance="approx", residual=res)


def _fit_grid(model: VertexModel, window: tuple[float, float], n_grid: int) -> np.ndarray:
    grid = np.linspace(window[0], window[1], n_grid)
    if model.N:
        gaps = np.min(np.abs(grid[:, None] - model.lam_values[None, :]), axis=1)
        grid = grid[gaps > 1e-9]
    return grid


def verify_fit(model: VertexModel, window: tuple[float, float], n_grid: int = 401,
               idn: IntermediateDN | None = None, reference: VertexModel | None = None) -> dict:
    """Certify the fit on ``window``.

    ``smatrix_defect`` compares the model against ``S_Delta`` of
    ``reference`` (default: the model's own essential data).  With ``idn``
    the report also carries the defect of freezing ``k`` at ``Lambda``.
    """
    reference = model if reference is None else reference
    grid = _fit_grid(model, window, n_grid)
    s_def = krein_def = subst = 0.0
    for lam in grid:
        s_m = model_smatrix(model, lam).S
        s_d = essential_smatrix(reference, lam).S
        s_def = max(s_def, float(np.linalg.norm(s_m - s_d, 2)))
        krein_def = max(krein_def, float(np.abs(model.boundary_operator(lam) - reference.essential_dn(lam)).max()))
        if idn is not None:
            subst = max(subst, float(np.abs(reference.essential_dn(lam) - idn.compensated_M(lam)).max()))
    out = {
        "window": list(window),
        "n_points": int(len(grid)),
        "smatrix_defect": s_def,
        "krein_defect": krein_def,
        "gram_residual": model.gram_residual,
        "certified": bool(s_def < 1e-8),
    }
    if idn is not None:
        out["frozen_regular_part_defect"] = subst
    return out


def energy_dependent_bc(model: VertexModel, lam: complex) -> np.ndarray:
    """``B(lam)`` in ``U'|_Gamma = B(lam) U|_Gamma``: ``k_M + sum_r w_r w_r^* / (lam - lam_r)``."""
    return model.essential_dn(lam)


def bc_plugback_residual(model: VertexModel, lam: float) -> float:
    """``|| iK_+ (I - S) - B(lam) (I + S) ||`` for the model's own scattering matrix."""
    S = model_smatrix(model, lam).S
    eye = np.eye(model.n_open)
    ik = 1j * model.k_plus(lam)
    return float(np.abs(ik @ (eye - S) - energy_dependent_bc(model, lam) @ (eye + S)).max())
