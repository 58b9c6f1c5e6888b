"""Finite-dimensional symplectic extensions of a restricted Hermitian matrix.

The inner Hamiltonian ``A`` is restricted to ``D0 = (A - i)^{-1} N_i^perp``
where ``N_i`` is the generating deficiency subspace.  Elements of the
defect are written through their symplectic coordinates ``xi_+, xi_-`` in
``N_i``:

    u = A (A - i)^{-1} xi_+ - (A - i)^{-1} xi_-,
    A0^+ u = -(A - i)^{-1} xi_+ - A (A - i)^{-1} xi_-.

All vectors in ``N_i`` are stored as coordinates in an orthonormal basis
``F`` (shape ``(N, d)``), so ``P_+`` is the contraction ``F^*``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import subspace_angles
from scipy.optimize import brentq

from .errors import ExtensionEigenvalue, OverlapError, PoleError

OVERLAP_TOL = 1e-10
HERMITIAN_TOL = 1e-14


@dataclass(frozen=True)
class InnerHamiltonian:
    A: np.ndarray
    values: np.ndarray = field(init=False)   # alpha_r^2, ascending
    vectors: np.ndarray = field(init=False)  # nu_r as columns

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        scale = max(1.0, np.abs(A).max())
        if np.abs(A - A.conj().T).max() > HERMITIAN_TOL * scale * A.shape[0]:
            raise ValueError("A is not Hermitian")
        A = 0.5 * (A + A.conj().T)
        w, v = np.linalg.eigh(A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "values", w)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def from_spectrum(cls, values, vectors=None) -> "InnerHamiltonian":
        values = np.asarray(values, dtype=float)
        vecs = np.eye(len(values)) if vectors is None else np.asarray(vectors)
        return cls((vecs * values) @ vecs.conj().T)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def resolvent(self, lam: complex) -> np.ndarray:
        """``(A - lam)^{-1}`` through the eigen-decomposition."""
        gap = self.values - lam
        hit = np.abs(gap) <= 1e-13 * max(1.0, abs(lam))
        if hit.any():
            k = int(np.flatnonzero(hit)[0])
            raise PoleError(f"lambda={lam!r} is an eigenvalue of A", pole=float(self.values[k]), index=k)
        return (self.vectors / gap) @ self.vectors.conj().T

    def function(self, fn) -> np.ndarray:
        return (self.vectors * fn(self.values)) @ self.vectors.conj().T


@dataclass(frozen=True)
class DeficiencySetup:
    inner: InnerHamiltonian
    F: np.ndarray            # orthonormal basis of N_i, (N, d)
    F_dual: np.ndarray       # (A + i)(A - i)^{-1} F, orthonormal basis of N_{-i}
    W_plus: np.ndarray       # A (A - i)^{-1} F
    W_minus: np.ndarray      # -(A - i)^{-1} F
    min_angle_sine: float
    strict: bool = True

    @property
    def d(self) -> int:
        return self.F.shape[1]

    @property
    def overlapping(self) -> bool:
        return self.min_angle_sine < OVERLAP_TOL

    def element(self, xi_plus, xi_minus) -> np.ndarray:
        """The defect element with the given symplectic coordinates."""
        return self.W_plus @ np.asarray(xi_plus) + self.W_minus @ np.asarray(xi_minus)

    def adjoint_action(self, xi_plus, xi_minus) -> np.ndarray:
        """``A0^+`` applied to ``element(xi_plus, xi_minus)``."""
        return self.W_minus @ np.asarray(xi_plus) - self.W_plus @ np.asarray(xi_minus)


def make_setup(A, basis, strict: bool = True) -> DeficiencySetup:
    """Orthonormalize ``basis`` and certify ``N_i`` and ``N_{-i}`` do not overlap.

    With ``strict=False`` an overlap is recorded in ``min_angle_sine`` but
    not raised; the Weyl function and the model formulas stay meaningful,
    which is the one-dimensional case the construction also covers.
    """
    inner = A if isinstance(A, InnerHamiltonian) else InnerHamiltonian(np.asarray(A))
    basis = np.asarray(basis, dtype=complex)
    if basis.ndim == 1:
        basis = basis[:, None]
    N = inner.size
    if basis.shape[0] != N:
        raise ValueError(f"basis vectors must have length {N}")
    q, r = np.linalg.qr(basis)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise ValueError("deficiency basis is linearly dependent")
    d = q.shape[1]
    if 2 * d > N:
        warnings.warn(f"deficiency dimension {d} exceeds half of {N}; N_i and N_-i must overlap",
                      stacklevel=2)
    shift = inner.function(lambda x: 1.0 / (x - 1j))
    cayley = inner.function(lambda x: (x + 1j) / (x - 1j))
    dual = cayley @ q
    sines = np.sin(subspace_angles(q, dual))
    min_sine = float(sines.min()) if sines.size else 1.0
    if strict and min_sine < OVERLAP_TOL:
        raise OverlapError(f"N_i and N_-i overlap (smallest principal angle sine {min_sine:.3e})")
    return DeficiencySetup(
        inner=inner,
        F=q,
        F_dual=dual,
        W_plus=inner.A @ shift @ q,
        W_minus=-shift @ q,
        min_angle_sine=min_sine,
        strict=strict,
    )


def boundary_form(setup: DeficiencySetup, xi_plus_u, xi_minus_u, xi_plus_v, xi_minus_v) -> complex:
    """``<xi_+^u, xi_-^v> - <xi_-^u, xi_+^v>`` (linear in the first slot)."""
    return complex(np.vdot(xi_minus_v, xi_plus_u) - np.vdot(xi_plus_v, xi_minus_u))


def boundary_form_direct(setup: DeficiencySetup, xi_plus_u, xi_minus_u, xi_plus_v, xi_minus_v) -> complex:
    """``<A0^+ u, v> - <u, A0^+ v>`` evaluated on the defect elements themselves."""
    u = setup.element(xi_plus_u, xi_minus_u)
    v = setup.element(xi_plus_v, xi_minus_v)
    au = setup.adjoint_action(xi_plus_u, xi_minus_u)
    av = setup.adjoint_action(xi_plus_v, xi_minus_v)
    return complex(np.vdot(v, au) - np.vdot(av, u))


def weyl_function(setup: DeficiencySetup, lam: complex, form: str = "product") -> np.ndarray:
    """Abstract Weyl function on ``N_i``.

    ``form='product'``:  ``-P (I + lam A)(A - lam)^{-1} P``;
    ``form='split'``:    ``P A P - P (I + A^2)(A - lam)^{-1} P``.
    """
    inner, F = setup.inner, setup.F
    R = inner.resolvent(lam)
    if form == "product":
        core = -(np.eye(inner.size) + lam * inner.A) @ R
    elif form == "split":
        core = inner.A - (np.eye(inner.size) + inner.A @ inner.A) @ R
    else:
        raise ValueError(f"unknown form {form!r}")
    return F.conj().T @ core @ F


def krein_bracket(setup: DeficiencySetup, M_param: np.ndarray, lam: complex) -> np.ndarray:
    """``I + P (I + lam A)(A - lam)^{-1} P M = I - Weyl(lam) M``."""
    return np.eye(setup.d) - weyl_function(setup, lam) @ np.asarray(M_param)


def krein_resolvent_matrix(setup: DeficiencySetup, M_param, lam: complex) -> np.ndarray:
    """``(A_M - lam)^{-1}`` for the extension with ``xi_+ = M xi_-``.

    ``R0 - (A + i) R0 P M [I + P (I + lam A) R0 P M]^{-1} P (A - i) R0``
    with ``R0 = (A - lam)^{-1}``.
    """
    inner, F = setup.inner, setup.F
    M_param = np.atleast_2d(np.asarray(M_param, dtype=complex))
    R0 = inner.resolvent(lam)
    eye = np.eye(inner.size)
    bracket = krein_bracket(setup, M_param, lam)
    sv = np.linalg.svd(bracket, compute_uv=False)
    if sv[-1] <= 1e-13 * max(1.0, sv[0]):
        raise ExtensionEigenvalue(lam)
    left = (inner.A + 1j * eye) @ R0 @ F @ M_param
    right = F.conj().T @ (inner.A - 1j * eye) @ R0
    return R0 - left @ np.linalg.solve(bracket, right)


def krein_resolvent(setup: DeficiencySetup, M_param, lam: complex, f) -> np.ndarray:
    return krein_resolvent_matrix(setup, M_param, lam) @ np.asarray(f)


def boundary_coordinates(setup: DeficiencySetup, M_param, lam: complex, f) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic coordinates ``(xi_+, xi_-)`` of ``R(lam) f``."""
    inner, F = setup.inner, setup.F
    M_param = np.atleast_2d(np.asarray(M_param, dtype=complex))
    R0 = inner.resolvent(lam)
    rhs = -F.conj().T @ (inner.A - 1j * np.eye(inner.size)) @ R0 @ np.asarray(f)
    xi_minus = np.linalg.solve(krein_bracket(setup, M_param, lam), rhs)
    return M_param @ xi_minus, xi_minus


def direct_extension(setup: DeficiencySetup, M_param) -> np.ndarray:
    """Matrix of ``A_M`` built from its domain ``D0 + {xi_+ = M xi_-}``.

    ``D0`` is ``A`` on ``(A - i)^{-1} N_i^perp``; the Lagrangian part uses
    the formal adjoint.  Requires the two pieces to span the space.
    """
    inner, F = setup.inner, setup.F
    N = inner.size
    M_param = np.atleast_2d(np.asarray(M_param, dtype=complex))
    shift = inner.function(lambda x: 1.0 / (x - 1j))
    perp = np.linalg.svd(np.eye(N) - F @ F.conj().T)[0][:, : N - setup.d]
    dom0 = shift @ perp
    dom_m = setup.W_plus @ M_param + setup.W_minus
    img_m = setup.W_minus @ M_param - setup.W_plus
    domain = np.hstack([dom0, dom_m])
    image = np.hstack([inner.A @ dom0, img_m])
    sv = np.linalg.svd(domain, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise OverlapError("the Lagrangian plane meets the restricted domain")
    return image @ np.linalg.inv(domain)


def _secular(setup: DeficiencySetup, M_param, lam: float) -> float:
    """``det(I - Weyl M) * prod(alpha^2 - lam)``, a real polynomial in ``lam``."""
    vals = setup.inner.values
    scale = np.prod(1.0 + vals**2) ** 0.5
    gap = vals - lam
    if np.any(gap == 0.0):
        lam = np.nextafter(lam, np.inf)
        gap = vals - lam
    det = np.linalg.det(krein_bracket(setup, M_param, lam))
    return float(np.real(det * np.prod(gap))) / scale


def extension_eigenvalues(setup: DeficiencySetup, M_param, window: tuple[float, float] | None = None,
                          n_grid: int = 4001) -> list[float]:
    """Real poles of the Krein resolvent, by a sign scan of the secular polynomial.

    The default window covers every eigenvalue: it is widened by the norm
    of the directly assembled extension.
    """
    M_param = np.atleast_2d(np.asarray(M_param, dtype=complex))
    if window is None:
        bound = np.abs(setup.inner.values).max() + 1.0
        try:
            bound = max(bound, np.linalg.norm(direct_extension(setup, M_param), 2) + 1.0)
        except OverlapError:
            bound = bound + np.linalg.norm(M_param, 2) * (1.0 + bound**2)
        window = (-bound, bound)
    grid = np.linspace(window[0], window[1], n_grid)
    vals = np.array([_secular(setup, M_param, x) for x in grid])
    roots = [float(x) for x, v in zip(grid, vals) if v == 0.0]
    for j in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(brentq(lambda x: _secular(setup, M_param, x), grid[j], grid[j + 1],
                            xtol=1e-14, rtol=1e-15))
    return sorted(roots)


def resolvent_residue(setup: DeficiencySetup, M_param, pole: float, offsets=(1e-5, 1e-6)) -> np.ndarray:
    """``lim (pole - lam) R(lam)`` by symmetric complex offsets and one Richardson step."""
    est = []
    for h in offsets:
        pts = (pole + 1j * h, pole - 1j * h)
        est.append(0.5 * sum((pole - z) * krein_resolvent_matrix(setup, M_param, z) for z in pts))
    ratio = (offsets[0] / offsets[1]) ** 2
    return (ratio * est[1] - est[0]) / (ratio - 1.0)
