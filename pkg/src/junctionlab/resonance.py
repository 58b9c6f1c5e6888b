"""Single-lead few-pole model in the wave-number variable.

    S(p) = (ip - k - beta^2 F(p)) / (ip + k + beta^2 F(p)),
    F(p) = sum_s c_s / (p^2 - k_s^2),   c_s = (1 + alpha_s^4) q_s,

with ``alpha_s^2 = k_s^2 + threshold`` kept in the weight.  The zeros of the
denominator ``D(p) = ip + k + beta^2 F(p)`` are the resonances: one pair
near ``+-k_s`` for each pole and one root on the imaginary axis near
``ik``.  ``D(p) prod(p^2 - k_s^2)`` has degree ``2N + 1`` and leading
coefficient ``i``, so

    D(p) / (-conj D(conj p)) = prod_s (p - p_s) / (p - conj p_s),

which is the scattering matrix of the Ansatz ``exp(-ipx) + S exp(ipx)``;
the printed fraction is its reciprocal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ContinuationError, InputError, PoleError

ROOT_TOL = 1e-12


@dataclass(frozen=True)
class ScalarModel:
    k_poles: np.ndarray            # k_s > 0, distinct
    beta: float
    k: float = 0.0
    q: np.ndarray | None = None    # defaults to 1/N each
    threshold: float = 0.0         # pi^2/delta^2 + V, so alpha_s^2 = k_s^2 + threshold

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.k_poles, dtype=float))
        if kp.size == 0 or np.any(kp <= 0.0):
            raise InputError("pole wave numbers must be positive")
        if np.min(np.diff(np.sort(kp)), initial=np.inf) <= 1e-12 * kp.max():
            raise InputError("pole wave numbers must be distinct")
        q = np.full(kp.size, 1.0 / kp.size) if self.q is None else np.atleast_1d(np.asarray(self.q, dtype=float))
        if q.shape != kp.shape or np.any(q < 0.0) or np.any(q > 1.0) or q.sum() > 1.0 + 1e-12:
            raise InputError("weights q_s must lie in [0, 1] and sum to at most 1")
        if self.beta < 0.0 or self.k < 0.0:
            raise InputError("coupling and regular constant must be non-negative")
        object.__setattr__(self, "k_poles", kp)
        object.__setattr__(self, "q", q)

    @property
    def n_poles(self) -> int:
        return self.k_poles.size

    @property
    def weights(self) -> np.ndarray:
        """``c_s = (1 + alpha_s^4) q_s``."""
        alpha_sq = self.k_poles**2 + self.threshold
        return (1.0 + alpha_sq**2) * self.q

    def with_beta(self, beta: float) -> "ScalarModel":
        return ScalarModel(self.k_poles, beta, self.k, self.q, self.threshold)

    def gaps(self, p: complex) -> np.ndarray:
        """``p^2 - k_s^2`` in factored form, accurate next to a pole."""
        return (p - self.k_poles) * (p + self.k_poles)

    def krein_sum(self, p: complex, skip: int | None = None) -> complex:
        c = self.weights
        gaps = self.gaps(p)
        terms = [c[s] / gaps[s] for s in range(self.n_poles) if s != skip]
        return complex(sum(terms)) if terms else 0j

    def denominator(self, p: complex) -> complex:
        """``D(p) = ip + k + beta^2 F(p)``."""
        return 1j * p + self.k + self.beta**2 * self.krein_sum(p)

    def denominator_derivative(self, p: complex) -> complex:
        c = self.weights
        gaps = self.gaps(p)
        return 1j - self.beta**2 * complex(np.sum(2.0 * p * c / gaps**2))

    def to_dict(self) -> dict:
        return {"k_poles": self.k_poles.tolist(), "beta": self.beta, "k": self.k,
                "q": self.q.tolist(), "threshold": self.threshold}


def scalar_smatrix(model: ScalarModel, p: complex, convention: str = "matching") -> complex:
    """The scalar scattering matrix.

    ``convention='matching'`` is the printed fraction; ``'ansatz'`` is its
    reciprocal, the coefficient of ``exp(ipx)`` in ``exp(-ipx) + S exp(ipx)``.
    """
    if model.beta != 0.0:
        hit = np.abs(model.gaps(p)) <= 1e-14 * max(1.0, abs(p) ** 2)
        hit &= model.q > 0.0
        if hit.any():
            s = int(np.flatnonzero(hit)[0])
            raise PoleError(f"p={p!r} is a pole of the Krein sum", pole=float(model.k_poles[s]), index=s)
    if model.beta == 0.0 and model.k == 0.0:
        return 1.0 + 0j  # identically one, including the removable point p = 0
    tail = model.k + model.beta**2 * model.krein_sum(p)
    num, den = 1j * p - tail, 1j * p + tail
    if convention == "matching":
        return complex(num / den)
    if convention == "ansatz":
        return complex(den / num)
    raise ValueError(f"unknown convention {convention!r}")


# ---------------------------------------------------------------------------
# Resonance solving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Resonance:
    label: int          # +s / -s for the pair born at +-k_s, 0 for the imaginary-axis root
    value: complex
    residual: float
    method: str


@dataclass(frozen=True)
class ResonanceSet:
    model: ScalarModel
    items: tuple[Resonance, ...] = field(default_factory=tuple)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.items])

    def by_label(self, label: int) -> complex:
        for r in self.items:
            if r.label == label:
                return r.value
        raise KeyError(label)

    def symmetry_defect(self) -> float:
        """``max_s |k_{-s} + conj(k_s)|``."""
        out = 0.0
        for s in range(1, self.model.n_poles + 1):
            out = max(out, abs(self.by_label(-s) + np.conj(self.by_label(s))))
        return out

    def max_residual(self) -> float:
        return max(r.residual for r in self.items)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "resonances": [
                {"label": r.label, "re": r.value.real, "im": r.value.imag, "residual": r.residual, "method": r.method}
                for r in self.items
            ],
            "symmetry_defect": self.symmetry_defect(),
        }


class _Dispersion:
    """``p = sign k_s - beta^2 c_s / ((p + sign k_s) G_s(p))``, the rearranged ``D(p) = 0``.

    ``G_s`` is ``D`` without the ``s``-th pole term; unlike ``D`` the map is
    regular at its own seed ``sign k_s``.
    """

    def __init__(self, model: ScalarModel, s: int, sign: int):
        self.model, self.s = model, s
        self.ks = sign * model.k_poles[s]
        self.c = model.weights[s]
        self.b2 = model.beta**2

    def rest(self, p: complex) -> complex:
        return 1j * p + self.model.k + self.b2 * self.model.krein_sum(p, skip=self.s)

    def rest_derivative(self, p: complex) -> complex:
        m = self.model
        mask = np.arange(m.n_poles) != self.s
        return 1j - self.b2 * complex(np.sum(2.0 * p * m.weights[mask] / m.gaps(p)[mask] ** 2))

    def __call__(self, p: complex) -> complex:
        return self.ks - self.b2 * self.c / ((p + self.ks) * self.rest(p))

    def residual(self, p: complex) -> float:
        return abs(p - self(p)) / max(1.0, abs(p))

    def newton(self, p: complex, max_iter: int = 50) -> complex:
        for _ in range(max_iter):
            r = self.rest(p)
            denom = (p + self.ks) * r
            g_prime = self.b2 * self.c * (r + (p + self.ks) * self.rest_derivative(p)) / denom**2
            step = (p - self(p)) / (1.0 - g_prime)
            p = p - step
            if abs(step) <= 1e-16 * max(1.0, abs(p)):
                break
        return p


def _newton(model: ScalarModel, p: complex, max_iter: int = 50) -> complex:
    for _ in range(max_iter):
        step = model.denominator(p) / model.denominator_derivative(p)
        p = p - step
        if abs(step) <= 1e-16 * max(1.0, abs(p)):
            break
    return p


def _residual(model: ScalarModel, p: complex) -> float:
    """``|D(p)|`` relative to the size of its terms."""
    scale = abs(p) + model.k + model.beta**2 * float(np.sum(np.abs(model.weights / model.gaps(p))))
    return abs(model.denominator(p)) / max(scale, 1e-300)


def _iterate(g, seed: complex, max_iter: int = 500, tol: float = 1e-15) -> complex:
    p = seed
    prev_step = None
    for _ in range(max_iter):
        nxt = g(p)
        step = abs(nxt - p)
        if prev_step is not None and prev_step > 0.0 and step > prev_step and step > tol * max(1.0, abs(nxt)):
            raise ContinuationError("fixed-point map is not contracting")
        p, prev_step = nxt, step
        if step <= tol * max(1.0, abs(p)):
            return p
    raise ContinuationError("fixed-point iteration did not converge")


def _solve_pair_member(model: ScalarModel, s: int, sign: int, homotopy_steps: int = 10) -> Resonance:
    """Fixed point seeded at ``sign k_s``, Newton polish; continuation in beta on failure."""
    seed = complex(sign * model.k_poles[s])
    label = sign * (s + 1)
    if model.beta == 0.0:
        return Resonance(label, seed, 0.0, "exact")
    disp = _Dispersion(model, s, sign)
    try:
        p = disp.newton(_iterate(disp, seed))
        method = "fixed_point"
    except ContinuationError:
        method = "homotopy"
        betas = model.beta * np.geomspace(0.1, 1.0, homotopy_steps)
        try:
            first = _Dispersion(model.with_beta(float(betas[0])), s, sign)
            p = first.newton(_iterate(first, seed))
        except ContinuationError as exc:
            raise ContinuationError(f"no contraction near {seed.real:g} even at beta/10; "
                                    "try a smaller coupling") from exc
        for beta in betas[1:]:
            stage = _Dispersion(model.with_beta(float(beta)), s, sign)
            p = stage.newton(p)
            if not np.isfinite(p) or stage.residual(p) > 1e-10:
                raise ContinuationError(f"continuation in beta lost the resonance born at {seed.real:g}")
    res = disp.residual(p)
    if not np.isfinite(p) or res > ROOT_TOL:
        raise ContinuationError(f"resonance residual {res:.3e} above tolerance")
    return Resonance(label, complex(p), res, method)


def _axis_root(model: ScalarModel) -> Resonance:
    """Root ``p = iy`` of ``-y + k - beta^2 sum c_s / (y^2 + k_s^2) = 0``."""
    c, kp, b2 = model.weights, model.k_poles, model.beta**2

    def f(y: float) -> float:
        return -y + model.k - b2 * float(np.sum(c / (y * y + kp**2)))

    # f is positive far below the root and negative far above it; widen until it brackets.
    hi = model.k + 1.0
    lo = model.k - 1.0 - b2 * float(np.sum(c / kp**2))
    while f(lo) <= 0.0:
        lo = 2.0 * lo - 1.0
    while f(hi) >= 0.0:
        hi = 2.0 * hi + 1.0
    y = brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    p = _newton(model, 1j * y)
    p = 1j * p.imag
    return Resonance(0, complex(p), _residual(model, p), "axis")


def solve_resonances(model: ScalarModel) -> ResonanceSet:
    """All ``2N + 1`` zeros of the denominator, labelled by their birth point."""
    items = [_axis_root(model)]
    for s in range(model.n_poles):
        for sign in (1, -1):
            items.append(_solve_pair_member(model, s, sign))
    values = np.array([r.value for r in items])
    gaps = np.abs(values[:, None] - values[None, :]) + np.eye(len(values))
    if gaps.min() < 1e-8:
        raise ContinuationError("two resonances collided; simple zeros are required")
    items.sort(key=lambda r: (abs(r.label), -r.label))
    return ResonanceSet(model, tuple(items))


def blaschke_product(resonances: ResonanceSet | np.ndarray, p: complex) -> complex:
    """``prod_s (p - k_s) / (p - conj k_s)``."""
    vals = resonances.values if isinstance(resonances, ResonanceSet) else np.asarray(resonances)
    return complex(np.prod((p - vals) / (p - np.conj(vals))))


def factor_split(resonances: ResonanceSet, s0: int, p: complex) -> tuple[complex, complex]:
    """Resonant factor of the pair born at ``+-k_{s0}`` and the complementary factor.

    ``s0`` is the one-based pole label.
    """
    k0 = resonances.by_label(s0)
    resonant = (p - k0) * (p + np.conj(k0)) / ((p - np.conj(k0)) * (p + k0))
    rest = [r.value for r in resonances.items if abs(r.label) != s0]
    return complex(resonant), blaschke_product(np.array(rest), p)


def scaling_slope(model: ScalarModel, s: int = 1, betas=None) -> float:
    """Log-log slope of ``|k_s(beta) - k_s|`` against ``beta``."""
    betas = np.geomspace(1e-4, 1e-2, 9) if betas is None else np.asarray(betas)
    shifts = []
    for b in betas:
        rs = solve_resonances(model.with_beta(float(b)))
        shifts.append(abs(rs.by_label(s) - model.k_poles[s - 1]))
    return float(np.polyfit(np.log(betas), np.log(shifts), 1)[0])


def polynomial_roots(model: ScalarModel) -> np.ndarray:
    """Roots of ``D(p) prod(p^2 - k_s^2)`` via the companion matrix, for cross-checks."""
    poly = np.poly1d([1j, model.k])
    for ks in model.k_poles:
        poly = poly * np.poly1d([1.0, 0.0, -ks**2])
    for s, (c, ks) in enumerate(zip(model.weights, model.k_poles)):
        term = np.poly1d([model.beta**2 * c])
        for t, kt in enumerate(model.k_poles):
            if t != s:
                term = term * np.poly1d([1.0, 0.0, -kt**2])
        poly = poly + term
    return np.roots(poly.coeffs)


def default_model(n: int = 3, beta: float = 0.05, k: float = 0.5, seed: int = 3) -> ScalarModel:
    rng = np.random.default_rng(seed)
    poles = np.sort(0.5 + 2.0 * rng.random(n))
    return ScalarModel(poles, beta, k)


def model_from_dict(data: dict) -> ScalarModel:
    try:
        return ScalarModel(
            k_poles=np.asarray(data["k_poles"], dtype=float),
            beta=float(data["beta"]),
            k=float(data.get("k", 0.0)),
            q=None if data.get("q") is None else np.asarray(data["q"], dtype=float),
            threshold=float(data.get("threshold", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scalar model: {exc}") from exc


__all__ = [
    "ScalarModel", "Resonance", "ResonanceSet", "scalar_smatrix", "solve_resonances",
    "blaschke_product", "factor_split", "scaling_slope", "polynomial_roots", "default_model",
    "model_from_dict",
]
