"""Exception hierarchy shared by every junctionlab module.

The CLI maps these onto exit codes: input problems (bad geometry, bad
files) exit with 2, numerical breakdowns exit with 4.
"""

from __future__ import annotations

import warnings


class JunctionLabError(Exception):
    """Base class for all errors raised by junctionlab."""

    exit_code = 4


class InputError(JunctionLabError):
    """Something the caller supplied is malformed or inconsistent."""

    exit_code = 2


class GeometryError(InputError):
    """Invalid well or lead placement."""


class SchemaError(InputError):
    """Eigen-data or configuration records do not match the expected layout."""


class SplitError(InputError):
    """An eigenvalue sits exactly on the edge of the auxiliary interval."""


class WindowError(InputError):
    """Energy lies outside the window where a limiting formula applies."""


class DegenerateSymmetry(InputError):
    """Symmetric-junction data with a vanishing middle-lead component."""


class EmptyModelError(InputError):
    """Gram factorization of a zero boundary map."""


class NumericalError(JunctionLabError):
    """A computation hit a singular or ill-posed point."""


class ThresholdError(NumericalError):
    """Energy coincides with a channel threshold (square-root branch point)."""


class PoleError(NumericalError):
    """Energy coincides with a pole of a rational operator function."""

    def __init__(self, message: str, pole: float | None = None, index: int | None = None):
        super().__init__(message)
        self.pole = pole
        self.index = index


class DenominatorSingular(NumericalError):
    """The closed-channel denominator DN_{--} + K_- is not invertible."""

    def __init__(self, lam: complex, condition: float = float("inf")):
        super().__init__(f"closed-channel denominator singular at lambda={lam!r} (cond={condition:.3e})")
        self.lam = lam
        self.condition = condition


class IntermediatePole(NumericalError):
    """Energy coincides with an eigenvalue of the intermediate operator."""

    def __init__(self, lam: complex):
        super().__init__(f"lambda={lam!r} is a zero of det d(lambda)")
        self.lam = lam


class NeumannThinViolated(NumericalError):
    """The ND-side bracket I + K~_{--} K_- is not invertible."""


class SMatrixSingular(NumericalError):
    """The Moebius bracket of a scattering-matrix formula is singular."""


class OverlapError(NumericalError):
    """Deficiency subspaces N_i and N_{-i} intersect."""


class ExtensionEigenvalue(NumericalError):
    """Energy is an eigenvalue of the self-adjoint extension."""

    def __init__(self, lam: complex):
        super().__init__(f"lambda={lam!r} is an eigenvalue of the extension")
        self.lam = lam


class ContinuationError(NumericalError):
    """Resonance iteration failed to contract, even with continuation."""


class DegenerateResidueWarning(UserWarning):
    """Residue subspace loses rank at an intermediate eigenvalue."""


def warn_degenerate_residue(lam: float, wronskian: float) -> None:
    warnings.warn(
        f"Wronskian {wronskian:.3e} vanishes at intermediate eigenvalue {lam:.12g}; residue rank may drop",
        DegenerateResidueWarning,
        stacklevel=3,
    )
