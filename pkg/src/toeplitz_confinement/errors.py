"""Exception hierarchy shared by all pipeline stages.

Every error that a stage can raise per its contract is a distinct class so
callers (and the CLI) can react precisely; ``payload`` carries the offending
object rendered as canonical text where that helps debugging.
"""

from __future__ import annotations


class ConfinementError(Exception):
    """Base class for all domain errors raised by this package."""

    def __init__(self, message: str, payload: object = None):
        super().__init__(message)
        self.payload = payload


class DivisionByZero(ConfinementError, ZeroDivisionError):
    """Division by an exact zero (or a zero divisor in the eps ring)."""


class ZeroLeadingCoefficient(ConfinementError):
    """A series inversion/composition needs a nonzero leading coefficient."""


class NotReversible(ConfinementError):
    """Series reversion requires valuation 1 and an invertible linear term."""


class SingularJacobian(ConfinementError):
    """Degenerate constant-term map in formal implicit inversion."""


class WindowTooSmall(ConfinementError):
    """A computation provably depends on sites outside the lattice window."""


class MismatchReport(ConfinementError):
    """A structural cross-check failed; payload holds the first difference."""


class NonPolynomialResult(ConfinementError):
    """Exact division that the theory guarantees left a nonzero remainder."""


class SingularStep(ConfinementError):
    """Forward recursion step hit a vanishing v-product (a singularity)."""

    def __init__(self, message: str, site: int | None = None, payload: object = None):
        super().__init__(message, payload)
        self.site = site


class DegenerateParameters(ConfinementError):
    """A recorded genericity constraint is violated by a specialization."""


class NonlinearStep(ConfinementError):
    """A restriction-plan condition is not affine in its designated unknowns."""


class SingularLeadingCoefficient(ConfinementError):
    """The affine coefficient of a restriction step is identically zero."""


class NonzeroResidual(ConfinementError):
    """A differential-equation residual that must vanish does not."""


class ConfinementFailure(ConfinementError):
    """Forward iteration diverged from the confined series."""


class ConfigError(ConfinementError):
    """Invalid run configuration (CLI exit code 2)."""


class InternalInvariantError(ConfinementError):
    """A bug detector fired (CLI exit code 3)."""
