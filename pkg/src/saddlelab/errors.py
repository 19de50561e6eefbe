"""Exception and warning types shared across the package."""

from __future__ import annotations


class SaddleLabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(SaddleLabError):
    """Malformed function spec string, config file, or CLI arguments."""


class NotCriticalError(SaddleLabError):
    """A point handed to a critical-point routine has a gradient that is
    too large for it to count as critical."""

    def __init__(self, grad_norm: float, tol: float):
        super().__init__(
            f"gradient norm {grad_norm:.6e} exceeds tolerance {tol:.6e}; "
            "the point is not critical"
        )
        self.grad_norm = float(grad_norm)
        self.tol = float(tol)


class CriticalPointReached(SaddleLabError):
    """The unit-speed descent field is requested (or an integration is
    started) where the gradient norm is at or below the stopping
    threshold, so the field is undefined there."""

    def __init__(self, point, grad_norm: float, t: float | None = None):
        msg = f"gradient norm {grad_norm:.3e} is at or below the stopping threshold"
        if t is not None:
            msg += f" at t={t:.6g}"
        super().__init__(msg)
        self.point = point
        self.grad_norm = float(grad_norm)
        self.t = t


class OutOfRangeError(SaddleLabError):
    """A query time or arc length lies outside the computed trajectory."""


class IntegrationError(SaddleLabError):
    """The adaptive stepper failed (step size underflow or non-finite state)."""


class InvalidCError(SaddleLabError):
    """The escape constant must be strictly greater than 4."""

    def __init__(self, C: float):
        super().__init__(f"escape constant C={C!r} must be > 4")
        self.C = C


class BoundViolation(SaddleLabError):
    """A measured occupancy exceeded the asserted escape-time bound.

    Carries the offending initial condition, the measured occupancy, and
    the full report so callers can serialize the evidence.
    """

    def __init__(self, message: str, ic=None, occupancy=None, report=None):
        super().__init__(message)
        self.ic = ic
        self.occupancy = occupancy
        self.report = report


class AssumptionViolation(SaddleLabError):
    """A precondition of the global convergence bound failed."""

    def __init__(self, assumption: str, detail: str):
        super().__init__(f"{assumption}: {detail}")
        self.assumption = assumption
        self.detail = detail


class NeverEntered(SaddleLabError):
    """The trajectory left the observation ball without triggering the
    contraction event being timed."""


class TangencyWarning(UserWarning):
    """The distance to a ball boundary has a grazing local minimum, so
    crossing detection fell back to sub-sampling."""
