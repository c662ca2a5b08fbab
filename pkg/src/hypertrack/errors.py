"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HypertrackError(Exception):
    """Base class for every error raised by the package."""


class HyperbolicityLoss(HypertrackError):
    """Two eigenvalues are closer than the configured gap tolerance."""


class NonReal(HypertrackError):
    """The Jacobian has complex eigenvalues."""


class DegenerateProjection(HypertrackError):
    """The covector l-hat is (nearly) orthogonal to a right eigenvector."""


class UnknownSystem(HypertrackError):
    pass


class OutOfBall(HypertrackError):
    """A state lies outside the validity ball of the system."""


class StencilExitsBall(OutOfBall):
    pass


class NewtonDivergence(HypertrackError):
    def __init__(self, message: str, m: float | None = None):
        super().__init__(message)
        self.m = m


class BranchJump(HypertrackError):
    pass


class HullDegeneracy(HypertrackError):
    pass


class NotOnHugoniot(HypertrackError):
    pass


class SpeedsDiffer(HypertrackError):
    pass


class ZeroStrength(HypertrackError):
    pass


class ChainMismatch(HypertrackError):
    pass


class CaseMismatch(HypertrackError):
    pass


class TVBudgetExceeded(HypertrackError):
    pass


class NonBinaryCollision(HypertrackError):
    pass


class PerturbationBudgetExceeded(HypertrackError):
    pass


class EventCapExceeded(HypertrackError):
    pass


class NotConservative(HypertrackError):
    pass


class InteractionTime(HypertrackError):
    pass


class OutOfTimeRange(HypertrackError):
    pass


class CFLViolation(HypertrackError):
    pass


class ParseError(HypertrackError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(HypertrackError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class InvariantViolation(HypertrackError):
    """A run-time consistency check failed while ``check`` was enabled."""
