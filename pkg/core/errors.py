"""
mmlat — Error hierarchy
-----------------------
Every failure the library raises derives from MmlatError so the CLI can map
configuration problems and runtime problems to distinct exit codes.
"""

from typing import Optional


class MmlatError(Exception):
    """Base class for all library errors."""


class ConfigurationError(MmlatError):
    """Invalid or inconsistent system / run configuration."""


class DomainError(MmlatError):
    """Argument outside the mathematical domain of an operation."""


class ContractViolation(MmlatError):
    """A caller broke an operation precondition (e.g. r > q)."""


class ParseError(MmlatError):
    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class SingularityError(MmlatError):
    """Gram matrix is rank deficient or too ill-conditioned to invert."""


class ConvergenceError(MmlatError):
    """Iterative solver hit its iteration cap."""


class UnichainError(MmlatError):
    """Policy induces more than one closed recurrent class."""


class DivergenceError(MmlatError):
    """Queue has no stationary latency (e.g. eps >= 0.5 under rule-of-double)."""


class InfeasibleError(MmlatError):
    """No admissible action / policy under the given constraints."""


class PowerInfeasibleError(InfeasibleError):
    """A (rate, eps) pair is unreachable at any transmit power."""


class ReliabilityInfeasibleError(InfeasibleError):
    """Required target error rate exceeds eps_max."""
