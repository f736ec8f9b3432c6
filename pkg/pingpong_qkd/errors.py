"""
Error types for the ping-pong QKD toolkit

Library code raises these; the command-line front end maps each family to an
exit code (see ``EXIT_CODES``).
"""

from typing import Optional


class PingPongError(Exception):
    """Base class for every error raised by pingpong_qkd."""

    exit_code = 1


class ParameterDomainError(PingPongError, ValueError):
    """A parameter lies outside the domain where the model is defined."""

    exit_code = 2


class UsageError(PingPongError, ValueError):
    """An operation was called with inconsistent arguments."""

    exit_code = 2


class IntegrityError(PingPongError, KeyError):
    """A linear form references a noise source its registry never issued."""

    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "integrity error"


class EstimationError(PingPongError, RuntimeError):
    """Not enough disclosed data to estimate a statistic."""

    exit_code = 4

    def __init__(self, message: str, required: int, available: int):
        super().__init__(f"{message} (required {required}, available {available})")
        self.required = required
        self.available = available


class SolverError(PingPongError, RuntimeError):
    """A root or threshold search could not bracket a solution."""

    exit_code = 5

    def __init__(self, message: str, lower: Optional[float] = None, upper: Optional[float] = None):
        if lower is not None and upper is not None:
            message = f"{message} (endpoint values {lower:.6g} and {upper:.6g})"
        super().__init__(message)
        self.lower = lower
        self.upper = upper


EXIT_CODES = {
    "ok": 0,
    "domain": ParameterDomainError.exit_code,
    "io": 3,
    "estimation": EstimationError.exit_code,
    "solver": SolverError.exit_code,
}
