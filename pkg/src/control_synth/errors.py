"""Exception hierarchy for control-synth."""

from typing import Optional


class ControlSynthError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ControlSynthError, ValueError):
    """Invalid task specification or run configuration."""


class PolicySyntaxError(ControlSynthError, ValueError):
    """A policy program is outside the policy grammar."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


class PolicyRuntimeError(ControlSynthError):
    """A policy program failed while being interpreted."""

    category = "runtime_error"


class BudgetExceededError(PolicyRuntimeError):
    """The interpreter ran out of its per-call operation budget."""

    category = "budget_exceeded"


class NonFiniteError(PolicyRuntimeError):
    """An intermediate value was NaN, infinite or above the magnitude guard."""

    category = "nonfinite"


class CheckpointError(ControlSynthError, ValueError):
    """A checkpoint file could not be read back."""


class ProgramNotFoundError(ControlSynthError, KeyError):
    """No program with the requested id exists in the database."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "program not found"


class ExtractionFailure(ControlSynthError):
    """No policy function could be located in generator output."""


class GeneratorError(ControlSynthError):
    """The remote generator could not produce candidates."""


class TransportError(GeneratorError):
    """The completion endpoint was unreachable or kept failing."""

    def __init__(self, message: str, status: Optional[int] = None):
        self.status = status
        super().__init__(message if status is None else f"{message} (last status {status})")


class AuthenticationError(GeneratorError):
    """The completion endpoint rejected the credentials."""


class MalformedResponseError(GeneratorError):
    """The completion endpoint answered with an unexpected payload."""
