"""Exception types shared across the package.

Exit-code mapping used by the command line front end:
ConfigurationError -> 2, I/O (OSError) -> 3, NumericalError -> 4.
"""


class ConfigurationError(ValueError):
    """Invalid configuration, shapes, or missing inputs."""


class UsageError(RuntimeError):
    """An operation was called in a state that does not permit it."""


class OffRouteError(RuntimeError):
    """A state lies outside the lateral corridor of a reference path."""


class NumericalError(ArithmeticError):
    """A numerical failure (non-finite values where finite ones are required)."""


class NonFiniteGradientError(NumericalError):
    """An optimizer step was rejected because a gradient is not finite."""

    def __init__(self, parameter_name: str):
        super().__init__(f"non-finite gradient for parameter '{parameter_name}'")
        self.parameter_name = parameter_name
