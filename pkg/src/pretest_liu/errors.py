"""Exception hierarchy shared by all modules."""


class PretestLiuError(Exception):
    """Base class for package errors."""


class InputError(PretestLiuError, ValueError):
    """Malformed user input (files, shapes, configuration)."""


class ShapeError(InputError):
    pass


class IngestionError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class NumericalError(PretestLiuError, ArithmeticError):
    """Failure of a numerical procedure on otherwise valid input."""


class SingularityError(NumericalError):
    pass


class SeparationError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DomainError(NumericalError):
    """Argument outside the mathematical domain of an operation."""
