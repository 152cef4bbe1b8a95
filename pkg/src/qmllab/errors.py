"""Exception hierarchy shared by every qmllab module."""


class QmlLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(QmlLabError, ValueError):
    """A configuration value is out of range or inconsistent."""


class ValidationError(QmlLabError, ValueError):
    """Input data violates a declared range or invariant."""


class InputError(QmlLabError, ValueError):
    """An input collection is empty or has a degenerate size."""


class ShapeError(QmlLabError, ValueError):
    """Array lengths or qubit counts do not line up."""


class ParameterBindingError(QmlLabError, IndexError):
    """A gate references a parameter that was not supplied."""


class UnsupportedGateError(QmlLabError, TypeError):
    """A gradient rule was requested for a gate it does not cover."""


class StateError(QmlLabError, RuntimeError):
    """An object is not in the state an operation requires."""


class ParseError(QmlLabError, ValueError):
    """A document or file row could not be parsed."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class TrainingError(QmlLabError, RuntimeError):
    """Training diverged (non-finite loss or parameters)."""
