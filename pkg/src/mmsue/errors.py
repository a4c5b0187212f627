"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MmsueError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MmsueError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class SchemaError(MmsueError, ValueError):
    """A scenario or network refers to something that does not exist.

    ``path`` is a JSON-pointer-like location when the error comes from a file.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class InvalidHyperpath(MmsueError, ValueError):
    """A hyperpath has a cycle or malformed diversion probabilities."""


class Unreachable(MmsueError):
    """No path connects the requested origin and destination."""


class Unsupported(MmsueError, NotImplementedError):
    """The requested model combination is not handled by a solver."""


class NoSurplus(MmsueError, ValueError):
    """Cooperation does not create any surplus to bargain over."""


class NumericalFailure(MmsueError, ArithmeticError):
    """An iterate became NaN or infinite."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class NotConverged(MmsueError):
    """An iterative solver hit its iteration cap.

    The best iterate found so far is attached as ``result`` so callers can
    still report it.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
