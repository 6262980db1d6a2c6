"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CQExpError(Exception):
    exit_code = 1


class ValidationError(CQExpError, ValueError):
    exit_code = 2


class ResourceError(CQExpError):
    exit_code = 3


class ConvergenceError(CQExpError):
    """Iterative solver stopped at its cap; ``partial`` holds the best iterate."""

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
