"""Exception hierarchy shared by every module."""


class OccurError(Exception):
    pass


class ShapeError(OccurError, ValueError):
    pass


class ValidationError(OccurError, ValueError):
    """Invalid input. ``path`` names the offending scenario field when known."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class RangeError(OccurError, ValueError):
    pass


class CapacityError(OccurError, ValueError):
    pass


class NumericError(OccurError, ArithmeticError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, sweeps):
        self.sweeps = sweeps
        super().__init__(message)


class DegeneracyError(NumericError):
    pass


class IntegratorError(NumericError):
    pass
