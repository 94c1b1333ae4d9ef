"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: bad configuration, malformed data, out-of-range value."""


class DegenerateSystemError(ArithmeticError):
    """The penalized linear system is numerically singular."""


class CapabilityError(NotImplementedError):
    """The requested quantity is not available on this estimator path."""
