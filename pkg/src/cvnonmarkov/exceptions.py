"""Exception types raised by the library."""


class ValidationError(ValueError):
    """Input does not satisfy a structural or physical precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine produced (or was fed) an unphysical value."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach the requested tolerance.

    The best available estimate is kept so callers can decide whether to
    accept it.
    """

    def __init__(self, message, value=None, err_estimate=None):
        super().__init__(message)
        self.value = value
        self.err_estimate = err_estimate
