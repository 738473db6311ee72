"""Exception types shared across the package."""


class SingularMatrix(ArithmeticError):
    pass


class NoConvergence(ArithmeticError):
    def __init__(self, message, last_estimate=None):
        super().__init__(message)
        self.last_estimate = last_estimate


class NotSymmetric(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


class InvalidArg(ValueError):
    pass


class DegenerateDiagonal(ArithmeticError):
    pass


class NonPositiveSpectrum(ValueError):
    pass


class Diverged(ArithmeticError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InsufficientData(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class NonFiniteInput(ValueError):
    pass


class NonFiniteParameters(ArithmeticError):
    pass


class DegenerateSample(ValueError):
    pass


class SingularDesign(ArithmeticError):
    pass
