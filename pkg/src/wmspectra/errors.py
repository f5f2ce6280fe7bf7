"""Exception types shared across the package."""


class WMError(Exception):
    """Base class for all package errors."""


class InvalidArgument(WMError, ValueError):
    pass


class PreconditionViolation(WMError, ValueError):
    pass


class ConfigError(WMError, ValueError):
    pass


class SingularityEncountered(WMError, RuntimeError):
    """Step size underflow; ``x`` is the last point reached."""

    def __init__(self, x, msg=None):
        self.x = x
        super().__init__(msg or f"step size underflow at x={x!r}")


class NonFiniteRHS(WMError, RuntimeError):
    def __init__(self, x, msg=None):
        self.x = x
        super().__init__(msg or f"non-finite right-hand side at x={x!r}")


class MaxStepsExceeded(WMError, RuntimeError):
    def __init__(self, x):
        self.x = x
        super().__init__(f"step budget exhausted at x={x!r}")


class ResonantIndex(WMError, ArithmeticError):
    def __init__(self, k):
        self.k = k
        super().__init__(f"indicial polynomial vanishes at s+{k}")


class TruncationBudgetExceeded(WMError, ValueError):
    pass


class Inconclusive(WMError):
    """Borderline classification; ``fallback`` holds the numerical verdict."""

    def __init__(self, msg, fallback=None):
        self.fallback = fallback
        super().__init__(msg)


class NoConvergence(WMError, RuntimeError):
    def __init__(self, msg, best_residual=None):
        self.best_residual = best_residual
        super().__init__(msg)


class WrongBranch(WMError, RuntimeError):
    def __init__(self, expected, found):
        self.expected = expected
        self.found = found
        super().__init__(f"converged to a profile with {found} crossings, wanted {expected}")


class CountMismatch(WMError, RuntimeError):
    def __init__(self, expected, found, trace=None):
        self.expected = expected
        self.found = found
        self.trace = trace
        super().__init__(f"found {found} eigenvalues, expected {expected}")


class PoleAtNonPositiveInteger(WMError, ZeroDivisionError):
    pass


class NotNonnegative(WMError, ValueError):
    pass


class BlowupDetected(WMError, FloatingPointError):
    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"non-finite field at step {step}")
