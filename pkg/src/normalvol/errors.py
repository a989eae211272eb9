"""Exception types raised across the package."""


class ArbitrageViolation(ValueError):
    """Price at or below intrinsic value (negative time value)."""


class NonPositiveMaturity(ValueError):
    """Maturity must be strictly positive and finite."""


class NoConvergence(ArithmeticError):
    """An extended-precision series, fraction or root solve missed its tolerance."""


class DegenerateWindow(ValueError):
    """A ULP window would leave the positive normal range."""


class ClockResolution(RuntimeError):
    """Timer granularity is too coarse for the requested benchmark round."""
