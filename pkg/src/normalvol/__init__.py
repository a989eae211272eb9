"""Explicit Bachelier (normal) implied volatility.

LFK-2026 and LFK-2026C closed-form inversions, a cancellation-free forward
pricer, an MPFR reference oracle and the accuracy and timing harnesses used to
validate them.
"""

from .errors import (
    ArbitrageViolation,
    ClockResolution,
    DegenerateWindow,
    NoConvergence,
    NonPositiveMaturity,
)
from .inversion import (
    COEFFICIENTS,
    BranchTag,
    Method,
    RationalFunction,
    eval_rational,
    implied_vol,
    invert,
    invert_atm,
    invert_lfk2026,
    invert_lfk2026c,
    route,
)
from .pricing import (
    NormalizedQuote,
    OptionQuote,
    bachelier_call,
    bachelier_put,
    normalize,
    otm_time_value,
)

__version__ = "0.1.0"

__all__ = [
    "ArbitrageViolation",
    "BranchTag",
    "COEFFICIENTS",
    "ClockResolution",
    "DegenerateWindow",
    "Method",
    "NoConvergence",
    "NonPositiveMaturity",
    "NormalizedQuote",
    "OptionQuote",
    "RationalFunction",
    "bachelier_call",
    "bachelier_put",
    "eval_rational",
    "implied_vol",
    "invert",
    "invert_atm",
    "invert_lfk2026",
    "invert_lfk2026c",
    "normalize",
    "otm_time_value",
    "route",
]
