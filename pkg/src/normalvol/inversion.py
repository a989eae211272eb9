"""Explicit normal implied volatility: LFK-2026 and LFK-2026C.

Both methods work on the normalized quote ``(m, c_otm, T)`` and route on
``g = c_otm/m``:

* ``m == 0``: exact ATM inverse ``c * sqrt(2 pi) / sqrt(T)``.
* ``g > 0.15``: ITM/near-ATM rational in ``u = m/c_otm``, scaled by
  ``(m + c_otm)/sqrt(T)``.  ``u`` needs no logarithm and no small-argument
  series; the rational is evaluated directly down to ``u = 0``.
* otherwise: one of three rationals for ``1/|d|`` in the log variable
  ``eta = -(ln g + beta_s)/(beta_e - beta_s)``, scaled by ``m/sqrt(T)``.
  No square root is taken on this branch.

LFK-2026C differs only in the ITM branch, which it splits at ``u = 0.20``
into a P4/Q4 and a P9/Q8 rational.  The OTM path is the same function for
both methods, so OTM results are bit-identical.

The hand-unrolled kernels below are the hot path; ``eval_rational`` with the
``COEFFICIENTS`` tables is the generic evaluator and works for any number
type with ``+`` and ``*`` (used for promoted extended-precision checks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from math import log, sqrt
from typing import Callable, Sequence

from . import _coefficients as _tables
from .errors import ArbitrageViolation, NonPositiveMaturity
from .pricing import NormalizedQuote, OptionQuote, normalize
from .specfun import SQRT_2PI, two_product

ALPHA = 0.15
# Correctly rounded -ln(0.15), 300 ln(10) and their difference.
BETA_S = 1.8971199848858813
BETA_E = 690.7755278982137
BETA_SPAN = 688.8784079133278
ZONE_BOUNDS = (0.011, 0.105)
U_SPLIT = 0.20

_DBL_MIN = 2.2250738585072014e-308


class Method(str, Enum):
    LFK2026 = "lfk2026"
    LFK2026C = "lfk2026c"


class BranchTag(Enum):
    ATM_EXACT = "ATM_EXACT"
    ITM = "ITM"
    ITM_LOW_U = "ITM_LOW_U"
    ITM_HIGH_U = "ITM_HIGH_U"
    OTM_ZONE1 = "OTM_ZONE1"
    OTM_ZONE2 = "OTM_ZONE2"
    OTM_ZONE3 = "OTM_ZONE3"

    @property
    def is_itm(self) -> bool:
        return self in (BranchTag.ITM, BranchTag.ITM_LOW_U, BranchTag.ITM_HIGH_U)

    @property
    def is_otm(self) -> bool:
        return self in _OTM_TAGS


_OTM_TAGS = (BranchTag.OTM_ZONE1, BranchTag.OTM_ZONE2, BranchTag.OTM_ZONE3)


@dataclass(frozen=True)
class RationalFunction:
    """``P(y)/Q(y)`` with coefficients in ascending powers and ``Q(0) = 1``."""

    numerator: tuple[float, ...]
    denominator: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.numerator or not self.denominator:
            raise ValueError("empty coefficient list")
        if self.denominator[0] != 1.0:
            raise ValueError(f"denominator must start with 1, got {self.denominator[0]!r}")
        if not all(math.isfinite(x) for x in self.numerator + self.denominator):
            raise ValueError("coefficients must be finite")

    @classmethod
    def from_literals(cls, numerator: Sequence[str], denominator: Sequence[str]) -> RationalFunction:
        return cls(tuple(float(s) for s in numerator), tuple(float(s) for s in denominator))

    @property
    def degrees(self) -> tuple[int, int]:
        return len(self.numerator) - 1, len(self.denominator) - 1


def _horner(coefs: Sequence, y):
    r = coefs[-1]
    for a in reversed(coefs[:-1]):
        r = r * y + a
    return r


def eval_rational(r: RationalFunction, y):
    """Evaluate ``r`` at ``y``: two descending Horner recurrences, one division."""
    return _horner(r.numerator, y) / _horner(r.denominator, y)


@dataclass(frozen=True)
class CoefficientSet:
    lfk2026_itm: RationalFunction
    lfk2026_otm: tuple[RationalFunction, RationalFunction, RationalFunction]
    lfk2026c_low: RationalFunction
    lfk2026c_high: RationalFunction
    alpha: float = ALPHA
    beta_s: float = BETA_S
    beta_e: float = BETA_E
    u_split: float = U_SPLIT
    zone_bounds: tuple[float, float] = field(default=ZONE_BOUNDS)


COEFFICIENTS = CoefficientSet(
    lfk2026_itm=RationalFunction.from_literals(*_tables.LFK2026_ITM),
    lfk2026_otm=(
        RationalFunction.from_literals(*_tables.LFK2026_OTM1),
        RationalFunction.from_literals(*_tables.LFK2026_OTM2),
        RationalFunction.from_literals(*_tables.LFK2026_OTM3),
    ),
    lfk2026c_low=RationalFunction.from_literals(*_tables.LFK2026C_LOW),
    lfk2026c_high=RationalFunction.from_literals(*_tables.LFK2026C_HIGH),
)


# --- unrolled kernels (same literals and operation order as eval_rational) ---

def _itm_2026(u: float) -> float:
    p = (
        2.50662827463100069e+00 + u * (
        8.26914966237441540e+00 + u * (
        1.10083895644891214e+01 + u * (
        7.62695942399991100e+00 + u * (
        2.96457253391146036e+00 + u * (
        6.51812439800918964e-01 + u * (
        7.81257091685455263e-02 + u * (
        4.67776338554095131e-03 + u * (
        1.17427118047196583e-04 + u * (
        8.06959950534549627e-07 + u * (
        -3.39451638335349906e-10))))))))))
    )
    q = (
        1.00000000000000000e+00 + u * (
        3.79891342328838499e+00 + u * (
        5.87074621959482457e+00 + u * (
        4.76157470081986212e+00 + u * (
        2.18581925252758946e+00 + u * (
        5.72905243689549204e-01 + u * (
        8.27294623127229206e-02 + u * (
        6.05262799121958784e-03 + u * (
        1.90358881940080979e-04 + u * (
        1.76070970713414280e-06)))))))))
    )
    return p / q


def _itm_2026c_low(u: float) -> float:
    p = (
        2.50662827463100069e+00 + u * (
        4.33803460770355898e+00 + u * (
        2.36504153278287266e+00 + u * (
        4.35189695439266722e-01 + u * (
        1.77075775698172025e-02))))
    )
    q = (
        1.00000000000000000e+00 + u * (
        2.23062541885758314e+00 + u * (
        1.63840524330855919e+00 + u * (
        4.35646805136993498e-01 + u * (
        2.96543644408861981e-02))))
    )
    return p / q


def _itm_2026c_high(u: float) -> float:
    p = (
        2.50662827462874782e+00 + u * (
        7.07601239545194982e+00 + u * (
        7.79838748842165330e+00 + u * (
        4.28317532357895026e+00 + u * (
        1.24534893861795548e+00 + u * (
        1.88932466067008031e-01 + u * (
        1.38619741425921022e-02 + u * (
        4.15460128562968034e-04 + u * (
        3.33224453410284549e-06 + u * (
        -1.65051672752885574e-09)))))))))
    )
    q = (
        1.00000000000000000e+00 + u * (
        3.32292052116718439e+00 + u * (
        4.35214422048696914e+00 + u * (
        2.86841498456426436e+00 + u * (
        1.01064393092251747e+00 + u * (
        1.87748433761637329e-01 + u * (
        1.70940757504186268e-02 + u * (
        6.51089901103861003e-04 + u * (
        7.12577601891527465e-06))))))))
    )
    return p / q


def _otm_zone1(e: float) -> float:
    p = (
        1.24910559446641112e+00 + e * (
        8.30013684602045146e+02 + e * (
        2.89118707775471907e+05 + e * (
        6.20616261157058701e+07 + e * (
        8.81948242946073532e+09 + e * (
        8.14953597568851318e+11 + e * (
        4.61473754119971406e+13 + e * (
        1.32385751716178975e+15 + e * (
        1.35683441709766740e+16 + e * (
        2.23602102096865640e+16 + e * (
        -1.15188057059215700e+16))))))))))
    )
    q = (
        1.00000000000000000e+00 + e * (
        9.50178311644246946e+02 + e * (
        4.30671117130989209e+05 + e * (
        1.19319078802154481e+08 + e * (
        2.18139815883858109e+10 + e * (
        2.66113331187980811e+12 + e * (
        2.08194332615256938e+14 + e * (
        9.31612904921204000e+15 + e * (
        1.78457095251951296e+17 + e * (
        9.01018167981477888e+17)))))))))
    )
    return p / q


def _otm_zone2(e: float) -> float:
    p = (
        1.25087969033276813e+00 + e * (
        2.09344504116440078e+02 + e * (
        -1.74963499510044603e+04 + e * (
        -1.28046460022976995e+07 + e * (
        -1.43888265763526964e+09 + e * (
        -5.70761754440745773e+10 + e * (
        -8.98414557472468994e+11 + e * (
        -5.46607883881420703e+12 + e * (
        -1.07736581582367109e+13 + e * (
        -3.54669640321780615e+12 + e * (
        4.53512764886659485e+11))))))))))
    )
    q = (
        1.00000000000000000e+00 + e * (
        4.55619235679538008e+02 + e * (
        4.19868074702521844e+04 + e * (
        -1.48653150107890852e+07 + e * (
        -4.63359666129231930e+09 + e * (
        -3.39232384615881042e+11 + e * (
        -8.93831987833861328e+12 + e * (
        -9.10822517732905625e+13 + e * (
        -3.32157260465782750e+14 + e * (
        -3.16204789033010312e+14)))))))))
    )
    return p / q


def _otm_zone3(e: float) -> float:
    p = (
        1.61713874667576762e+00 + e * (
        1.63839367097254751e+02 + e * (
        4.52092618390189637e+03 + e * (
        4.73452995425928821e+04 + e * (
        2.11536138072810922e+05 + e * (
        4.14000232322855853e+05 + e * (
        3.38490556724923430e+05 + e * (
        9.82243936325080576e+04 + e * (
        5.74901275345015438e+03 + e * (
        -1.25257952774401772e+02 + e * (
        4.62144628906322019e+00))))))))))
    )
    q = (
        1.00000000000000000e+00 + e * (
        6.08432004257079598e+02 + e * (
        3.37041720211591382e+04 + e * (
        5.83977840443553636e+05 + e * (
        4.03973802769196732e+06 + e * (
        1.20766363495907933e+07 + e * (
        1.55296990844987314e+07 + e * (
        7.83292053799574263e+06 + e * (
        1.16810498733679834e+06 + e * (
        5.54442814599942540e+03)))))))))
    )
    return p / q


# --- routing ---


def log_ratio(m: float, c: float) -> float:
    """``ln(c/m)``, falling back to ``ln c - ln m`` when the quotient or ``c``
    is not a normal number."""
    g = c / m
    if g < _DBL_MIN or c < _DBL_MIN:
        return log(c) - log(m)
    return log(g)


def eta_tilde(m: float, c: float) -> float:
    return -(log_ratio(m, c) + BETA_S) / BETA_SPAN


def _otm_zone(eta: float) -> BranchTag:
    if eta < 0.011:
        return BranchTag.OTM_ZONE1
    if eta < 0.105:
        return BranchTag.OTM_ZONE2
    return BranchTag.OTM_ZONE3


def _check(nq: NormalizedQuote) -> None:
    if not (nq.T > 0.0 and math.isfinite(nq.T)):
        raise NonPositiveMaturity(f"maturity must be > 0 and finite, got {nq.T!r}")
    if not (nq.m >= 0.0 and math.isfinite(nq.m)):
        raise ValueError(f"moneyness must be finite and >= 0, got {nq.m!r}")
    if not nq.c_otm >= 0.0:
        raise ArbitrageViolation(f"OTM time value {nq.c_otm!r} is negative")
    if not math.isfinite(nq.c_otm):
        raise ValueError(f"OTM time value must be finite, got {nq.c_otm!r}")


def route(nq: NormalizedQuote) -> tuple[BranchTag, float]:
    """Branch and routing value (``u`` for ITM, ``eta`` for OTM, 0 for ATM).

    ``g == alpha`` goes OTM.  A zero time value with ``m > 0`` reports zone 3
    with ``eta = inf``; both inversions return 0 for it.
    """
    _check(nq)
    m, c = nq.m, nq.c_otm
    if m == 0.0:
        return BranchTag.ATM_EXACT, 0.0
    if c == 0.0:
        return BranchTag.OTM_ZONE3, math.inf
    if c / m > ALPHA:
        return BranchTag.ITM, m / c
    eta = eta_tilde(m, c)
    return _otm_zone(eta), eta


def branch(nq: NormalizedQuote, method: Method) -> BranchTag:
    """``route`` with the ITM branch refined to LOW_U/HIGH_U for LFK-2026C."""
    tag, value = route(nq)
    if tag is BranchTag.ITM and Method(method) is Method.LFK2026C:
        return BranchTag.ITM_LOW_U if value < U_SPLIT else BranchTag.ITM_HIGH_U
    return tag


# --- inversions on floats (hot path, no input validation) ---


def _otm_vol(m: float, c: float, g: float, T: float) -> float:
    if g < _DBL_MIN or c < _DBL_MIN:
        lg = log(c) - log(m)
    else:
        lg = log(g)
    e = -(lg + BETA_S) / BETA_SPAN
    if e < 0.011:
        w = _otm_zone1(e)
    elif e < 0.105:
        w = _otm_zone2(e)
    else:
        # eta > 1 (time values below exp(-beta_e) m) extrapolates zone 3
        w = _otm_zone3(e)
    return m / sqrt(T) * w


# sqrt(2 pi) - SQRT_2PI
_SQRT_2PI_LO = -1.8328579980459167e-16
# keeps every Dekker split below overflow and its error terms above underflow
_ATM_SAFE = (1e-250, 1e250)


def _atm_vol(c: float, T: float) -> float:
    """``c*sqrt(2 pi)/sqrt(T)`` with the rounding of the constant, of the
    product and of ``sqrt(T)`` compensated, so the result is within a hair
    of correctly rounded."""
    s = sqrt(T)
    lo, hi = _ATM_SAFE
    if not (lo < c < hi and lo < T < hi):
        return c * SQRT_2PI / s
    p, e = two_product(c, SQRT_2PI)
    e += c * _SQRT_2PI_LO
    ss, ss_e = two_product(s, s)
    s_lo = ((T - ss) - ss_e) / (2.0 * s)
    q = p / s
    r, r_e = two_product(q, s)
    return q + (((p - r) - r_e) + e - q * s_lo) / s


def _degenerate(m: float, c: float, T: float) -> float:
    if m == 0.0:
        return _atm_vol(c, T)
    if c == 0.0:
        return 0.0
    raise ArbitrageViolation(f"OTM time value {c!r} is negative")


def lfk2026(m: float, c: float, T: float) -> float:
    if m == 0.0 or c <= 0.0:
        return _degenerate(m, c, T)
    g = c / m
    if g > 0.15:
        return (m + c) / sqrt(T) * _itm_2026(m / c)
    return _otm_vol(m, c, g, T)


def lfk2026c(m: float, c: float, T: float) -> float:
    if m == 0.0 or c <= 0.0:
        return _degenerate(m, c, T)
    g = c / m
    if g > 0.15:
        u = m / c
        if u < 0.20:
            return (m + c) / sqrt(T) * _itm_2026c_low(u)
        return (m + c) / sqrt(T) * _itm_2026c_high(u)
    return _otm_vol(m, c, g, T)


KERNELS: dict[Method, Callable[[float, float, float], float]] = {
    Method.LFK2026: lfk2026,
    Method.LFK2026C: lfk2026c,
}


# --- validated entry points ---


def invert_atm(c: float, T: float) -> float:
    if not (T > 0.0 and math.isfinite(T)):
        raise NonPositiveMaturity(f"maturity must be > 0 and finite, got {T!r}")
    if c < 0.0:
        raise ArbitrageViolation(f"ATM price {c!r} is negative")
    return _atm_vol(c, T)


def invert_lfk2026(nq: NormalizedQuote) -> float:
    _check(nq)
    return lfk2026(nq.m, nq.c_otm, nq.T)


def invert_lfk2026c(nq: NormalizedQuote) -> float:
    _check(nq)
    return lfk2026c(nq.m, nq.c_otm, nq.T)


def invert(nq: NormalizedQuote, method: Method | str = Method.LFK2026C) -> float:
    _check(nq)
    return KERNELS[Method(method)](nq.m, nq.c_otm, nq.T)


def implied_vol(q: OptionQuote, price: float, method: Method | str = Method.LFK2026C) -> float:
    """Normal (Bachelier) implied volatility of an undiscounted call or put.

    Returned in absolute price units per square-root year; for a rate forward
    quoted as a decimal, ``1e4 * sigma`` is the basis-point volatility.
    """
    return invert(normalize(q, price), method)
