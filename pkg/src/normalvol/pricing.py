"""Forward Bachelier prices and the (m, c_otm, T) normalization.

All prices are undiscounted.  The out-of-the-money time value is computed
from the erfcx form

    c = exp(-a**2/2) * (v/sqrt(2 pi) - (m/2) * erfcx(a/sqrt 2)),   a = m/v,

with the bracket rewritten as ``v/sqrt(2 pi) * S(a/sqrt 2)`` where
``S(y) = 1 - sqrt(pi)*y*erfcx(y)``.  For ``y >= 0.5`` ``S`` comes straight out
of the Laplace continued fraction as ``K/(y + K)``, so the deep tail carries
no subtraction at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ArbitrageViolation, NonPositiveMaturity
from .specfun import (
    INV_SQRT_2PI,
    SQRT_PI,
    erfcx,
    laplace_tail,
    norm_cdf,
    norm_pdf,
    two_product,
)

# S(y) switches from 1 - sqrt(pi)*y*erfcx(y) to the continued fraction here;
# below it the subtraction loses at most a factor 1.2.
_GAP_CF_SWITCH = 0.5

# 1/sqrt(2) as an unevaluated sum hi + lo
_INV_SQRT_2_HI = 0.7071067811865476
_INV_SQRT_2_LO = -4.833646656726457e-17

# Standardized moneyness beyond which the time value is exactly zero in binary64.
_A_UNDERFLOW = 40.0


@dataclass(frozen=True, slots=True)
class OptionQuote:
    forward: float
    strike: float
    maturity: float
    is_call: bool = True


@dataclass(frozen=True, slots=True)
class NormalizedQuote:
    """Absolute moneyness, OTM time value and maturity."""

    m: float
    c_otm: float
    T: float

    @property
    def g(self) -> float:
        return self.c_otm / self.m


def _check_maturity(T: float) -> None:
    if not (T > 0.0 and math.isfinite(T)):
        raise NonPositiveMaturity(f"maturity must be > 0 and finite, got {T!r}")


def bachelier_call(F: float, K: float, sigma: float, T: float) -> float:
    """Textbook call price ``x*Phi(d) + v*phi(d)``."""
    _check_maturity(T)
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    x = F - K
    if sigma == 0.0:
        return max(x, 0.0)
    v = sigma * math.sqrt(T)
    d = x / v
    return x * norm_cdf(d) + v * norm_pdf(d)


def bachelier_put(F: float, K: float, sigma: float, T: float) -> float:
    _check_maturity(T)
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    x = K - F
    if sigma == 0.0:
        return max(x, 0.0)
    v = sigma * math.sqrt(T)
    d = x / v
    return x * norm_cdf(d) + v * norm_pdf(d)


def _scaled_gap(y: float) -> float:
    """``S(y) = 1 - sqrt(pi) * y * erfcx(y)`` for ``y >= 0``."""
    if y < _GAP_CF_SWITCH:
        return 1.0 - SQRT_PI * y * erfcx(y)
    k = laplace_tail(y)
    return k / (y + k)


def otm_time_value(m: float, sigma: float, T: float) -> float:
    """Time value of the out-of-the-money option at absolute moneyness ``m``.

    Subnormal or underflowed results are returned as they are.
    """
    _check_maturity(T)
    if m < 0.0:
        raise ValueError(f"moneyness must be >= 0, got {m!r}")
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma!r}")
    s = math.sqrt(T)
    v = sigma * s
    if m == 0.0:
        return v * INV_SQRT_2PI
    a = m / v
    if a > _A_UNDERFLOW:
        return 0.0
    # v_lo: rounding of sqrt(T) and of sigma*s, so that v + v_lo = sigma*sqrt(T)
    s2, s2_lo = two_product(s, s)
    v_lo = sigma * (((T - s2) - s2_lo) / (2.0 * s))
    v_lo += two_product(sigma, s)[1]
    # a**2 = h + l to working accuracy, including the rounding of m/v
    p, e = two_product(a, v)
    a_lo = ((m - p) - e - a * v_lo) / v
    h, l = two_product(a, a)
    l += 2.0 * a * a_lo
    damp = math.exp(-0.5 * h) * (1.0 - 0.5 * l)
    # y + y_lo = (a + a_lo)/sqrt(2); S moves by about -2 y_lo/y, so the
    # rounding of y is fed back through S'(y) = (S (1 + 2y^2) - 1)/y
    y, y_lo = two_product(a, _INV_SQRT_2_HI)
    y_lo += a * _INV_SQRT_2_LO + a_lo * _INV_SQRT_2_HI
    gap = _scaled_gap(y)
    if y > 0.0:
        gap += (gap * (1.0 + 2.0 * y * y) - 1.0) / y * y_lo
    return damp * (v * INV_SQRT_2PI) * gap


def normalize(q: OptionQuote, price: float) -> NormalizedQuote:
    """Reduce a call or put quote to ``(m, c_otm, T)``.

    Puts are reflected through put-call symmetry: both sides subtract their own
    intrinsic value, leaving the OTM time value.
    """
    _check_maturity(q.maturity)
    if not math.isfinite(price):
        raise ValueError(f"price must be finite, got {price!r}")
    x = q.forward - q.strike
    if not q.is_call:
        x = -x
    intrinsic = max(x, 0.0)
    c = price - intrinsic
    if c < 0.0:
        kind = "call" if q.is_call else "put"
        raise ArbitrageViolation(
            f"{kind} price {price!r} is below its intrinsic value {intrinsic!r}"
        )
    return NormalizedQuote(abs(x), c, q.maturity)


def reflect_itm_strike(F: float, K: float) -> float:
    return 2.0 * F - K


def stable_call_price(F: float, K: float, sigma: float, T: float) -> float:
    """Call price as intrinsic value plus the erfcx-based OTM time value."""
    x = F - K
    return max(x, 0.0) + otm_time_value(abs(x), sigma, T)
