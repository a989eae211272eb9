"""Scalar double-precision special functions used by the pricer.

Only the pieces the Bachelier pricer needs: the standard normal density and
distribution function, the scaled complementary error function
``erfcx(y) = exp(y*y) * erfc(y)`` for ``y >= 0``, and the Laplace continued
fraction tail from which ``erfcx`` is built for moderate and large arguments.
"""

from __future__ import annotations

import math

SQRT_2 = 1.4142135623730951
SQRT_PI = 1.772453850905516
SQRT_2PI = 2.5066282746310007
INV_SQRT_2PI = 0.3989422804014327

# Veltkamp splitter for binary64 (2**27 + 1).
_SPLIT = 134217729.0

# Below this erfcx uses libm erfc with an exactly split exponent; above it the
# continued fraction converges in at most 62 terms.
ERFCX_CF_SWITCH = 2.0

# exp(-x*x/2) underflows to zero beyond this.
_PDF_CUTOFF = 40.0


def two_product(a: float, b: float) -> tuple[float, float]:
    """Return ``(p, e)`` with ``p = fl(a*b)`` and ``p + e == a*b`` exactly.

    Dekker's algorithm; valid while ``|a|, |b| < 1e300`` so the split cannot
    overflow.
    """
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def exp_neg_half_square(x: float) -> float:
    """``exp(-x*x/2)`` with the square carried exactly into the exponent."""
    x = abs(x)
    if x > _PDF_CUTOFF:
        return 0.0
    h, l = two_product(x, x)
    return math.exp(-0.5 * h) * (1.0 - 0.5 * l)


def norm_pdf(d: float) -> float:
    return exp_neg_half_square(d) * INV_SQRT_2PI


def laplace_tail(y: float, terms: int | None = None) -> float:
    """Tail ``K(y)`` of the Laplace continued fraction for erfc.

    ``sqrt(pi) * erfcx(y) = 1 / (y + K(y))`` with
    ``K(y) = (1/2) / (y + 1 / (y + (3/2) / (y + 2 / (y + ...))))``.

    Evaluated backwards from a fixed depth; the default depth keeps the
    truncation error below half an ulp for ``y >= 0.5``.
    """
    if terms is None:
        terms = 12 + int(200.0 / (y * y))
    t = 0.0
    for k in range(terms, 0, -1):
        t = (0.5 * k) / (y + t)
    return t


def erfcx(y: float) -> float:
    """Scaled complementary error function for ``y >= 0``."""
    if y < 0.0 or y != y:
        raise ValueError(f"erfcx is defined here for y >= 0 only, got {y!r}")
    if y < ERFCX_CF_SWITCH:
        h, l = two_product(y, y)
        return math.exp(h) * math.erfc(y) * (1.0 + l)
    if y == math.inf:
        return 0.0
    return 1.0 / (SQRT_PI * (y + laplace_tail(y)))


def norm_cdf(d: float) -> float:
    """Standard normal distribution function.

    The lower tail is built from ``exp(-d*d/2) * erfcx(-d/sqrt 2)`` so the
    rounding of ``d/sqrt(2)`` never enters an exponent; the upper half is
    obtained by reflection.
    """
    if d > 0.0:
        return 1.0 - norm_cdf(-d)
    if d > -1.5:
        return 0.5 * math.erfc(-d / SQRT_2)
    if d < -_PDF_CUTOFF:
        return 0.0
    return 0.5 * exp_neg_half_square(d) * erfcx(-d / SQRT_2)
