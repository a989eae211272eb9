"""Extended-precision reference implied volatility.

Arithmetic is MPFR (through gmpy2) at a configurable width; every call runs in
its own gmpy2 context, so nothing here touches shared state.  The scaled
complementary error function is summed directly: Maclaurin series below
``ERFCX_SERIES_LIMIT`` and the Laplace continued fraction above it.

The reference solve works in standardized moneyness ``a = m/(sigma sqrt T)``.
For ``m > 0`` the OTM time value is ``c = m * psi(a) / a`` with
``psi(a) = exp(-a^2/2) * (1/sqrt(2 pi) - (a/2) erfcx(a/sqrt 2))``, so the
target ``ln g = ln(c/m)`` is matched by a safeguarded Newton iteration on
``ln psi(a) - ln a`` with precision doubling.  The starting point comes from
the leading asymptotics of ``psi``, never from an inversion formula under
test.

``promoted_inversion`` evaluates LFK-2026/LFK-2026C in the same arithmetic,
with the binary64 rational coefficients promoted exactly and the routing
constants (``alpha = 0.15``, ``-ln alpha``, ``300 ln 10``) taken at working
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr

from .errors import ArbitrageViolation, NoConvergence
from .inversion import COEFFICIENTS, Method, eval_rational

BigReal = type(mpfr(0))

ERFCX_SERIES_LIMIT = 12.0
_GUARD_BITS = 64


@dataclass(frozen=True)
class OracleConfig:
    precision_bits: int = 512
    tol_log2: int = -200
    max_iterations: int = 200

    def __post_init__(self) -> None:
        if self.precision_bits < 256:
            raise ValueError(f"precision_bits must be >= 256, got {self.precision_bits}")
        if self.tol_log2 >= 0:
            raise ValueError("convergence tolerance must be < 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def convergence_tol(self) -> BigReal:
        return mpfr(2) ** self.tol_log2

    def context(self, extra_bits: int = 0) -> gmpy2.context:
        return gmpy2.context(precision=self.precision_bits + extra_bits)


DEFAULT_CONFIG = OracleConfig()


def _erfcx_series(y: BigReal, prec: int, max_terms: int) -> BigReal:
    # exp(y^2) erfc(y) = exp(y^2) - (2/sqrt pi) sum_k 2^k y^(2k+1) / (2k+1)!!
    # Every term is positive; the final subtraction costs about 1.45 y^2 bits.
    guard = int(1.5 * float(y) ** 2) + 32
    with gmpy2.context(precision=prec + guard):
        y = mpfr(y)
        y2 = 2 * y * y
        eps = mpfr(2) ** -(prec + guard)
        term = y
        total = y
        for k in range(1, max_terms + 1):
            term = term * y2 / (2 * k + 1)
            total += term
            if term <= total * eps:
                break
        else:
            raise NoConvergence(f"erfcx series at y={float(y):.6g} needed more than {max_terms} terms")
        r = gmpy2.exp(y * y) - 2 * total / gmpy2.sqrt(gmpy2.const_pi())
    with gmpy2.context(precision=prec):
        return +r


def _erfcx_continued_fraction(y: BigReal, prec: int, max_terms: int) -> BigReal:
    # modified Lentz on sqrt(pi) erfcx(y) = 1/(y + (1/2)/(y + 1/(y + (3/2)/(y + ...))))
    with gmpy2.context(precision=prec + 16):
        y = mpfr(y)
        eps = mpfr(2) ** -(prec + 8)
        f = y
        C = y
        D = mpfr(0)
        for k in range(1, max_terms + 1):
            a = mpfr(k) / 2
            D = 1 / (y + a * D)
            C = y + a / C
            delta = C * D
            f *= delta
            if abs(delta - 1) < eps:
                break
        else:
            raise NoConvergence(f"erfcx continued fraction at y={float(y):.6g} needed more than {max_terms} terms")
        r = 1 / (f * gmpy2.sqrt(gmpy2.const_pi()))
    with gmpy2.context(precision=prec):
        return +r


def big_erfcx(y, prec: int, max_terms: int = 20000) -> BigReal:
    """``exp(y^2) erfc(y)`` for ``y >= 0`` to ``prec`` bits."""
    y = mpfr(y)
    if y < 0:
        raise ValueError("big_erfcx needs y >= 0")
    if y < ERFCX_SERIES_LIMIT:
        return _erfcx_series(y, prec, max_terms)
    return _erfcx_continued_fraction(y, prec, max_terms)


def _psi_parts(a: BigReal, prec: int) -> tuple[BigReal, BigReal]:
    """Return ``(B, E)`` with ``psi(a) = exp(-a^2/2) B`` and ``E = erfcx(a/sqrt 2)``.

    ``B`` loses about ``2 log2(a)`` bits to cancellation, covered by the caller's guard bits.
    """
    E = big_erfcx(a / gmpy2.sqrt(mpfr(2)), prec)
    B = 1 / gmpy2.sqrt(2 * gmpy2.const_pi()) - a / 2 * E
    return B, E


def big_otm_time_value(m, sigma, T, cfg: OracleConfig = DEFAULT_CONFIG) -> BigReal:
    """OTM time value at ``cfg.precision_bits`` (inputs promoted exactly)."""
    prec = cfg.precision_bits
    with cfg.context(_GUARD_BITS):
        m, sigma, T = mpfr(m), mpfr(sigma), mpfr(T)
        if m < 0 or not sigma > 0 or not T > 0:
            raise ValueError("need m >= 0, sigma > 0, T > 0")
        v = sigma * gmpy2.sqrt(T)
        if m == 0:
            r = v / gmpy2.sqrt(2 * gmpy2.const_pi())
        else:
            a = m / v
            B, _ = _psi_parts(a, prec + _GUARD_BITS)
            r = gmpy2.exp(-a * a / 2) * v * B
    with cfg.context():
        return +r


def _initial_a(lg: float) -> float:
    """Rough standardized moneyness for ``ln(psi(a)/a) = lg`` from asymptotics."""
    g = math.exp(lg) if lg < 700 else math.inf
    if g >= 0.4:
        # psi(a)/a ~ 1/(a sqrt(2 pi)) - 1/2
        return 1.0 / ((g + 0.5) * math.sqrt(2 * math.pi))
    # psi(a)/a ~ phi(a)/a^3
    L = -lg - 0.5 * math.log(2 * math.pi)
    a = math.sqrt(2 * max(L, 0.5))
    for _ in range(4):
        a = math.sqrt(2 * max(L - 3 * math.log(a), 0.5))
    return a


def _solve_a(lg: BigReal, cfg: OracleConfig, a0: float | None) -> BigReal:
    """Newton with bisection safeguard on ``h(a) = ln psi(a) - ln a - lg`` (decreasing)."""
    target = cfg.precision_bits
    prec = 64
    lo, hi = mpfr(0), None
    a = mpfr(a0 if a0 is not None else _initial_a(float(lg)))
    stall = 0
    for _ in range(cfg.max_iterations):
        work = prec + _GUARD_BITS
        with gmpy2.context(precision=work):
            a = mpfr(a)
            lgw = mpfr(lg)
            B, E = _psi_parts(a, work)
            if B <= 0:
                # only reachable through gross overshoot; treat as "a too large"
                hi = a
                a = (lo + hi) / 2
                continue
            h = -a * a / 2 + gmpy2.log(B) - gmpy2.log(a) - lgw
            dh = -(E / 2) / B - 1 / a
            if h > 0:
                lo = a if a > lo else lo
            else:
                hi = a if hi is None or a < hi else hi
            step = -h / dh
            nxt = a + step
            if not (nxt >= lo and (hi is None or nxt <= hi)) or nxt <= 0:
                nxt = (lo + hi) / 2 if hi is not None else 2 * a
            converged = abs(step) <= abs(a) * mpfr(2) ** -(prec - 4)
            a = nxt
        if converged:
            if prec >= target + _GUARD_BITS:
                stall += 1
                if stall >= 2:
                    return a
            else:
                # signs of h near the root are not trustworthy at the old
                # precision; from here on Newton starts inside its basin
                lo, hi = mpfr(0), None
            prec = min(2 * prec, target + _GUARD_BITS)
    raise NoConvergence(f"reference solve did not converge in {cfg.max_iterations} iterations")


def reference_vol(m: float, c_otm: float, T: float, cfg: OracleConfig = DEFAULT_CONFIG,
                  guess: float | None = None) -> BigReal:
    """Volatility whose extended-precision OTM time value equals ``c_otm`` exactly.

    ``c_otm`` is the binary64 input promoted without re-rounding.  ``guess`` (a
    volatility) only seeds the iteration.
    """
    if not c_otm > 0.0:
        raise ArbitrageViolation(f"reference volatility needs c_otm > 0, got {c_otm!r}")
    if not (m >= 0.0 and T > 0.0):
        raise ValueError("need m >= 0 and T > 0")
    with cfg.context(_GUARD_BITS):
        M, C, TT = mpfr(m), mpfr(c_otm), mpfr(T)
        sqrt_t = gmpy2.sqrt(TT)
        if m == 0.0:
            sigma = C * gmpy2.sqrt(2 * gmpy2.const_pi()) / sqrt_t
            with cfg.context():
                return +sigma
        lg = gmpy2.log(C) - gmpy2.log(M)
    a0 = None
    if guess is not None and guess > 0.0:
        a0 = m / (guess * math.sqrt(T))
        if not (0.0 < a0 < math.inf):
            a0 = None
    a = _solve_a(lg, cfg, a0)
    with cfg.context(_GUARD_BITS):
        sigma = M / (a * sqrt_t)
    with cfg.context():
        sigma = +sigma
    res = residual(m, c_otm, T, sigma, cfg)
    if not res < cfg.convergence_tol:
        raise NoConvergence(f"reference vol residual {float(res):.3g} above tolerance")
    return sigma


def residual(m: float, c_otm: float, T: float, sigma: BigReal, cfg: OracleConfig = DEFAULT_CONFIG) -> BigReal:
    """``|c(sigma) - c_otm| / c_otm`` in extended precision."""
    c = big_otm_time_value(m, sigma, T, cfg)
    with cfg.context(_GUARD_BITS):
        C = mpfr(c_otm)
        return abs(c - C) / C


def relative_vol_error(m: float, c_otm: float, T: float, sigma_hat, cfg: OracleConfig = DEFAULT_CONFIG,
                       reference: BigReal | None = None) -> float:
    """``|sigma_hat / sigma_ref - 1|`` rounded once to binary64."""
    if reference is None:
        reference = reference_vol(m, c_otm, T, cfg)
    with cfg.context(_GUARD_BITS):
        return float(abs(mpfr(sigma_hat) / reference - 1))


# --- promoted evaluation of the explicit formulas ---


@dataclass(frozen=True)
class _PromotedConstants:
    alpha: BigReal
    beta_s: BigReal
    beta_span: BigReal
    zone1: BigReal
    zone2: BigReal
    u_split: BigReal
    sqrt_2pi: BigReal


def _promoted_constants() -> _PromotedConstants:
    alpha = mpfr("0.15")
    beta_s = -gmpy2.log(alpha)
    beta_e = 300 * gmpy2.log(mpfr(10))
    return _PromotedConstants(
        alpha=alpha,
        beta_s=beta_s,
        beta_span=beta_e - beta_s,
        zone1=mpfr("0.011"),
        zone2=mpfr("0.105"),
        u_split=mpfr("0.20"),
        sqrt_2pi=gmpy2.sqrt(2 * gmpy2.const_pi()),
    )


def promoted_inversion(method: Method | str, m: float, c_otm: float, T: float,
                       cfg: OracleConfig = DEFAULT_CONFIG) -> BigReal:
    """LFK-2026 / LFK-2026C evaluated in ``cfg`` precision on exact inputs."""
    method = Method(method)
    with cfg.context():
        k = _promoted_constants()
        M, C, TT = mpfr(m), mpfr(c_otm), mpfr(T)
        sqrt_t = gmpy2.sqrt(TT)
        if M == 0:
            return C * k.sqrt_2pi / sqrt_t
        if C == 0:
            return mpfr(0)
        g = C / M
        if g > k.alpha:
            u = M / C
            if method is Method.LFK2026:
                r = eval_rational(COEFFICIENTS.lfk2026_itm, u)
            elif u < k.u_split:
                r = eval_rational(COEFFICIENTS.lfk2026c_low, u)
            else:
                r = eval_rational(COEFFICIENTS.lfk2026c_high, u)
            return (M + C) / sqrt_t * r
        eta = -(gmpy2.log(g) + k.beta_s) / k.beta_span
        zone = 0 if eta < k.zone1 else 1 if eta < k.zone2 else 2
        return M / sqrt_t * eval_rational(COEFFICIENTS.lfk2026_otm[zone], eta)


def solve_standardized_moneyness(log_g: float, cfg: OracleConfig = DEFAULT_CONFIG) -> BigReal:
    """``a > 0`` with ``psi(a)/a = exp(log_g)``; used to place routing boundaries in ``d``."""
    return _solve_a(mpfr(log_g), cfg, None)
