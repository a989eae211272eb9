"""Accuracy suites for the explicit inversions, scored against the oracle.

Windowed suites perturb a price across 256 consecutive binary64 values and
invert every sample in double precision.  The dense and fixed-tail suites
instead take single prices from the extended-precision pricer, rounded once,
and evaluate the formulas in extended precision with binary64 coefficients,
which isolates the approximation error from double rounding.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from gmpy2 import mpfr

from .errors import ArbitrageViolation, DegenerateWindow, NonPositiveMaturity
from .inversion import ALPHA, BETA_S, BETA_SPAN, KERNELS, U_SPLIT, Method, branch, invert
from .oracle import (
    DEFAULT_CONFIG,
    OracleConfig,
    big_otm_time_value,
    promoted_inversion,
    reference_vol,
    relative_vol_error,
    solve_standardized_moneyness,
)
from .pricing import NormalizedQuote, OptionQuote, normalize, otm_time_value, reflect_itm_strike, stable_call_price

WINDOW = 256
DENSE_STEP = 0.025

STRIKES = (1.001, 1.01, 1.1, 1.5, 2.0, 3.0, 5.0, 7.0, 8.0,
           0.999, 0.99, 0.9, 0.5, 0.0, -0.5, -1.0)
DEEP_ITM_STRIKES = (-1.0, -2.0, -3.0, -5.0, -7.0, -8.0, -9.0, -10.0, -15.0, -20.0, -25.0, -30.0)
DIRECT_D = (-8.0, -5.0, -3.0, -2.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0)
FIXED_TAIL_D = (0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 35.0)

ADV_F = (-10.0, -0.1, 0.0, 1.0, 100.0)
ADV_SIGMA = (1e-6, 0.003, 1.0, 40.0, 1e6)
ADV_T = (1e-8, 0.01, 1.0, 100.0, 1e8)
ADV_D = (-5.0, -2.0, -0.1, -1e-8, 0.0, 1e-8, 0.1, 2.0, 5.0)


class Provenance(str, Enum):
    STRIKE_GRID = "strike"
    DEEP_ITM_REFLECTION = "reflection"
    DIRECT_OTM = "direct"
    DENSE_D8 = "dense8"
    DENSE_D30 = "dense30"
    FIXED_TAIL = "fixed_tail"
    ADVERSARIAL = "adversarial"


# these suites feed extended-precision inputs to the promoted formulas
PROMOTED = frozenset({Provenance.DENSE_D8, Provenance.DENSE_D30, Provenance.FIXED_TAIL})


@dataclass(frozen=True, slots=True)
class TestCase:
    """One normalized input.  ``sign`` is +1 for ITM-labelled and -1 for
    OTM-labelled quotes; it only affects the reported ``d``.  ``d`` is the
    nominal standardized moneyness used to build the case."""

    __test__ = False

    id: str
    m: float
    c_otm: float
    T: float
    provenance: Provenance
    sign: float = -1.0
    d: float = math.nan
    degenerate: bool = False

    @property
    def quote(self) -> NormalizedQuote:
        return NormalizedQuote(self.m, self.c_otm, self.T)


@dataclass(frozen=True, slots=True)
class ErrorStats:
    max_error: float
    p99: float
    worst_d: float
    sample_count: int


@dataclass(frozen=True, slots=True)
class CaseResult:
    case: TestCase
    sigma: float
    error: float | None


# --- windows and grids ---


def _bits(x: float) -> int:
    return struct.unpack("<q", struct.pack("<d", x))[0]


def _from_bits(b: int) -> float:
    return struct.unpack("<d", struct.pack("<q", b))[0]


def ulp_window(p: float, n: int = WINDOW) -> list[float]:
    """``n`` consecutive binary64 values centred on ``p``, increasing.

    ``n//2`` predecessors, ``p``, then ``n - 1 - n//2`` successors.
    """
    if not (p > 0.0 and math.isfinite(p)):
        raise ValueError(f"window centre must be positive and finite, got {p!r}")
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    b = _bits(p)
    first = b - n // 2
    last = b + (n - 1 - n // 2)
    if first <= 0:
        raise DegenerateWindow(f"window of {n} around {p!r} reaches zero")
    if last >= _bits(math.inf):
        raise DegenerateWindow(f"window of {n} around {p!r} reaches infinity")
    return [_from_bits(k) for k in range(first, last + 1)]


def dense_grid(limit: float, step: float = DENSE_STEP) -> list[float]:
    """``-limit, ..., 0, ..., limit`` with each point rounded once from ``k*step``."""
    # decimal reading, so 0.025 means 1/40 and not its binary64 neighbour
    q = Fraction(repr(step))
    n = round(Fraction(repr(limit)) / q)
    if n * q != Fraction(repr(limit)):
        raise ValueError(f"limit {limit!r} is not a multiple of step {step!r}")
    return [float(k * q) for k in range(-n, n + 1)]


def _sign(x: float) -> float:
    return 1.0 if x > 0.0 else -1.0


# --- suites ---


def suite_strike_grid() -> list[TestCase]:
    F = sigma = T = 1.0
    cases = []
    for K in STRIKES:
        price = stable_call_price(F, K, sigma, T)
        q = OptionQuote(F, K, T)
        for j, p in enumerate(ulp_window(price)):
            nq = normalize(q, p)
            cases.append(TestCase(f"strike/K={K!r}/{j - WINDOW // 2}", nq.m, nq.c_otm, T,
                                  Provenance.STRIKE_GRID, _sign(F - K), F - K))
    return cases


def suite_deep_itm_reflection() -> list[TestCase]:
    F = sigma = T = 1.0
    cases = []
    for K in DEEP_ITM_STRIKES:
        m = reflect_itm_strike(F, K) - F
        c = otm_time_value(m, sigma, T)
        for j, p in enumerate(ulp_window(c)):
            cases.append(TestCase(f"reflection/K={K!r}/{j - WINDOW // 2}", m, p, T,
                                  Provenance.DEEP_ITM_REFLECTION, -1.0, -m))
    return cases


def suite_direct_otm() -> list[TestCase]:
    T = 1.0
    cases = []
    for d in DIRECT_D:
        m = abs(d)
        c = otm_time_value(m, 1.0, T)
        for j, p in enumerate(ulp_window(c)):
            cases.append(TestCase(f"direct/d={d!r}/{j - WINDOW // 2}", m, p, T,
                                  Provenance.DIRECT_OTM, _sign(d), d))
    return cases


def _big_cases(ds: Iterable[float], provenance: Provenance, label: str,
               cfg: OracleConfig) -> list[TestCase]:
    cases = []
    prices: dict[float, float] = {}
    for d in ds:
        m = abs(d)
        if m not in prices:
            prices[m] = float(big_otm_time_value(m, 1.0, 1.0, cfg))
        c = prices[m]
        cases.append(TestCase(f"{label}/d={d!r}", m, c, 1.0, provenance, _sign(d) if d else -1.0, d))
    return cases


def suite_dense(limit: float, step: float = DENSE_STEP, cfg: OracleConfig = DEFAULT_CONFIG) -> list[TestCase]:
    """Single-sample grid over ``|d| <= limit``, both signs.

    ``d`` and ``-d`` normalize to the same input; the negative (OTM call) half
    comes first, so ties in the error are reported at ``d < 0``."""
    provenance = {8.0: Provenance.DENSE_D8, 30.0: Provenance.DENSE_D30}.get(float(limit))
    if provenance is None:
        raise ValueError(f"dense grids are defined for limit 8 or 30, got {limit!r}")
    return _big_cases(dense_grid(limit, step), provenance, provenance.value, cfg)


def suite_fixed_tail(cfg: OracleConfig = DEFAULT_CONFIG) -> list[TestCase]:
    ds = [0.0] + [s * d for d in FIXED_TAIL_D for s in (-1.0, 1.0)]
    return _big_cases(ds, Provenance.FIXED_TAIL, "fixed_tail", cfg)


def _route_key(m: float, c: float, method: Method) -> str:
    return branch(NormalizedQuote(m, c, 1.0), method).value


def _flip_point(m: float, c_guess: float, method: Method, span: int = 1 << 20) -> float:
    """Smallest binary64 time value near ``c_guess`` whose branch differs from
    its predecessor's, found by bisection on the bit pattern."""
    b = _bits(c_guess)
    lo, hi = b - span, b + span
    k_lo = _route_key(m, _from_bits(lo), method)
    if _route_key(m, _from_bits(hi), method) == k_lo:
        raise ValueError(f"no branch change within {span} ulps of {c_guess!r}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _route_key(m, _from_bits(mid), method) == k_lo:
            lo = mid
        else:
            hi = mid
    return _from_bits(hi)


def boundary_prices(m: float = 1.0) -> dict[str, tuple[float, Method]]:
    """Time values (at moneyness ``m``) where each routing decision flips."""
    out = {}
    out["g=alpha"] = (_flip_point(m, ALPHA * m, Method.LFK2026), Method.LFK2026)
    for name, eta in (("eta=0.011", 0.011), ("eta=0.105", 0.105)):
        c = m * math.exp(-(BETA_S + eta * BETA_SPAN))
        out[name] = (_flip_point(m, c, Method.LFK2026), Method.LFK2026)
    out["u=0.20"] = (_flip_point(m, m / U_SPLIT, Method.LFK2026C), Method.LFK2026C)
    return out


STRADDLE_ULPS = (1, 2, 4)


def straddle_pairs(m: float = 1.0) -> list[tuple[str, float, float, Method]]:
    """``(name, below, above, method)`` with the two prices ``k`` ulps either
    side of each branch flip."""
    pairs = []
    for name, (c, method) in boundary_prices(m).items():
        b = _bits(c)
        for k in STRADDLE_ULPS:
            # b is the first value on the far side, so b-k .. b+k-1 straddle it
            pairs.append((f"{name}/{k}", _from_bits(b - k), _from_bits(b + k - 1), method))
    return pairs


SUBNORMAL_PRICES = (5e-324, 1e-323, 4.9e-322, 1e-315, 1e-310, 2.2250738585072014e-308, 1e-300)


def suite_adversarial() -> list[TestCase]:
    cases: list[TestCase] = []
    adv = Provenance.ADVERSARIAL

    def add(case_id: str, m: float, c: float, T: float, sign: float, d: float, bad: bool = False) -> None:
        usable = math.isfinite(m) and math.isfinite(c) and math.isfinite(T) and T > 0.0
        degenerate = bad or not usable or c <= 0.0
        cases.append(TestCase(case_id, m, c, T, adv, sign, d, degenerate))

    # core magnitudes, OTM and reflected ITM
    for k in range(38):
        d = float(k)
        c = otm_time_value(d, 1.0, 1.0)
        add(f"adv/core/otm/d={k}", d, c, 1.0, -1.0, -d)
        price = stable_call_price(1.0, 1.0 - d, 1.0, 1.0)
        nq = normalize(OptionQuote(1.0, 1.0 - d, 1.0), price)
        add(f"adv/core/itm/d={k}", nq.m, nq.c_otm, 1.0, 1.0, d)

    for name, lo, hi, _ in straddle_pairs():
        add(f"adv/straddle/{name}/below", 1.0, lo, 1.0, -1.0, math.nan)
        add(f"adv/straddle/{name}/above", 1.0, hi, 1.0, -1.0, math.nan)

    for m in (1.0, 1e-300, 1e10):
        for c in SUBNORMAL_PRICES:
            add(f"adv/subnormal/m={m!r}/c={c!r}", m, c, 1.0, -1.0, math.nan)

    for F in ADV_F:
        for sigma in ADV_SIGMA:
            for T in ADV_T:
                for d in ADV_D:
                    add_scaled(cases, F, sigma, T, d)
    return cases


def add_scaled(cases: list[TestCase], F: float, sigma: float, T: float, d: float) -> None:
    case_id = f"adv/scaled/F={F!r}/sigma={sigma!r}/T={T!r}/d={d!r}"
    v = sigma * math.sqrt(T)
    K = F - d * v
    try:
        price = stable_call_price(F, K, sigma, T)
        nq = normalize(OptionQuote(F, K, T), price)
    except (ArbitrageViolation, NonPositiveMaturity, ValueError, OverflowError):
        cases.append(TestCase(case_id, math.nan, math.nan, T, Provenance.ADVERSARIAL, _sign(d), d, True))
        return
    usable = math.isfinite(price) and (nq.m == 0.0 or nq.c_otm > 0.0)
    cases.append(TestCase(case_id, nq.m, nq.c_otm, T, Provenance.ADVERSARIAL, _sign(d), d, not usable))


# --- scoring ---


def _scored(case: TestCase) -> bool:
    return not case.degenerate and case.c_otm > 0.0


def reference_vols(cases: Sequence[TestCase], cfg: OracleConfig = DEFAULT_CONFIG) -> list:
    """Oracle volatility per case (``None`` for degenerate ones).

    Consecutive cases in a window have nearly equal vols, so each solve is
    seeded with its neighbour's result.  Repeated inputs are solved once."""
    refs: list = []
    seen: dict = {}
    guess = None
    prev_m = None
    for case in cases:
        if not _scored(case):
            refs.append(None)
            continue
        key = (case.m, case.c_otm, case.T)
        if key in seen:
            refs.append(seen[key])
            continue
        if case.m != prev_m:
            guess = None
        r = seen[key] = reference_vol(case.m, case.c_otm, case.T, cfg, guess=guess)
        refs.append(r)
        guess, prev_m = float(r), case.m
    return refs


def _invert(case: TestCase, method: Method, cfg: OracleConfig):
    if case.provenance in PROMOTED:
        return promoted_inversion(method, case.m, case.c_otm, case.T, cfg)
    return KERNELS[method](case.m, case.c_otm, case.T)


def score_cases(cases: Sequence[TestCase], method: Method | str, cfg: OracleConfig = DEFAULT_CONFIG,
                references: Sequence | None = None) -> list[CaseResult]:
    method = Method(method)
    if references is None:
        references = reference_vols(cases, cfg)
    out = []
    for case, ref in zip(cases, references, strict=True):
        if not _scored(case):
            out.append(CaseResult(case, _totality(case, method), None))
            continue
        s = _invert(case, method, cfg)
        err = relative_vol_error(case.m, case.c_otm, case.T, s, cfg, reference=ref)
        out.append(CaseResult(case, float(s), err))
    return out


def _totality(case: TestCase, method: Method) -> float:
    """Value of a degenerate case; typed errors are reported as NaN here and
    checked separately by ``totality_failures``."""
    try:
        return invert(case.quote, method)
    except (ArbitrageViolation, NonPositiveMaturity, ValueError):
        return math.nan


def totality_failures(cases: Sequence[TestCase], method: Method | str) -> list[str]:
    """Ids of cases that neither return a finite volatility nor raise a typed
    domain error.  Non-degenerate cases must also be finite and non-negative."""
    method = Method(method)
    bad = []
    for case in cases:
        try:
            s = invert(case.quote, method)
        except (ArbitrageViolation, NonPositiveMaturity, ValueError):
            if not case.degenerate:
                bad.append(case.id)
            continue
        except Exception:  # noqa: BLE001 - anything untyped is a totality failure
            bad.append(case.id)
            continue
        if not (math.isfinite(s) and s >= 0.0):
            bad.append(case.id)
        elif not case.degenerate and case.c_otm > 0.0 and not s > 0.0:
            bad.append(case.id)
    return bad


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    n = len(sorted_values)
    k = max(1, math.ceil(q * n - 1e-12))
    return sorted_values[k - 1]


def aggregate(results: Sequence[CaseResult], cfg: OracleConfig = DEFAULT_CONFIG,
              references: Sequence | None = None) -> ErrorStats:
    scored = [(i, r) for i, r in enumerate(results) if r.error is not None]
    if not scored:
        raise ValueError("no scored cases to aggregate")
    errors = sorted(r.error for _, r in scored)
    # ties go to the first case so the report does not depend on float noise
    i_worst, worst = max(scored, key=lambda ir: (ir[1].error, -ir[0]))
    c = worst.case
    if c.m == 0.0:
        worst_d = 0.0
    else:
        ref = references[i_worst] if references is not None else reference_vol(c.m, c.c_otm, c.T, cfg)
        worst_d = c.sign * float(mpfr(c.m) / (ref * math.sqrt(c.T)))
    return ErrorStats(errors[-1], nearest_rank(errors, 0.99), worst_d, len(errors))


def run_suite(cases: Sequence[TestCase], method: Method | str, cfg: OracleConfig = DEFAULT_CONFIG,
              references: Sequence | None = None) -> ErrorStats:
    """Max, nearest-rank P99 and worst ``d`` of the relative vol error.

    Pass ``references`` from ``reference_vols`` to share oracle solves
    between methods."""
    if not cases:
        raise ValueError("run_suite needs at least one case")
    if references is None:
        references = reference_vols(cases, cfg)
    return aggregate(score_cases(cases, method, cfg, references), cfg, references)


# --- suite registry and acceptance thresholds ---


SUITES = ("strike", "reflection", "direct", "dense8", "dense30", "adversarial")


def build_suite(name: str, cfg: OracleConfig = DEFAULT_CONFIG) -> list[TestCase]:
    if name == "strike":
        return suite_strike_grid()
    if name == "reflection":
        return suite_deep_itm_reflection()
    if name == "direct":
        return suite_direct_otm()
    if name == "dense8":
        return suite_dense(8.0, DENSE_STEP, cfg)
    if name == "dense30":
        return suite_dense(30.0, DENSE_STEP, cfg)
    if name == "fixed_tail":
        return suite_fixed_tail(cfg)
    if name == "adversarial":
        return suite_adversarial()
    raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")


@dataclass(frozen=True)
class Threshold:
    max_error: float | None = None
    p99: float | None = None
    worst_d: float | None = None
    worst_d_tol: float = 0.05


THRESHOLDS: dict[str, Threshold] = {
    "strike": Threshold(6.0e-15),
    "reflection": Threshold(5.0e-14),
    "direct": Threshold(1.5e-15, 1.0e-15),
    "dense8": Threshold(2.5e-16, worst_d=-3.225),
    "dense30": Threshold(2.5e-16, worst_d=-10.700),
    "adversarial": Threshold(),
}


def breaches(suite: str, stats: ErrorStats) -> list[str]:
    t = THRESHOLDS.get(suite, Threshold())
    out = []
    if t.max_error is not None and not stats.max_error <= t.max_error:
        out.append(f"max {stats.max_error:.3e} > {t.max_error:.3e}")
    if t.p99 is not None and not stats.p99 <= t.p99:
        out.append(f"p99 {stats.p99:.3e} > {t.p99:.3e}")
    if t.worst_d is not None and not abs(stats.worst_d - t.worst_d) <= t.worst_d_tol:
        out.append(f"worst d {stats.worst_d:.4f} not within {t.worst_d_tol} of {t.worst_d}")
    return out


# --- reports ---


@dataclass(frozen=True)
class ReportRow:
    suite: str
    method: str
    stats: ErrorStats
    failures: tuple[str, ...] = field(default=())


def _g17(x: float) -> str:
    return f"{x:.17g}"


REPORT_HEADER = ("suite", "method", "samples", "max_error", "p99", "worst_d")


def write_csv_report(rows: Iterable[ReportRow], path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(REPORT_HEADER)
            for r in rows:
                s = r.stats
                w.writerow((r.suite, r.method, s.sample_count, _g17(s.max_error), _g17(s.p99), _g17(s.worst_d)))
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc


def markdown_report(rows: Iterable[ReportRow]) -> str:
    lines = ["| Suite | Method | Samples | Max Error | P99 | Worst d |",
             "|---|---|---:|---:|---:|---:|"]
    for r in rows:
        s = r.stats
        lines.append(f"| {r.suite} | {r.method} | {s.sample_count} | {_g17(s.max_error)} "
                     f"| {_g17(s.p99)} | {_g17(s.worst_d)} |")
    return "\n".join(lines) + "\n"


# --- error profile ---


def boundary_d_locations(cfg: OracleConfig = DEFAULT_CONFIG) -> list[tuple[str, float]]:
    """``d`` (OTM sign) where ``g = alpha`` and ``eta`` hits each zone bound,
    for ``sigma = T = 1``."""
    out = []
    for name, lg in (("g=alpha", math.log(ALPHA)),
                     ("eta=0.011", -(BETA_S + 0.011 * BETA_SPAN)),
                     ("eta=0.105", -(BETA_S + 0.105 * BETA_SPAN))):
        out.append((name, -float(solve_standardized_moneyness(lg, cfg))))
    return out


def emit_profile(limit: float, step: float = DENSE_STEP,
                 methods: Sequence[Method | str] = (Method.LFK2026, Method.LFK2026C),
                 out: str | Path = "profile.csv", cfg: OracleConfig = DEFAULT_CONFIG) -> tuple[Path, Path]:
    """Write per-``d`` errors of each method on the dense grid, plus a sidecar
    CSV with the three routing boundaries.  Returns both paths."""
    methods = [Method(m) for m in methods]
    cases = suite_dense(limit, step, cfg)
    refs = reference_vols(cases, cfg)
    columns = [score_cases(cases, m, cfg, refs) for m in methods]
    path = Path(out)
    sidecar = path.with_name(path.stem + ".boundaries.csv")
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d"] + [m.value for m in methods])
            for i, case in enumerate(cases):
                w.writerow([_g17(case.d)] + [_g17(col[i].error) for col in columns])
        with sidecar.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["boundary", "d"])
            for name, d in boundary_d_locations(cfg):
                w.writerow([name, _g17(d)])
    except OSError as exc:
        raise OSError(f"cannot write profile {exc.filename or path}: {exc.strerror or exc}") from exc
    return path, sidecar
