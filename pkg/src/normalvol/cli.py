"""Command-line entry point: ``normalvol {price,invert,validate,profile,bench}``.

Exit codes: 0 success, 1 accuracy threshold breached, 2 usage error,
3 domain error (bad maturity, price below intrinsic, ...), 4 oracle failure.
Numbers are printed with 17 significant digits so they read back bit-exactly.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

from . import harness
from .baseline import BaselineFormatError, load_baseline
from .bench import BenchConfig, results_csv, run_bench
from .errors import ClockResolution, NoConvergence
from .inversion import Method, branch, implied_vol, route
from .oracle import OracleConfig
from .pricing import OptionQuote, bachelier_call, bachelier_put, normalize, otm_time_value

EXIT_OK = 0
EXIT_BREACH = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_ORACLE = 4


def _g17(x: float) -> str:
    return f"{x:.17g}"


def _finite(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return x


def _precision(text: str) -> int:
    try:
        bits = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if bits < 256:
        raise argparse.ArgumentTypeError(f"precision must be at least 256 bits, got {bits}")
    return bits


def _count(minimum: int):
    def parse(text: str) -> int:
        try:
            n = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if n < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}, got {n}")
        return n

    return parse


def cmd_price(args: argparse.Namespace) -> int:
    F, K, sigma, T = args.forward, args.strike, args.vol, args.maturity
    price = (bachelier_put if args.put else bachelier_call)(F, K, sigma, T)
    m = abs(F - K)
    tv = otm_time_value(m, sigma, T) if sigma > 0.0 else 0.0
    print(f"price {_g17(price)}")
    print(f"otm_time_value {_g17(tv)}")
    return EXIT_OK


def cmd_invert(args: argparse.Namespace) -> int:
    q = OptionQuote(args.forward, args.strike, args.maturity, is_call=not args.put)
    method = Method(args.method)
    sigma = implied_vol(q, args.price, method)
    nq = normalize(q, args.price)
    tag = branch(nq, method)
    _, value = route(nq)
    name = "u" if tag.is_itm else "eta" if tag.is_otm else "none"
    print(f"sigma {_g17(sigma)}")
    print(f"branch {tag.value}")
    print(f"routing {name} {_g17(value)}")
    return EXIT_OK


def _suites(name: str) -> list[str]:
    return list(harness.SUITES) if name == "all" else [name]


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = OracleConfig(precision_bits=args.precision_bits)
    methods = [Method(args.method)] if args.method else list(Method)
    rows: list[harness.ReportRow] = []
    breached: list[str] = []
    for suite in _suites(args.suite):
        cases = harness.build_suite(suite, cfg)
        refs = harness.reference_vols(cases, cfg)
        for method in methods:
            stats = harness.run_suite(cases, method, cfg, refs)
            problems = harness.breaches(suite, stats)
            if suite == "adversarial":
                bad = harness.totality_failures(cases, method)
                problems += [f"totality failure: {i}" for i in bad]
            rows.append(harness.ReportRow(suite, method.value, stats, tuple(problems)))
            breached += [f"{suite}/{method.value}: {p}" for p in problems]
    md = harness.markdown_report(rows)
    print(md, end="")
    if args.out:
        out = Path(args.out)
        harness.write_csv_report(rows, out)
        out.with_suffix(".md").write_text(md)
    for line in breached:
        print(f"BREACH {line}", file=sys.stderr)
    return EXIT_BREACH if breached else EXIT_OK


def cmd_profile(args: argparse.Namespace) -> int:
    cfg = OracleConfig(precision_bits=args.precision_bits)
    path, sidecar = harness.emit_profile(args.limit, args.step, list(Method), args.out, cfg)
    print(f"profile {path}")
    print(f"boundaries {sidecar}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = BenchConfig.from_env(rounds=args.rounds, calls_per_round=args.calls, warmup_rounds=args.warmup)
    methods: list = list(Method)
    if args.baseline:
        methods.insert(0, load_baseline(args.baseline))
    results = run_bench(cfg, methods)
    print(results_csv(results), end="")
    for r in results:
        print(f"# checksum {r.method} {_g17(r.checksum)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="normalvol", description="Bachelier implied volatility tools.")
    sub = p.add_subparsers(dest="command", required=True)
    methods = [m.value for m in Method]

    sp = sub.add_parser("price", help="Bachelier price and OTM time value")
    sp.add_argument("--forward", type=_finite, required=True)
    sp.add_argument("--strike", type=_finite, required=True)
    sp.add_argument("--vol", type=_finite, required=True)
    sp.add_argument("--maturity", type=_finite, required=True)
    sp.add_argument("--put", action="store_true")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("invert", help="implied normal volatility of a quote")
    sp.add_argument("--forward", type=_finite, required=True)
    sp.add_argument("--strike", type=_finite, required=True)
    sp.add_argument("--maturity", type=_finite, required=True)
    sp.add_argument("--price", type=_finite, required=True)
    sp.add_argument("--put", action="store_true")
    sp.add_argument("--method", choices=methods, default=Method.LFK2026C.value)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("validate", help="run accuracy suites against the oracle")
    sp.add_argument("--suite", choices=("all",) + harness.SUITES, default="all")
    sp.add_argument("--method", choices=methods, default=None, help="default: both")
    sp.add_argument("--precision-bits", type=_precision, default=512)
    sp.add_argument("--out", default=None, help="CSV report path; markdown goes next to it")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("profile", help="per-d error profile on a dense grid")
    sp.add_argument("--limit", type=float, choices=(8.0, 30.0), required=True)
    sp.add_argument("--step", type=float, default=harness.DENSE_STEP)
    sp.add_argument("--out", required=True)
    sp.add_argument("--precision-bits", type=_precision, default=512)
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("bench", help="rotated-order timing")
    sp.add_argument("--rounds", type=_count(1), default=None)
    sp.add_argument("--calls", type=_count(1), default=None)
    sp.add_argument("--warmup", type=_count(0), default=None)
    sp.add_argument("--baseline", default=None, help="LFK-4 coefficient file to time as well")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except NoConvergence as exc:
        print(f"error: oracle failed: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ClockResolution, BaselineFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        # ArbitrageViolation and NonPositiveMaturity are ValueErrors too
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
