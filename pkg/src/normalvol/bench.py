"""Rotated-order scalar timing of the explicit inversions.

Each round times every method over the same input pool; the method that goes
first rotates from round to round.  Only whole rounds are timed and the
per-call figure is round time divided by call count.  Absolute numbers depend
on the machine and interpreter, the ordering is what is worth comparing.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import random
import statistics
import time
from dataclasses import dataclass, field
from itertools import cycle, islice, starmap
from typing import Callable, Sequence

from .errors import ClockResolution
from .inversion import BETA_S, BETA_SPAN, KERNELS, BranchTag, Method, branch
from .pricing import NormalizedQuote

log = logging.getLogger(__name__)

ENV_ROUNDS = "NORMALVOL_BENCH_ROUNDS"
ENV_CALLS = "NORMALVOL_BENCH_CALLS"
ENV_WARMUP = "NORMALVOL_BENCH_WARMUP"

POOL_SEED = 20260
POOL_PER_STRATUM = 1024

# (tag, sampler) pairs; each sampler maps (rng, m) to a time value
_STRATA = (
    (BranchTag.ATM_EXACT, lambda rng, m: rng.uniform(0.01, 2.0)),
    (BranchTag.ITM_LOW_U, lambda rng, m: m / rng.uniform(1e-3, 0.2)),
    (BranchTag.ITM_HIGH_U, lambda rng, m: m / rng.uniform(0.2, 6.6)),
    (BranchTag.OTM_ZONE1, lambda rng, m: m * math.exp(-(BETA_S + rng.uniform(0.0, 0.011) * BETA_SPAN))),
    (BranchTag.OTM_ZONE2, lambda rng, m: m * math.exp(-(BETA_S + rng.uniform(0.011, 0.105) * BETA_SPAN))),
    (BranchTag.OTM_ZONE3, lambda rng, m: m * math.exp(-(BETA_S + rng.uniform(0.105, 0.999) * BETA_SPAN))),
)


def default_pool(per_stratum: int = POOL_PER_STRATUM, seed: int = POOL_SEED) -> list[NormalizedQuote]:
    """Equal numbers of quotes from every branch, shuffled with a fixed seed."""
    rng = random.Random(seed)
    pool = []
    for tag, sample in _STRATA:
        for _ in range(per_stratum):
            m = 0.0 if tag is BranchTag.ATM_EXACT else rng.uniform(0.05, 3.0)
            T = rng.choice((0.25, 1.0, 5.0))
            q = NormalizedQuote(m, sample(rng, m), T)
            if branch(q, Method.LFK2026C) is not tag:
                raise RuntimeError(f"pool sampler for {tag.value} produced {q}")
            pool.append(q)
    rng.shuffle(pool)
    return pool


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return int(float(raw))
    except ValueError:
        raise ValueError(f"{name}={raw!r} is not an integer") from None


@dataclass
class BenchConfig:
    rounds: int = 50
    calls_per_round: int = 1_000_000
    warmup_rounds: int = 5
    input_pool: list[NormalizedQuote] = field(default_factory=default_pool)

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.calls_per_round < 1:
            raise ValueError(f"calls_per_round must be >= 1, got {self.calls_per_round}")
        if self.warmup_rounds < 0:
            raise ValueError(f"warmup_rounds must be >= 0, got {self.warmup_rounds}")
        if not self.input_pool:
            raise ValueError("input pool is empty")

    @classmethod
    def from_env(cls, **overrides) -> BenchConfig:
        """Defaults, then environment overrides, then explicit keyword values."""
        kw = {
            "rounds": _env_int(ENV_ROUNDS, cls.rounds),
            "calls_per_round": _env_int(ENV_CALLS, cls.calls_per_round),
            "warmup_rounds": _env_int(ENV_WARMUP, cls.warmup_rounds),
        }
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


@dataclass(frozen=True)
class BenchResult:
    method: str
    median_ns_per_call: float
    per_round_ns: tuple[float, ...]
    checksum: float


def rotation(rounds: int, k: int) -> list[list[int]]:
    """Method order per round: round ``r`` starts with method ``r mod k``."""
    return [[(r + j) % k for j in range(k)] for r in range(rounds)]


def _time_round(fn, args: Sequence[tuple[float, float, float]]) -> tuple[int, float]:
    # iterating in C keeps the shared loop overhead out of the comparison
    t0 = time.perf_counter_ns()
    total = sum(starmap(fn, args))
    return time.perf_counter_ns() - t0, total


class _Pinned:
    """Pin the process to one CPU where the platform allows it."""

    def __enter__(self):
        self.saved = None
        if not hasattr(os, "sched_getaffinity"):
            log.warning("cannot pin to a CPU on this platform; timings may be noisier")
            return self
        try:
            self.saved = os.sched_getaffinity(0)
            os.sched_setaffinity(0, {min(self.saved)})
        except OSError as exc:
            log.warning("CPU pinning failed (%s); timings may be noisier", exc)
            self.saved = None
        return self

    def __exit__(self, *exc):
        if self.saved is not None:
            os.sched_setaffinity(0, self.saved)
        return False


def _resolve(method) -> tuple[str, Callable[[float, float, float], float]]:
    # built-in method ids, or any callable with a ``name`` (e.g. a loaded baseline)
    if callable(method):
        return getattr(method, "name", getattr(method, "__name__", "custom")), method
    m = Method(method)
    return m.value, KERNELS[m]


def run_bench(cfg: BenchConfig | None = None,
              methods: Sequence = (Method.LFK2026, Method.LFK2026C)) -> list[BenchResult]:
    cfg = cfg or BenchConfig.from_env()
    if not methods:
        raise ValueError("no methods to benchmark")
    names, kernels = zip(*(_resolve(m) for m in methods))
    args = list(islice(cycle((q.m, q.c_otm, q.T) for q in cfg.input_pool), cfg.calls_per_round))
    resolution_ns = time.get_clock_info("perf_counter").resolution * 1e9

    per_round: list[list[float]] = [[] for _ in kernels]
    checksums = [0.0] * len(kernels)
    with _Pinned():
        for order in rotation(cfg.warmup_rounds, len(kernels)):
            for i in order:
                _time_round(kernels[i], args)
        for order in rotation(cfg.rounds, len(kernels)):
            for i in order:
                ns, total = _time_round(kernels[i], args)
                if resolution_ns > 0.01 * ns:
                    raise ClockResolution(
                        f"timer resolution {resolution_ns:.0f} ns exceeds 1% of a {ns} ns round; "
                        "raise calls_per_round"
                    )
                per_round[i].append(ns / cfg.calls_per_round)
                checksums[i] = total
    return [
        BenchResult(name, statistics.median(pr), tuple(pr), cs)
        for name, pr, cs in zip(names, per_round, checksums)
    ]


def results_csv(results: Sequence[BenchResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "median_ns_per_call", "relative_to_first"))
    first = results[0].median_ns_per_call if results else math.nan
    for r in results:
        w.writerow((r.method, f"{r.median_ns_per_call:.17g}", f"{r.median_ns_per_call / first:.17g}"))
    return buf.getvalue()
