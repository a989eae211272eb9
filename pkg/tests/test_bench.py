import csv
import io
import math
from collections import Counter
from types import SimpleNamespace

import pytest

from normalvol import bench
from normalvol.bench import BenchConfig, default_pool, results_csv, rotation, run_bench
from normalvol.errors import ClockResolution
from normalvol.inversion import KERNELS, BranchTag, Method, branch


def small(**kw):
    kw.setdefault("rounds", 4)
    kw.setdefault("calls_per_round", 3000)
    kw.setdefault("warmup_rounds", 1)
    return BenchConfig(**kw)


class TestRotation:
    def test_two_methods(self):
        assert rotation(4, 2) == [[0, 1], [1, 0], [0, 1], [1, 0]]

    def test_fifty_rounds_split_evenly(self):
        leads = Counter(order[0] for order in rotation(50, 2))
        assert leads == {0: 25, 1: 25}

    def test_every_round_is_a_permutation(self):
        for order in rotation(7, 3):
            assert sorted(order) == [0, 1, 2]


class TestPool:
    def test_every_branch_equally(self):
        pool = default_pool()
        counts = Counter(branch(q, Method.LFK2026C) for q in pool)
        assert set(counts) == set(BranchTag) - {BranchTag.ITM}
        assert set(counts.values()) == {bench.POOL_PER_STRATUM}

    def test_all_three_zones_for_lfk2026(self):
        tags = {branch(q, Method.LFK2026) for q in default_pool()}
        assert {BranchTag.OTM_ZONE1, BranchTag.OTM_ZONE2, BranchTag.OTM_ZONE3} <= tags

    def test_seeded(self):
        assert default_pool(16) == default_pool(16)
        assert default_pool(16, seed=1) != default_pool(16)


class TestConfig:
    def test_defaults(self, monkeypatch):
        for name in (bench.ENV_ROUNDS, bench.ENV_CALLS, bench.ENV_WARMUP):
            monkeypatch.delenv(name, raising=False)
        cfg = BenchConfig.from_env()
        assert (cfg.rounds, cfg.calls_per_round, cfg.warmup_rounds) == (50, 1_000_000, 5)

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv(bench.ENV_ROUNDS, "7")
        monkeypatch.setenv(bench.ENV_CALLS, "1e4")
        monkeypatch.setenv(bench.ENV_WARMUP, "0")
        cfg = BenchConfig.from_env()
        assert (cfg.rounds, cfg.calls_per_round, cfg.warmup_rounds) == (7, 10_000, 0)

    def test_explicit_beats_env(self, monkeypatch):
        monkeypatch.setenv(bench.ENV_ROUNDS, "7")
        assert BenchConfig.from_env(rounds=3, calls_per_round=None).rounds == 3

    def test_bad_env(self, monkeypatch):
        monkeypatch.setenv(bench.ENV_CALLS, "lots")
        with pytest.raises(ValueError):
            BenchConfig.from_env()

    @pytest.mark.parametrize("kw", [{"rounds": 0}, {"calls_per_round": 0},
                                    {"warmup_rounds": -1}, {"input_pool": []}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            BenchConfig(**kw)


class TestRunBench:
    def test_shape(self):
        results = run_bench(small())
        assert [r.method for r in results] == ["lfk2026", "lfk2026c"]
        for r in results:
            assert len(r.per_round_ns) == 4
            assert r.median_ns_per_call > 0.0

    def test_checksum_is_sum_of_outputs(self):
        cfg = small(rounds=2, calls_per_round=500)
        args = [(q.m, q.c_otm, q.T) for q in cfg.input_pool[:500]]
        results = run_bench(cfg)
        for r, method in zip(results, Method):
            assert r.checksum == sum(KERNELS[method](*a) for a in args)

    def test_checksums_deterministic(self):
        a = [r.checksum for r in run_bench(small())]
        b = [r.checksum for r in run_bench(small(rounds=2))]
        assert a == b

    def test_pool_cycles(self):
        pool = default_pool(2)
        results = run_bench(small(input_pool=pool, calls_per_round=1000))
        assert all(math.isfinite(r.checksum) for r in results)

    def test_callable_method(self):
        def doubled(m, c, T):
            return 2.0 * KERNELS[Method.LFK2026](m, c, T)

        doubled.name = "doubled"
        r0, r1 = run_bench(small(rounds=1), [Method.LFK2026, doubled])
        assert r1.method == "doubled" and r1.checksum == pytest.approx(2 * r0.checksum, rel=1e-15)

    def test_string_methods(self):
        assert [r.method for r in run_bench(small(rounds=1), ["lfk2026c"])] == ["lfk2026c"]

    def test_no_methods(self):
        with pytest.raises(ValueError):
            run_bench(small(), [])

    def test_clock_too_coarse(self, monkeypatch):
        monkeypatch.setattr(bench.time, "get_clock_info", lambda name: SimpleNamespace(resolution=1.0))
        with pytest.raises(ClockResolution):
            run_bench(small(rounds=1))


def test_results_csv():
    results = [bench.BenchResult("lfk2026", 800.0, (800.0,), 1.0),
               bench.BenchResult("lfk2026c", 760.0, (760.0,), 1.0)]
    rows = list(csv.reader(io.StringIO(results_csv(results))))
    assert rows == [["method", "median_ns_per_call", "relative_to_first"],
                    ["lfk2026", "800", "1"],
                    ["lfk2026c", "760", "0.94999999999999996"]]
