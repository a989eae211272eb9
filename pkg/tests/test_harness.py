import csv
import math
from fractions import Fraction

import mpmath
import pytest

from normalvol import harness as h
from normalvol.errors import DegenerateWindow
from normalvol.harness import CaseResult, ErrorStats, Provenance, TestCase
from normalvol.inversion import Method, branch
from normalvol.oracle import reference_vol
from normalvol.pricing import NormalizedQuote, otm_time_value


class TestUlpWindow:
    def test_three_around_one(self):
        assert h.ulp_window(1.0, 3) == [1.0 - 2.0**-53, 1.0, 1.0 + 2.0**-52]

    def test_single(self):
        assert h.ulp_window(0.3, 1) == [0.3]

    def test_default_is_centred_and_consecutive(self):
        p = 0.08331547058768629
        w = h.ulp_window(p)
        assert len(w) == 256
        assert w[128] == p
        assert all(math.nextafter(a, math.inf) == b for a, b in zip(w, w[1:]))

    @pytest.mark.parametrize("p", [5e-324, 1e-322])
    def test_reaches_zero(self, p):
        with pytest.raises(DegenerateWindow):
            h.ulp_window(p)

    def test_reaches_infinity(self):
        with pytest.raises(DegenerateWindow):
            h.ulp_window(1.7976931348623157e308)

    @pytest.mark.parametrize("p", [0.0, -1.0, math.inf, math.nan])
    def test_bad_centre(self, p):
        with pytest.raises(ValueError):
            h.ulp_window(p)


class TestDenseGrid:
    @pytest.mark.parametrize("limit,n", [(8.0, 641), (30.0, 2401)])
    def test_sizes(self, limit, n):
        g = h.dense_grid(limit)
        assert len(g) == n
        assert g[0] == -limit and g[-1] == limit and g[n // 2] == 0.0

    def test_points_rounded_once(self):
        g = h.dense_grid(8.0)
        assert g[320 + 129] == float(Fraction(129, 40)) == 3.225

    def test_step_must_divide(self):
        with pytest.raises(ValueError):
            h.dense_grid(8.0, 0.3)


class TestSuiteSizes:
    def test_strike(self):
        cases = h.suite_strike_grid()
        assert len(cases) == 4096
        assert {c.provenance for c in cases} == {Provenance.STRIKE_GRID}

    def test_reflection(self):
        assert len(h.suite_deep_itm_reflection()) == 3072

    def test_direct(self):
        assert len(h.suite_direct_otm()) == 3840

    def test_dense8(self):
        assert len(h.suite_dense(8.0)) == 641

    def test_dense_limit_checked(self):
        with pytest.raises(ValueError):
            h.suite_dense(10.0)

    def test_fixed_tail(self):
        assert len(h.suite_fixed_tail()) == 29

    def test_adversarial_cross_product(self):
        cases = h.suite_adversarial()
        assert sum(c.id.startswith("adv/scaled/") for c in cases) == 5 * 5 * 5 * 9
        assert len({c.id for c in cases}) == len(cases)

    def test_unknown(self):
        with pytest.raises(ValueError):
            h.build_suite("nope")


class TestSuiteContents:
    def test_strike_signs(self):
        cases = h.suite_strike_grid()
        by_k = {c.id.split("/")[1]: c for c in cases}
        assert by_k["K=0.5"].sign == 1.0 and by_k["K=0.5"].d == 0.5
        assert by_k["K=2.0"].sign == -1.0 and by_k["K=2.0"].d == -1.0

    def test_direct_centre_is_pricer_output(self):
        cases = h.suite_direct_otm()
        centre = [c for c in cases if c.id == "direct/d=2.0/0"][0]
        assert centre.c_otm == otm_time_value(2.0, 1.0, 1.0) and centre.m == 2.0

    def test_dense_prices_correctly_rounded(self):
        # the dense grid carries the extended-precision price rounded once
        cases = {c.d: c for c in h.suite_fixed_tail()}
        for d in (1.0, 10.0, 35.0):
            exact = mpmath.npdf(d) - d * mpmath.ncdf(-d)
            assert cases[-d].c_otm == float(exact) == cases[d].c_otm

    def test_deterministic(self):
        assert h.suite_adversarial() == h.suite_adversarial()
        assert h.suite_strike_grid() == h.suite_strike_grid()

    def test_adversarial_degenerate_flags(self):
        for c in h.suite_adversarial():
            usable = math.isfinite(c.m) and math.isfinite(c.c_otm) and (c.m == 0.0 or c.c_otm > 0.0)
            if not usable:
                assert c.degenerate, c.id

    def test_subnormal_cases_present(self):
        ids = [c for c in h.suite_adversarial() if c.c_otm == 5e-324 and not c.degenerate]
        assert len(ids) == 3


class TestStraddles:
    def test_pairs_cross_each_boundary(self):
        pairs = h.straddle_pairs()
        assert len(pairs) == 4 * len(h.STRADDLE_ULPS)
        for name, lo, hi, method in pairs:
            b_lo = branch(NormalizedQuote(1.0, lo, 1.0), method)
            b_hi = branch(NormalizedQuote(1.0, hi, 1.0), method)
            assert b_lo != b_hi, name

    def test_adjacent_at_one_ulp(self):
        for name, lo, hi, _ in h.straddle_pairs():
            if name.endswith("/1"):
                assert math.nextafter(lo, math.inf) == hi

    def test_boundary_d_locations(self):
        # independent: solve phi(a) - a*Phi(-a) = g*a for each routing g
        from normalvol.inversion import BETA_S, BETA_SPAN

        targets = {"g=alpha": mpmath.log(mpmath.mpf("0.15")),
                   "eta=0.011": -(BETA_S + 0.011 * BETA_SPAN),
                   "eta=0.105": -(BETA_S + 0.105 * BETA_SPAN)}
        got = dict(h.boundary_d_locations())
        assert set(got) == set(targets)
        for name, lg in targets.items():
            f = lambda a: mpmath.log(mpmath.npdf(a) - a * mpmath.ncdf(-a)) - mpmath.log(a) - lg
            a = mpmath.findroot(f, -got[name])
            assert abs(got[name] + float(a)) < 1e-12, name
        assert got["g=alpha"] == pytest.approx(-0.8006, abs=1e-4)
        assert got["eta=0.105"] == pytest.approx(-11.486, abs=1e-3)


def _case(i, err_m=1.0, sign=-1.0):
    c = otm_time_value(err_m, 1.0, 1.0)
    return TestCase(f"t/{i}", err_m, c, 1.0, Provenance.DIRECT_OTM, sign, -err_m)


class TestAggregate:
    def test_nearest_rank(self):
        xs = [float(i) for i in range(1, 101)]
        assert h.nearest_rank(xs, 0.99) == 99.0
        assert h.nearest_rank(xs[:10], 0.99) == 10.0
        assert h.nearest_rank([7.0], 0.99) == 7.0

    def test_identical_errors(self):
        cases = [_case(i) for i in range(5)]
        refs = [reference_vol(c.m, c.c_otm, 1.0) for c in cases]
        stats = h.aggregate([CaseResult(c, 1.0, 3e-16) for c in cases], references=refs)
        assert stats.max_error == stats.p99 == 3e-16
        assert stats.sample_count == 5

    def test_tie_goes_to_first(self):
        a, b = _case(0, 1.0, -1.0), _case(1, 2.0, 1.0)
        results = [CaseResult(a, 1.0, 1e-16), CaseResult(b, 1.0, 1e-16)]
        stats = h.aggregate(results)
        assert stats.worst_d == pytest.approx(-1.0, abs=1e-15)

    def test_degenerate_ignored(self):
        a = _case(0)
        stats = h.aggregate([CaseResult(a, 1.0, 2e-16), CaseResult(a, math.nan, None)])
        assert stats.sample_count == 1

    def test_nothing_scored(self):
        with pytest.raises(ValueError):
            h.aggregate([CaseResult(_case(0), math.nan, None)])

    def test_run_suite_empty(self):
        with pytest.raises(ValueError):
            h.run_suite([], Method.LFK2026)


@pytest.fixture(scope="module")
def window():
    return [c for c in h.suite_direct_otm() if c.id.startswith("direct/d=-2.0/")]


@pytest.fixture(scope="module")
def refs(window):
    return h.reference_vols(window)


class TestRunSuite:
    def test_shared_references(self, window, refs):
        a = h.run_suite(window, Method.LFK2026, references=refs)
        b = h.run_suite(window, Method.LFK2026)
        assert a == b

    def test_within_direct_threshold(self, window, refs):
        for method in Method:
            stats = h.run_suite(window, method, references=refs)
            assert stats.sample_count == 256
            assert stats.max_error <= 1.5e-15
            assert stats.worst_d == pytest.approx(-2.0, abs=1e-12)

    def test_otm_errors_identical(self, window, refs):
        e1 = [r.error for r in h.score_cases(window, Method.LFK2026, references=refs)]
        e2 = [r.error for r in h.score_cases(window, Method.LFK2026C, references=refs)]
        assert e1 == e2

    def test_reference_dedup_matches_fresh_solve(self, window, refs):
        for i in (0, 100, 255):
            c = window[i]
            assert refs[i] == reference_vol(c.m, c.c_otm, c.T)

    def test_degenerate_case_scored_for_totality_only(self):
        bad = TestCase("t/bad", 1.0, 0.0, 1.0, Provenance.ADVERSARIAL, degenerate=True)
        (r,) = h.score_cases([bad], Method.LFK2026C)
        assert r.error is None and r.sigma == 0.0


class TestTotality:
    @pytest.mark.parametrize("method", list(Method))
    def test_adversarial(self, method):
        assert h.totality_failures(h.suite_adversarial(), method) == []

    def test_untyped_error_is_a_failure(self):
        case = TestCase("t/nan", math.nan, 1.0, 1.0, Provenance.ADVERSARIAL)
        assert h.totality_failures([case], Method.LFK2026) == ["t/nan"]


class TestThresholds:
    def test_pass(self):
        assert h.breaches("dense8", ErrorStats(1.2e-16, 1e-16, -3.225, 641)) == []

    def test_worst_d_far(self):
        out = h.breaches("dense8", ErrorStats(1.2e-16, 1e-16, -3.4, 641))
        assert len(out) == 1 and "worst d" in out[0]

    def test_max_and_p99(self):
        out = h.breaches("direct", ErrorStats(2e-15, 1.1e-15, 0.0, 3840))
        assert len(out) == 2

    def test_nan_is_a_breach(self):
        assert h.breaches("strike", ErrorStats(math.nan, math.nan, 0.0, 1))

    def test_adversarial_has_no_accuracy_bound(self):
        assert h.breaches("adversarial", ErrorStats(1.0, 1.0, 0.0, 1)) == []


class TestReports:
    ROWS = [h.ReportRow("dense8", "lfk2026", ErrorStats(1.140904727642198e-16, 1.0946879943049582e-16, -3.225, 641))]

    def test_csv_round_trip(self, tmp_path):
        p = tmp_path / "r.csv"
        h.write_csv_report(self.ROWS, p)
        rows = list(csv.reader(p.open()))
        assert rows[0] == list(h.REPORT_HEADER)
        assert rows[1][:3] == ["dense8", "lfk2026", "641"]
        assert float(rows[1][3]) == 1.140904727642198e-16
        assert float(rows[1][4]) == 1.0946879943049582e-16

    def test_csv_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            h.write_csv_report(self.ROWS, tmp_path / "missing" / "r.csv")

    def test_markdown(self):
        md = h.markdown_report(self.ROWS).splitlines()
        assert md[0] == "| Suite | Method | Samples | Max Error | P99 | Worst d |"
        assert md[2].startswith("| dense8 | lfk2026 | 641 | 1.140904727642198e-16 |")


class TestProfile:
    def test_coarse_profile(self, tmp_path):
        path, sidecar = h.emit_profile(8.0, 1.0, out=tmp_path / "p.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["d", "lfk2026", "lfk2026c"]
        assert len(rows) == 1 + 17
        assert [float(r[0]) for r in rows[1:]] == [float(k) for k in range(-8, 9)]
        for r in rows[1:]:
            e1, e2 = float(r[1]), float(r[2])
            assert 0.0 <= e1 < 2.5e-16 and 0.0 <= e2 < 2.5e-16
        side = list(csv.reader(sidecar.open()))
        assert side[0] == ["boundary", "d"] and len(side) == 4
        assert sidecar.name == "p.boundaries.csv"

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            h.emit_profile(8.0, 4.0, out=tmp_path / "missing" / "p.csv")
