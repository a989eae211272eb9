import math
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest


@pytest.fixture(autouse=True)
def _mp_precision():
    # mpmath is the tests' own high-precision reference, independent of the
    # package's gmpy2 oracle
    with mpmath.workprec(256):
        yield


def ulps(x: float, ref) -> float:
    """Distance from ``x`` to ``ref`` in units of ``ulp(ref)``."""
    r = float(ref)
    return float(abs(mpmath.mpf(x) - mpmath.mpf(ref))) / math.ulp(r)


def rel(x, ref) -> float:
    return float(abs(mpmath.mpf(x) / mpmath.mpf(ref) - 1))


def mp_time_value(m, sigma=1.0, T=1.0):
    """``v*phi(a) - m*Phi(-a)`` in mpmath."""
    v = mpmath.mpf(sigma) * mpmath.sqrt(mpmath.mpf(T))
    if m == 0:
        return v / mpmath.sqrt(2 * mpmath.pi)
    a = mpmath.mpf(m) / v
    return v * mpmath.npdf(a) - mpmath.mpf(m) * mpmath.ncdf(-a)


DATA = Path(__file__).parent / "data" / "published_coefficients.txt"


def load_tables(path=DATA):
    tables, name = {}, None
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("table "):
            name = line.split()[1]
            tables[name] = ([], [])
            continue
        _, a, b = line.split()
        if a != "-":
            tables[name][0].append(a)
        if b != "-":
            tables[name][1].append(b)
    return tables


def correctly_rounded(literal: str) -> float:
    # Decimal -> Fraction -> float rounds exactly once, independent of float()
    return float(Fraction(Decimal(literal)))


# --- acceptance report: one PASS/FAIL line per criterion ---

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")
    config.stash[_CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    n, title = mark.args
    entry = item.config.stash[_CRITERIA].setdefault(n, {"title": title, "ok": True, "details": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["details"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_CRITERIA]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        r = results[n]
        line = f"criterion {n:2d} {'PASS' if r['ok'] else 'FAIL'}  {r['title']}"
        if r["details"]:
            line += "  [" + "; ".join(r["details"]) + "]"
        terminalreporter.write_line(line)
