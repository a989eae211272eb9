import math

import mpmath
import pytest

from normalvol.baseline import TAYLOR_Z, BaselineFormatError, eta_lfk4, load_baseline
from normalvol.pricing import otm_time_value

# synthetic coefficients: the ITM rational is the constant sqrt(2 pi) and each
# OTM rational is 1/(1 + eta), which is enough to check the plumbing
SYNTHETIC = """\
# not real LFK-4 coefficients
[itm]
a0 2.5066282746310002
b0 1
[otm1]
a0 1
b0 1
b1 1
[otm2]
a0 2
b0 1
b1 1
[otm3]
a0 3
b0 1
b1 1
"""


@pytest.fixture
def path(tmp_path):
    p = tmp_path / "lfk4.txt"
    p.write_text(SYNTHETIC)
    return p


def mp_eta(z):
    z = mpmath.mpf(z)
    return -z / mpmath.log(1 - z)


class TestEta:
    @pytest.mark.parametrize("z", [0.0, 1e-12, 1e-6, 4.9e-4, 5e-4, 0.01, 0.3, 0.87, 0.999])
    def test_against_mpmath(self, z):
        ref = mp_eta(z) if z else mpmath.mpf(1)
        assert abs(eta_lfk4(z) / ref - 1) < 4e-16

    def test_continuous_at_switch(self):
        below = eta_lfk4(math.nextafter(TAYLOR_Z, 0.0))
        assert abs(below / eta_lfk4(TAYLOR_Z) - 1) < 4e-16


class TestLoad:
    def test_evaluates(self, path):
        b = load_baseline(path)
        assert b.name == "lfk4"
        # ATM
        assert b(0.0, 0.3989422804014327, 1.0) == pytest.approx(1.0, rel=1e-15)
        # ITM branch: g = 1 > 0.15, sigma = (m + c) * a0 / sqrt(T)
        assert b(1.0, 1.0, 4.0) == pytest.approx(2.5066282746310002, rel=1e-15)
        # OTM zone 1: h = 1/(1 + eta)
        m, c = 1.0, otm_time_value(1.0, 1.0, 1.0)
        eta = -(math.log(c / m) + 1.8971199848858813) / (690.7755278982137 - 1.8971199848858813)
        assert b(m, c, 1.0) == pytest.approx(m / math.sqrt(1.0 / (1.0 + eta)), rel=1e-14)

    def test_zone_selection(self, path):
        b = load_baseline(path)
        m = 1.0
        for eta, k in ((0.05, 2.0), (0.5, 3.0)):
            c = m * math.exp(-(1.8971199848858813 + eta * 688.8784079133278))
            assert b(m, c, 1.0) == pytest.approx(m / math.sqrt(k / (1.0 + eta)), rel=1e-12)

    def test_routing_section(self, path):
        path.write_text(SYNTHETIC + "[routing]\nzone1 0.02\nzone2 0.2\n")
        b = load_baseline(path, name="x")
        assert (b.name, b.zone1, b.zone2) == ("x", 0.02, 0.2)
        c = math.exp(-(1.8971199848858813 + 0.015 * 688.8784079133278))
        assert b(1.0, c, 1.0) == pytest.approx(1.0 / math.sqrt(1.0 / 1.015), rel=1e-12)

    def test_zero_time_value(self, path):
        assert load_baseline(path)(2.0, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("text,msg", [
    (SYNTHETIC.replace("[otm3]", "[otm9]"), "unknown section"),
    (SYNTHETIC.replace("[otm3]\na0 3\nb0 1\nb1 1\n", ""), "missing section"),
    ("a0 1\n" + SYNTHETIC, "outside a section"),
    (SYNTHETIC.replace("a0 2\n", "a0 2 3\n"), "expected"),
    (SYNTHETIC.replace("a0 2\n", "a0 two\n"), "not a number"),
    (SYNTHETIC.replace("b1 1\n", "b2 1\n", 1), "missing b1"),
    (SYNTHETIC + "[routing]\nzone9 1\n", "unknown routing key"),
    (SYNTHETIC + "[routing]\nzone1 x\n", "not a number"),
])
def test_format_errors(tmp_path, text, msg):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(BaselineFormatError, match=msg):
        load_baseline(p)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_baseline(tmp_path / "absent.txt")
