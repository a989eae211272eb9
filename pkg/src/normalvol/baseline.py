"""Optional LFK-4 comparison method built from an external coefficient file.

No LFK-4 coefficients ship with this package.  A file supplies them in
sections, one coefficient per line::

    [itm]
    a0 2.5066282746310002
    a1 ...
    b0 1
    ...
    [otm1]
    ...
    [otm2]
    ...
    [otm3]
    ...
    [routing]          # optional
    beta_e 690.77552789821368
    zone1 0.011
    zone2 0.105

Routing follows the original algorithm.  For ``g > 0.15`` the ITM rational
is evaluated in ``eta = -z/ln(1-z)`` with ``z = m/(m + c)``, and the result is
``(m + c)/sqrt(T) * h(eta)``.  Otherwise the zone rationals give ``d**2`` in the
shifted log variable, so ``sigma = m / sqrt(T * h)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

from .inversion import ALPHA, BETA_S, RationalFunction, eval_rational
from .specfun import SQRT_2PI

_SECTIONS = ("itm", "otm1", "otm2", "otm3")
_ROUTING_KEYS = ("beta_e", "zone1", "zone2")
_LINE = re.compile(r"^([ab])(\d+)\s+(\S+)$")

# below this z the log1p form of eta loses digits to the division; the series
# truncation error is under z**5/30
TAYLOR_Z = 5e-4


class BaselineFormatError(ValueError):
    pass


def eta_lfk4(z: float) -> float:
    """``-z / ln(1 - z)`` for ``0 <= z < 1``."""
    if z < TAYLOR_Z:
        return 1.0 - z * (1.0 / 2.0 + z * (1.0 / 12.0 + z * (1.0 / 24.0 + z * (19.0 / 720.0))))
    return -z / math.log1p(-z)


@dataclass(frozen=True)
class Baseline:
    name: str
    itm: RationalFunction
    otm: tuple[RationalFunction, RationalFunction, RationalFunction]
    beta_e: float = 300.0 * math.log(10.0)
    zone1: float = 0.011
    zone2: float = 0.105

    def __call__(self, m: float, c: float, T: float) -> float:
        if m == 0.0:
            return c * SQRT_2PI / math.sqrt(T)
        if c == 0.0:
            return 0.0
        if c / m > ALPHA:
            z = m / (m + c)
            return (m + c) / math.sqrt(T) * eval_rational(self.itm, eta_lfk4(z))
        lg = math.log(c) - math.log(m) if c / m == 0.0 else math.log(c / m)
        eta = -(lg + BETA_S) / (self.beta_e - BETA_S)
        zone = 0 if eta < self.zone1 else 1 if eta < self.zone2 else 2
        return m / math.sqrt(T * eval_rational(self.otm[zone], eta))


def _rational(section: str, coefs: dict[str, dict[int, str]]) -> RationalFunction:
    parts = []
    for side in ("a", "b"):
        got = coefs.get(side, {})
        if not got:
            raise BaselineFormatError(f"section [{section}] has no {side} coefficients")
        n = max(got) + 1
        missing = [i for i in range(n) if i not in got]
        if missing:
            raise BaselineFormatError(f"section [{section}] is missing {side}{missing[0]}")
        parts.append([got[i] for i in range(n)])
    try:
        return RationalFunction.from_literals(*parts)
    except ValueError as exc:
        raise BaselineFormatError(f"section [{section}]: {exc}") from exc


def _number(text: str, path: Path, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise BaselineFormatError(f"{path}:{lineno}: not a number: {text!r}") from None


def load_baseline(path: str | Path, name: str = "lfk4") -> Baseline:
    path = Path(path)
    sections: dict[str, dict[str, dict[int, str]]] = {}
    routing: dict[str, float] = {}
    current = None
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS and current != "routing":
                raise BaselineFormatError(f"{path}:{lineno}: unknown section [{current}]")
            continue
        if current is None:
            raise BaselineFormatError(f"{path}:{lineno}: entry outside a section")
        if current == "routing":
            key, _, value = line.partition(" ")
            if key not in _ROUTING_KEYS:
                raise BaselineFormatError(f"{path}:{lineno}: unknown routing key {key!r}")
            routing[key] = _number(value, path, lineno)
            continue
        mt = _LINE.match(line)
        if mt is None:
            raise BaselineFormatError(f"{path}:{lineno}: expected 'a<i> value' or 'b<i> value'")
        side, idx, literal = mt.group(1), int(mt.group(2)), mt.group(3)
        _number(literal, path, lineno)  # reject junk early, with the line number
        sections.setdefault(current, {}).setdefault(side, {})[idx] = literal
    missing = [s for s in _SECTIONS if s not in sections]
    if missing:
        raise BaselineFormatError(f"{path}: missing section [{missing[0]}]")
    return Baseline(
        name,
        _rational("itm", sections["itm"]),
        tuple(_rational(s, sections[s]) for s in _SECTIONS[1:]),
        **routing,
    )
