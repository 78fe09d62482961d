"""Circuit elements and exact angle arithmetic.

Beam splitter convention: the 2x2 matrix on (m1, m2) is

    [[cos t,  i sin t],
     [i sin t, cos t]]

so composing equal-mode splitters adds angles exactly, which is what makes the
chained-interferometer survival laws exact.  Blockers are unitary swaps
between a path mode and a dedicated absorption sink, which gives them the
correct adjoint for free: backward-evolving amplitude at the blocked segment
is diverted into the sink exactly as forward amplitude is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

BLOCK_ALWAYS = "always"
BLOCK_WHEN_PLATE_PRESENT = "plate"


@dataclass(frozen=True)
class Angle:
    """A rotation angle, kept as an exact multiple of pi when possible.

    Pi-fractions are evaluated as ``(num * pi) / den`` in one canonical way so
    a builder angle and its parsed text form produce bit-identical matrices.
    """

    num: int | None = None
    den: int = 1
    raw: float = 0.0

    @staticmethod
    def pi_frac(num: int, den: int = 1) -> "Angle":
        if den == 0:
            raise ValueError("zero denominator")
        f = Fraction(num, den)
        return Angle(num=f.numerator, den=f.denominator)

    @staticmethod
    def radians(value: float) -> "Angle":
        return Angle(num=None, raw=float(value))

    @property
    def value(self) -> float:
        if self.num is None:
            return self.raw
        return (self.num * math.pi) / self.den

    def __neg__(self) -> "Angle":
        if self.num is None:
            return Angle.radians(-self.raw)
        return Angle.pi_frac(-self.num, self.den)

    def __str__(self) -> str:
        if self.num is None:
            return repr(self.raw)
        num, den = self.num, self.den
        sign = "-" if num < 0 else ""
        num = abs(num)
        head = "pi" if num == 1 else f"{num}pi"
        return f"{sign}{head}" if den == 1 else f"{sign}{head}/{den}"


@dataclass(frozen=True)
class BeamSplitter:
    m1: str
    m2: str
    theta: Angle

    def modes(self) -> tuple[str, ...]:
        return (self.m1, self.m2)

    def adjoint(self) -> "BeamSplitter":
        return BeamSplitter(self.m1, self.m2, -self.theta)


@dataclass(frozen=True)
class PhaseShift:
    m: str
    phi: Angle

    def modes(self) -> tuple[str, ...]:
        return (self.m,)

    def adjoint(self) -> "PhaseShift":
        return PhaseShift(self.m, -self.phi)


@dataclass(frozen=True)
class Blocker:
    """Opaque object at mode ``m``: swaps amplitude with its sink.

    ``control`` is "always" for a classical object or "plate" for one whose
    presence is the plate qubit (the swap then acts on the plate-present
    component only).  ``sink`` is the sink mode label, assigned when the
    circuit is assembled; a swap is self-adjoint, so blockers invert to maps
    from the sink back onto the path.
    """

    m: str
    control: str = BLOCK_ALWAYS
    sink: str | None = None

    def __post_init__(self):
        if self.control not in (BLOCK_ALWAYS, BLOCK_WHEN_PLATE_PRESENT):
            raise ValueError(f"unknown blocker control {self.control!r}")

    def modes(self) -> tuple[str, ...]:
        return (self.m,) if self.sink is None else (self.m, self.sink)

    def adjoint(self) -> "Blocker":
        return self


@dataclass(frozen=True)
class Route:
    """Moves amplitude from m1 to m2 (a swap; the target is expected empty)."""

    m1: str
    m2: str

    def modes(self) -> tuple[str, ...]:
        return (self.m1, self.m2)

    def adjoint(self) -> "Route":
        return self


Element = BeamSplitter | PhaseShift | Blocker | Route
