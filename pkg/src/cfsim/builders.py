"""Canonical interferometers with their tuning conditions satisfied exactly.

Every builder returns an isometric circuit whose dark-port conditions hold to
machine precision, not approximately.  The recurring tuning ingredients:

* 50/50 splitters and quarter-turn phases make the plain interferometer's
  monitored port exactly dark when the arms are free.
* The three-arm (nested) interferometer is tuned so the photon state in the
  middle is (|A> + i|B> + |C>)/sqrt(3) and each arm couples to the monitored
  detector D with modulus 1/sqrt(3); blocking the designated arm makes D
  exactly dark, while the inner pair is dark toward the recombiner when free.
* Chained weak splitters of angle pi/2N rotate a photon completely from one
  rail to the other; putting an absorber on one rail freezes the photon on
  the other with survival probability cos^2N(pi/2N).
* The two-detector communication machine nests an absorbing chain inside
  each right arm of an outer chain, so an inserted object flips which
  detector fires while the photon (conditioned on detection) keeps clear of
  the object's segment.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .circuit import Circuit, CircuitBuilder, invert
from .elements import (
    BLOCK_ALWAYS,
    BLOCK_WHEN_PLATE_PRESENT,
    Angle,
    BeamSplitter,
    Blocker,
    PhaseShift,
    Route,
)
from .statespace import ModeId, ModeKind, ModeTable, Region

_PLATE = "plate"


@dataclass(frozen=True)
class ChainParams:
    """Outer chain length n and inner chain length m (where applicable)."""

    n: int
    m: int = 1

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError(f"chain lengths must be >= 1, got n={self.n}, m={self.m}")


def _blocker_layer(builder: CircuitBuilder, mode: str, blocked) -> None:
    """Append the object layer: a blocker, a plate-controlled blocker, or an
    identity placeholder that keeps free/blocked variants time-aligned."""
    if blocked == _PLATE:
        builder.layer(Blocker(mode, BLOCK_WHEN_PLATE_PRESENT))
    elif blocked:
        builder.layer(Blocker(mode, BLOCK_ALWAYS))
    else:
        builder.layer()


def build_mzi(blocked=False) -> Circuit:
    """Balanced two-arm interferometer with detector D on the dark port.

    ``blocked`` may be False (free arms), True (opaque object at O), or
    "plate" (object presence controlled by the plate qubit).
    D never fires when the arms are free; with the object present the
    outcome distribution is (D, B, absorbed) = (1/4, 1/4, 1/2).
    """
    b = CircuitBuilder(plate_dim=2 if blocked == _PLATE else 1)
    b.add_mode("L", Region.ALICE)
    b.add_mode("R", Region.CHANNEL)
    b.add_mode("O", Region.BOB)
    b.add_mode("D", Region.ALICE, ModeKind.DETECTOR)
    b.add_mode("B", Region.ALICE, ModeKind.DETECTOR)
    b.set_input("L")
    b.detect("D", "B")
    half = Angle.pi_frac(1, 4)
    b.layer(BeamSplitter("L", "R", half))
    b.layer(Route("R", "O"))
    _blocker_layer(b, "O", blocked)
    b.layer(Route("O", "R"))
    b.layer(BeamSplitter("L", "R", half))
    b.layer(Route("L", "D"), Route("R", "B"))
    b.meta.update(
        builder="mzi",
        blocked=blocked,
        o_mode="O",
        roles={"dark": "D", "bright": "B"},
        first_block_t=3 if blocked else None,
    )
    return b.build()


#: amplitude kept on the plain outer arm of the three-arm interferometer
_THIRD = math.acos(1.0 / math.sqrt(3.0))


def build_nested_mzi(variant: str = "a", blocked=False) -> Circuit:
    """Three-arm interferometer: an inner pair nested in one outer arm.

    Variant "a" nests arms (A, B) with the plain arm C carrying the input;
    variant "b" mirrors the nesting to the other outer arm (roles of A and C
    exchanged).  Tuning, in both variants:

    * mid-circuit state (|A> + i|B> + |C>)/sqrt(3);
    * each arm couples to detector D with modulus 1/sqrt(3);
    * the inner pair is dark toward the outer recombiner when free (segment
      F carries nothing);
    * blocking the O arm (A in variant "a", C in variant "b") makes D
      exactly dark.

    Free, P(D) = 1/9.
    """
    if variant not in ("a", "b"):
        raise ValueError(f"variant must be 'a' or 'b', got {variant!r}")
    plain, inner1 = ("C", "A") if variant == "a" else ("A", "C")
    b = CircuitBuilder(plate_dim=2 if blocked == _PLATE else 1)
    for label in ("A", "B", "C"):
        if label == plain:
            b.add_mode(label, Region.ALICE)
        elif label == inner1:
            b.add_mode(label, Region.BOB)
        else:
            b.add_mode(label, Region.INTERNAL)  # other inner arm: O's vicinity
    # the segments connecting the sender's optics to the tested vicinity
    b.add_mode("E", Region.CHANNEL)
    b.add_mode("F", Region.CHANNEL)
    b.add_mode("X", Region.INTERNAL)
    for det in ("D", "H", "W"):
        b.add_mode(det, Region.ALICE, ModeKind.DETECTOR)
    b.set_input(plain)
    b.detect("D", "H", "W")

    third = Angle.radians(_THIRD)
    quarter = Angle.pi_frac(1, 4)
    back = Angle.pi_frac(-1, 2)
    b.layer(BeamSplitter(plain, "E", third))
    b.layer(PhaseShift("E", back))
    b.layer(Route("E", inner1))
    b.layer(BeamSplitter(inner1, "B", quarter))  # mid-circuit cut
    _blocker_layer(b, inner1, blocked)
    b.layer(BeamSplitter(inner1, "B", quarter))
    b.layer(Route(inner1, "F"), Route("B", "X"))
    b.layer(PhaseShift("F", back))
    b.layer(BeamSplitter(plain, "F", third))
    b.layer(Route(plain, "D"), Route("F", "H"), Route("X", "W"))
    b.meta.update(
        builder="nested_mzi",
        variant=variant,
        blocked=blocked,
        o_mode=inner1,
        arms=("A", "B", "C"),
        mid_t=4,
        segments={"E": ("E", 2), "F": ("F", 8)},
        roles={"dark": "D", "bright": "H", "waste": "W"},
        first_block_t=5 if blocked else None,
    )
    return b.build()


def build_zeno_presence_chain(params, blocked=True) -> Circuit:
    """Chain of N weak splitters probing an object on the right rail.

    Free, the photon transfers completely to the right port T.  With the
    object present on every right-rail segment, it stays on the left rail and
    reaches D with probability exactly cos^2N(pi/2N), the rest being
    absorbed.
    """
    params = params if isinstance(params, ChainParams) else ChainParams(int(params))
    n = params.n
    b = CircuitBuilder(plate_dim=2 if blocked == _PLATE else 1)
    b.add_mode("L", Region.ALICE)
    b.add_mode("X", Region.CHANNEL)
    b.add_mode("O", Region.BOB)
    b.add_mode("D", Region.ALICE, ModeKind.DETECTOR)
    b.add_mode("T", Region.ALICE, ModeKind.DETECTOR)
    b.set_input("L")
    b.detect("D", "T")
    step = Angle.pi_frac(1, 2 * n)
    for _ in range(n):
        b.layer(BeamSplitter("L", "X", step))
        b.layer(Route("X", "O"))
        _blocker_layer(b, "O", blocked)
        b.layer(Route("O", "X"))
    b.layer(Route("L", "D"), Route("X", "T"))
    b.meta.update(
        builder="zeno_presence",
        params=params,
        blocked=blocked,
        o_mode="O",
        roles={"dark": "D", "transmit": "T"},
        first_block_t=3 if blocked else None,
    )
    return b.build()


def _absence_spine_amplitude(theta: float, r: float, n: int) -> float:
    """Amplitude staying on the spine rail of the absence chain, all inner
    excursions included, when every excursion is attenuated by the real
    factor r (the blocked-unit return)."""
    c, s = math.cos(theta), math.sin(theta)
    bs = np.array([[c, 1j * s], [1j * s, c]])
    unit = np.diag([1.0, r]).astype(complex) @ bs
    t = bs.copy()
    for _ in range(n):
        t = t @ unit
    return float(t[0, 0].real)


@functools.lru_cache(maxsize=None)
def absence_chain_angle(n: int, m: int) -> float:
    """Outer splitter angle making the blocked absence chain exactly dark.

    The n+1 equal outer splitters must cancel the direct spine amplitude
    against the attenuated excursion returns; the root is found to machine
    precision.  n = m = 1 recovers arccos(1/sqrt(3)), the single nested
    interferometer's outer ratio.
    """
    s_in = m + 1
    r = math.cos(math.pi / (2 * s_in)) ** s_in
    f = lambda th: _absence_spine_amplitude(th, r, n)
    grid = np.linspace(1e-6, math.pi / 2 - 1e-6, 8192)
    prev = f(grid[0])
    for x in grid[1:]:
        cur = f(x)
        if prev == 0.0:
            return float(grid[0])
        if prev * cur < 0:
            return float(brentq(f, x - (grid[1] - grid[0]), x, xtol=1e-15, rtol=8.9e-16))
        prev = cur
    raise RuntimeError(f"no dark-port angle found for absence chain n={n}, m={m}")


def build_zeno_absence_chain(params, blocked=False) -> Circuit:
    """Chain of N nested units certifying that location O is empty.

    Each unit sends the excursion rail through a weak-splitter inner chain
    (m+1 splitters) whose lower segments all pass the object location; free
    units absorb their input completely (dark toward the spine), blocked
    units return it attenuated by cos^(m+1)(pi/(2(m+1))).  The outer angle is
    tuned so that with the object present, detector D is exactly dark; free,
    P(D) = cos^(2(n+1)) of that angle, growing toward 1 with n.
    """
    params = params if isinstance(params, ChainParams) else ChainParams(int(params))
    n, m = params.n, params.m
    if blocked == _PLATE:
        raise ValueError("the absence chain supports classical blocking only")
    s_in = m + 1
    theta = absence_chain_angle(n, m)
    b = CircuitBuilder(plate_dim=1)
    b.add_mode("C", Region.ALICE)
    b.add_mode("E", Region.CHANNEL)
    b.add_mode("IL", Region.INTERNAL)
    b.add_mode("IR", Region.INTERNAL)
    b.add_mode("CH", Region.INTERNAL)
    b.add_mode("O", Region.BOB)
    b.add_mode("D", Region.ALICE, ModeKind.DETECTOR)
    b.add_mode("H", Region.ALICE, ModeKind.DETECTOR)
    b.set_input("C")
    b.detect("D", "H")
    outer = Angle.radians(theta)
    inner = Angle.pi_frac(1, 2 * s_in)
    first_block_t = None
    for k in range(n + 1):
        b.layer(BeamSplitter("C", "E", outer))
        if k == n:
            break
        b.layer(Route("E", "IL"))
        for _ in range(s_in):
            b.layer(BeamSplitter("IL", "IR", inner))
            b.layer(Route("IR", "CH"))
            b.layer(Route("CH", "O"))
            if first_block_t is None:
                first_block_t = len(b._layers) + 1 if blocked else None
            _blocker_layer(b, "O", blocked)
            b.layer(Route("O", "CH"))
            b.layer(Route("CH", "IR"))
        b.layer(Blocker("IR", BLOCK_ALWAYS))  # far port: free case exits here
        b.layer(Route("IL", "E"))
    b.layer(Route("C", "D"), Route("E", "H"))
    b.meta.update(
        builder="zeno_absence",
        params=params,
        blocked=blocked,
        o_mode="O",
        outer_angle=theta,
        roles={"dark": "D", "bright": "H"},
        first_block_t=first_block_t,
    )
    return b.build()


def build_nested_zeno(params, plate_dimension: int = 1, blocked=True) -> Circuit:
    """The two-detector communication machine (bit/qubit transfer circuit).

    N outer weak splitters couple Alice's rail L to the excursion rail R;
    each outer step sends R through an inner chain of M weak splitters whose
    lower segments shuttle across the channel to the object location O, and
    whose far port exits to a loss sink.  Free (object absent), the inner
    chains drain everything that enters them, so P(D1) = cos^2N(pi/2N)
    exactly; blocked, every inner chain acts as a mirror of amplitude
    cos^M(pi/2M) and the photon rotates to D2.

    With ``plate_dimension=2`` the blockers are controlled by the plate
    qubit and ``blocked`` is ignored.
    """
    params = params if isinstance(params, ChainParams) else ChainParams(*params)
    n, m = params.n, params.m
    if plate_dimension == 2:
        blocked = _PLATE
    b = CircuitBuilder(plate_dim=plate_dimension)
    b.add_mode("L", Region.ALICE)
    b.add_mode("R", Region.CHANNEL)       # mouth of the channel, Alice's side
    b.add_mode("IL", Region.INTERNAL)
    b.add_mode("IR", Region.INTERNAL)
    b.add_mode("CH", Region.CHANNEL)      # the crossing segment
    b.add_mode("O", Region.BOB)
    b.add_mode("D1", Region.ALICE, ModeKind.DETECTOR)
    b.add_mode("D2", Region.ALICE, ModeKind.DETECTOR)
    b.set_input("L")
    b.detect("D1", "D2")
    outer = Angle.pi_frac(1, 2 * n)
    inner = Angle.pi_frac(1, 2 * m)
    first_block_t = None
    for _ in range(n):
        b.layer(BeamSplitter("L", "R", outer))
        b.layer(Route("R", "IL"))
        for _ in range(m):
            b.layer(BeamSplitter("IL", "IR", inner))
            b.layer(Route("IR", "CH"))
            b.layer(Route("CH", "O"))
            if first_block_t is None and blocked:
                first_block_t = len(b._layers) + 1
            _blocker_layer(b, "O", blocked)
            b.layer(Route("O", "CH"))
            b.layer(Route("CH", "IR"))
        b.layer(Blocker("IR", BLOCK_ALWAYS))  # far-port loss
        b.layer(Route("IL", "R"))
    # quarter-turn so the D2 coupling is real and positive
    b.layer(PhaseShift("R", Angle.pi_frac(-1, 2)))
    b.layer(Route("L", "D1"), Route("R", "D2"))
    b.meta.update(
        builder="nested_zeno",
        params=params,
        plate_dimension=plate_dimension,
        blocked=blocked,
        o_mode="O",
        roles={"bit0": "D1", "bit1": "D2"},
        first_block_t=first_block_t,
    )
    return b.build()


def ideal_transfer_circuit() -> Circuit:
    """The ideal-limit transfer isometry |ready, b> -> |out_b, b>.

    A plate-controlled blocker parks the plate-present component in its sink,
    and two routes fan the components out to the outcome ports.  Built
    directly (its sink is deliberately re-read by a route), it exists to be
    inverted: the inverse maps |out_b, b> back to |ready, b>, which is the
    role-swapped reversal used by the qubit-transfer protocol.
    """
    table = ModeTable(
        (
            ModeId(0, "RB", ModeKind.PATH, Region.INTERNAL),
            ModeId(1, "T0", ModeKind.DETECTOR, Region.INTERNAL),
            ModeId(2, "T1", ModeKind.DETECTOR, Region.INTERNAL),
            ModeId(3, "S", ModeKind.SINK, Region.INTERNAL),
        )
    )
    layers = (
        (Blocker("RB", BLOCK_WHEN_PLATE_PRESENT, "S"),),
        (Route("RB", "T0"),),
        (Route("S", "T1"),),
    )
    return Circuit(
        table,
        2,
        layers,
        table.get("RB"),
        (table.get("T0"), table.get("T1")),
        {"builder": "ideal_transfer"},
    )


def build_qubit_transfer(params) -> tuple[Circuit, Circuit]:
    """Forward entangling machine plus the role-swapped ideal reversal.

    The forward circuit is the plate-carrying communication machine; the
    reversal is the inverse of the ideal-limit transfer map (the finite-chain
    fidelity gap is quantified by the protocol report, not folded into the
    reversal).
    """
    forward = build_nested_zeno(params, plate_dimension=2)
    reversal = invert(ideal_transfer_circuit())
    return forward, reversal


BUILDERS = {
    "mzi": build_mzi,
    "nested_mzi": build_nested_mzi,
    "zeno_presence": build_zeno_presence_chain,
    "zeno_absence": build_zeno_absence_chain,
    "nested_zeno": build_nested_zeno,
}
