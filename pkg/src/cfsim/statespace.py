"""Modes, regions, the plate ancilla, and the joint amplitude vector.

The simulator's universal value is a dense complex amplitude vector over
(optical mode) x (plate basis state).  Absorption sinks are ordinary modes of
the same vector, so norm bookkeeping is exact: a well-formed circuit moves
amplitude around, it never loses any.

Everything here is immutable after construction and all operations are pure
functions, so values can be shared freely between threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyBranchError, ModeError, SpaceMismatchError

NORM_TOL = 1e-12


class Region(str, enum.Enum):
    """Territory tag used by the counterfactuality audit."""

    ALICE = "alice"
    CHANNEL = "channel"
    BOB = "bob"
    INTERNAL = "internal"


class ModeKind(str, enum.Enum):
    PATH = "path"
    DETECTOR = "detector"
    SINK = "sink"


class PlateBasis(enum.IntEnum):
    """Plate (opaque object) basis: absent = 0, present = 1 (blocks)."""

    ABSENT = 0
    PRESENT = 1


@dataclass(frozen=True)
class ModeId:
    index: int
    label: str
    kind: ModeKind = ModeKind.PATH
    region: Region = Region.INTERNAL

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ModeTable:
    """Immutable, contiguously indexed list of modes with label lookup."""

    modes: tuple[ModeId, ...]
    _by_label: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        labels = {}
        for i, m in enumerate(self.modes):
            if m.index != i:
                raise ModeError(f"mode {m.label!r} has index {m.index}, expected {i}")
            if m.label in labels:
                raise ModeError(f"duplicate mode label {m.label!r}")
            labels[m.label] = m
        object.__setattr__(self, "_by_label", labels)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def get(self, ref: "ModeId | str | int") -> ModeId:
        if isinstance(ref, ModeId):
            if ref.index >= len(self.modes) or self.modes[ref.index] is not ref:
                # accept equal-valued ModeIds from a copied table
                cand = self._by_label.get(ref.label)
                if cand is None or cand != ref:
                    raise ModeError(f"mode {ref.label!r} is not in this table")
                return cand
            return ref
        if isinstance(ref, int):
            if not 0 <= ref < len(self.modes):
                raise ModeError(f"mode index {ref} out of range")
            return self.modes[ref]
        mode = self._by_label.get(ref)
        if mode is None:
            raise ModeError(f"unknown mode {ref!r}")
        return mode

    def by_kind(self, kind: ModeKind) -> tuple[ModeId, ...]:
        return tuple(m for m in self.modes if m.kind == kind)

    def by_region(self, region: Region) -> tuple[ModeId, ...]:
        return tuple(m for m in self.modes if m.region == region)


@dataclass(frozen=True)
class PlatePreparation:
    """Plate superposition alpha*|present> + beta*|absent>."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        nrm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"plate preparation is not normalized: |a|^2+|b|^2 = {nrm}")

    def as_vector(self) -> np.ndarray:
        # index 0 = absent, index 1 = present
        return np.array([self.beta, self.alpha], dtype=complex)


@dataclass(frozen=True)
class JointState:
    """Amplitude per (mode, plate basis state); dense, read-only.

    ``amplitudes`` has shape (n_modes, plate_dim).  Plate dimension 1 is the
    trivial one-element basis used by classical (always-on) blockers.
    """

    table: ModeTable
    amplitudes: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.amplitudes, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != len(self.table):
            raise ValueError(f"amplitude array has shape {arr.shape}, expected ({len(self.table)}, plate_dim)")
        if arr.shape[1] not in (1, 2):
            raise ValueError("plate dimension must be 1 or 2")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "amplitudes", arr)

    @property
    def plate_dim(self) -> int:
        return self.amplitudes.shape[1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, mode: "ModeId | str | int", plate: int = 0) -> complex:
        m = self.table.get(mode)
        return complex(self.amplitudes[m.index, plate])

    def mode_probability(self, mode: "ModeId | str | int") -> float:
        m = self.table.get(mode)
        return float(np.sum(np.abs(self.amplitudes[m.index]) ** 2))

    def same_space(self, other: "JointState") -> bool:
        return self.table == other.table and self.plate_dim == other.plate_dim


def basis_state(
    table: ModeTable,
    mode: "ModeId | str | int",
    plate: "PlateBasis | PlatePreparation | int | None" = None,
    plate_dim: int = 1,
) -> JointState:
    """Unit state with all amplitude on ``mode``, plate factor as given.

    ``plate`` may be a basis value, a superposition preparation, or None
    (meaning the trivial/absent component).
    """
    m = table.get(mode)
    if isinstance(plate, PlatePreparation):
        plate_dim = 2
    arr = np.zeros((len(table), plate_dim), dtype=complex)
    if isinstance(plate, PlatePreparation):
        arr[m.index] = plate.as_vector()
    else:
        p = 0 if plate is None else int(plate)
        if not 0 <= p < plate_dim:
            raise ValueError(f"plate index {p} out of range for plate dimension {plate_dim}")
        arr[m.index, p] = 1.0
    return JointState(table, arr)


def inner_product(a: JointState, b: JointState) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if not a.same_space(b):
        raise SpaceMismatchError("states live in different spaces")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def project(
    state: JointState,
    modes,
    plate: "PlateBasis | int | None" = None,
) -> tuple[JointState, float]:
    """Restrict ``state`` to a set of modes (optionally one plate component).

    Returns the unnormalized restriction together with its squared norm (the
    post-selection probability).  Use :func:`renormalized` for the conditioned
    branch; a zero-probability branch is a legitimate result here (dark-port
    checks rely on it).
    """
    mode_list = [state.table.get(m) for m in (modes if isinstance(modes, (list, tuple, set, frozenset)) else [modes])]
    if not mode_list:
        raise ValueError("projection requires at least one mode")
    arr = np.zeros_like(state.amplitudes)
    idx = [m.index for m in mode_list]
    if plate is None:
        arr[idx, :] = state.amplitudes[idx, :]
    else:
        p = int(plate)
        arr[idx, p] = state.amplitudes[idx, p]
    restricted = JointState(state.table, arr)
    prob = float(np.sum(np.abs(arr) ** 2))
    return restricted, prob


def renormalized(state: JointState, min_probability: float = 1e-15) -> JointState:
    """Return state / ||state||, raising :class:`EmptyBranchError` when empty."""
    nrm2 = float(np.sum(np.abs(state.amplitudes) ** 2))
    if nrm2 < min_probability:
        raise EmptyBranchError(nrm2)
    return JointState(state.table, state.amplitudes / math.sqrt(nrm2))


def fidelity(a: JointState, b: JointState) -> float:
    """|<a|b>|^2 for normalized states."""
    for s, name in ((a, "first"), (b, "second")):
        if abs(s.norm() - 1.0) > 1e-9:
            raise ValueError(f"{name} state is not normalized (norm = {s.norm()})")
    return float(abs(inner_product(a, b)) ** 2)
