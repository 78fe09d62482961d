"""Layered circuits: construction, exact propagation, adjoints, inversion.

Time is discretized by layers: snapshot t is the state after the first t
layers, so "a location at a time" is a (mode, timestep) pair.  Elements within
one layer must touch disjoint modes, which makes the layer product
well-defined; an empty layer is the identity (used to keep free and blocked
variants of a circuit time-aligned).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .elements import (
    BLOCK_ALWAYS,
    BLOCK_WHEN_PLATE_PRESENT,
    Angle,
    BeamSplitter,
    Blocker,
    Element,
    PhaseShift,
    Route,
)
from .errors import CircuitConstructionError, ModeError
from .statespace import (
    JointState,
    ModeId,
    ModeKind,
    ModeTable,
    PlateBasis,
    PlatePreparation,
    Region,
    basis_state,
)

# compiled op kinds
_OP_BS = 0
_OP_PHASE = 1
_OP_SWAP = 2
_OP_PLATE_SWAP = 3


@dataclass(frozen=True)
class Circuit:
    """An ordered sequence of element layers over a declared mode table."""

    table: ModeTable
    plate_dim: int
    layers: tuple[tuple[Element, ...], ...]
    input_mode: ModeId
    detectors: tuple[ModeId, ...]
    meta: dict = field(default_factory=dict, compare=False)
    _compiled: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return len(self.table) * self.plate_dim

    def mode(self, ref) -> ModeId:
        return self.table.get(ref)

    def input_state(self, plate: "PlateBasis | PlatePreparation | int | None" = None) -> JointState:
        return basis_state(self.table, self.input_mode, plate, self.plate_dim)

    def compiled(self, adjoint: bool = False):
        key = "adj" if adjoint else "fwd"
        ops = self._compiled.get(key)
        if ops is None:
            ops = tuple(_compile_layer(self, layer, adjoint) for layer in self.layers)
            self._compiled[key] = ops
        return ops


def _compile_layer(circuit: Circuit, layer, adjoint: bool):
    ops = []
    for el in layer:
        el = el.adjoint() if adjoint else el
        if isinstance(el, BeamSplitter):
            i, j = circuit.table.get(el.m1).index, circuit.table.get(el.m2).index
            t = el.theta.value
            ops.append((_OP_BS, i, j, math.cos(t), 1j * math.sin(t)))
        elif isinstance(el, PhaseShift):
            i = circuit.table.get(el.m).index
            ops.append((_OP_PHASE, i, 0, cmath.exp(1j * el.phi.value), None))
        elif isinstance(el, Blocker):
            i = circuit.table.get(el.m).index
            j = circuit.table.get(el.sink).index
            kind = _OP_SWAP if el.control == BLOCK_ALWAYS else _OP_PLATE_SWAP
            ops.append((kind, i, j, None, None))
        elif isinstance(el, Route):
            i, j = circuit.table.get(el.m1).index, circuit.table.get(el.m2).index
            ops.append((_OP_SWAP, i, j, None, None))
        else:  # pragma: no cover
            raise TypeError(f"unknown element {el!r}")
    return tuple(ops)


def _apply_ops(arr: np.ndarray, ops) -> None:
    """Apply one compiled layer in place on an (n_modes, plate_dim) array."""
    for kind, i, j, a, b in ops:
        if kind == _OP_BS:
            ri = arr[i].copy()
            rj = arr[j]
            arr[i] = a * ri + b * rj
            arr[j] = b * ri + a * rj
        elif kind == _OP_SWAP:
            ri = arr[i].copy()
            arr[i] = arr[j]
            arr[j] = ri
        elif kind == _OP_PLATE_SWAP:
            x = arr[i, 1]
            arr[i, 1] = arr[j, 1]
            arr[j, 1] = x
        else:  # phase
            arr[i] = arr[i] * a


@dataclass(frozen=True)
class Trajectory:
    """Per-timestep state snapshots for one propagation (t = 0..T)."""

    circuit: Circuit
    snapshots: tuple[JointState, ...] | None
    final: JointState

    def state(self, t: int) -> JointState:
        if self.snapshots is None:
            raise ValueError("trajectory was run without snapshot recording")
        return self.snapshots[t]

    def __len__(self) -> int:
        return self.circuit.n_layers + 1


def run_forward(circuit: Circuit, state: JointState, record: str = "full") -> Trajectory:
    """Propagate ``state`` through all layers.

    ``record`` is "full" (keep every snapshot) or "none" (final state only;
    the cheap mode for long chains).
    """
    if state.table != circuit.table or state.plate_dim != circuit.plate_dim:
        raise ModeError("input state does not match the circuit's space")
    arr = np.array(state.amplitudes, dtype=complex)
    snaps = [JointState(circuit.table, arr)] if record == "full" else None
    for ops in circuit.compiled(adjoint=False):
        _apply_ops(arr, ops)
        if snaps is not None:
            snaps.append(JointState(circuit.table, arr))
    final = snaps[-1] if snaps is not None else JointState(circuit.table, arr)
    return Trajectory(circuit, tuple(snaps) if snaps is not None else None, final)


def detection_probabilities(circuit: Circuit, final: JointState) -> dict[str, float]:
    """Outcome distribution of a final state: per detector, plus total
    absorption under the key "absorbed"."""
    probs = {m.label: final.mode_probability(m) for m in circuit.detectors}
    sinks = circuit.table.by_kind(ModeKind.SINK)
    if sinks:
        idx = [m.index for m in sinks]
        probs["absorbed"] = float(np.sum(np.abs(final.amplitudes[idx]) ** 2))
    return probs


def post_selection_state(
    circuit: Circuit,
    post_mode,
    post_plate: "PlateBasis | int | None" = None,
) -> JointState:
    mode = circuit.table.get(post_mode)
    if mode.kind == ModeKind.SINK:
        raise ModeError(f"cannot post-select on sink {mode.label!r}: sinks are absorbed, not detected")
    if mode.kind != ModeKind.DETECTOR:
        raise ModeError(f"post-selection mode {mode.label!r} is not a detector")
    if circuit.plate_dim == 2 and post_plate is None:
        raise ValueError("a plate basis state must be chosen to post-select a plate-carrying circuit")
    return basis_state(circuit.table, mode, post_plate, circuit.plate_dim)


def run_backward(
    circuit: Circuit,
    post_mode,
    post_plate: "PlateBasis | int | None" = None,
    record: str = "full",
) -> Trajectory:
    """Adjoint propagation from a post-selection basis state.

    Snapshot t is the adjoint of layers t+1..T applied to the post-selection
    state, so <backward(t)|forward(t)> is the (t-independent) post-selected
    transition amplitude.
    """
    post = post_selection_state(circuit, post_mode, post_plate)
    arr = np.array(post.amplitudes, dtype=complex)
    snaps = [JointState(circuit.table, arr)] if record == "full" else None
    for ops in reversed(circuit.compiled(adjoint=True)):
        _apply_ops(arr, ops)
        if snaps is not None:
            snaps.append(JointState(circuit.table, arr))
    if snaps is not None:
        snaps.reverse()
    final = JointState(circuit.table, arr)  # backward state at t = 0
    return Trajectory(circuit, tuple(snaps) if snaps is not None else None, final)


def transfer_matrix(circuit: Circuit, max_dim: int = 4096) -> np.ndarray:
    """Total transfer map over the joint basis (index = mode * plate_dim + p)."""
    dim = circuit.dim
    if dim > max_dim:
        raise ValueError(f"transfer matrix would be {dim}x{dim}; raise max_dim to force")
    pd = circuit.plate_dim
    U = np.zeros((dim, dim), dtype=complex)
    for m in range(len(circuit.table)):
        for p in range(pd):
            arr = np.zeros((len(circuit.table), pd), dtype=complex)
            arr[m, p] = 1.0
            for ops in circuit.compiled(adjoint=False):
                _apply_ops(arr, ops)
            U[:, m * pd + p] = arr.reshape(-1)
    return U


@dataclass(frozen=True)
class IsometryReport:
    passed: bool
    max_deviation: float
    dim: int
    complete: bool  # False when only a sampled subset of columns was checked

    def __str__(self) -> str:
        scope = "all columns" if self.complete else "sampled columns"
        return f"isometry {'ok' if self.passed else 'FAILED'} ({scope}, max deviation {self.max_deviation:.3e})"


def check_isometry(circuit: Circuit, tol: float = 1e-12, max_full_dim: int = 512, samples: int = 64) -> IsometryReport:
    """Verify the total transfer map has orthonormal columns.

    Small circuits get the complete column check; large ones a random sample
    of basis columns (pairwise orthonormality of the sample).
    """
    dim = circuit.dim
    pd = circuit.plate_dim
    n = len(circuit.table)
    if dim <= max_full_dim:
        U = transfer_matrix(circuit, max_dim=max_full_dim)
        dev = float(np.max(np.abs(U.conj().T @ U - np.eye(dim))))
        return IsometryReport(dev <= tol, dev, dim, True)
    rng = np.random.default_rng(0)
    cols = rng.choice(dim, size=min(samples, dim), replace=False)
    vecs = []
    for c in cols:
        arr = np.zeros((n, pd), dtype=complex)
        arr[c // pd, c % pd] = 1.0
        for ops in circuit.compiled(adjoint=False):
            _apply_ops(arr, ops)
        vecs.append(arr.reshape(-1))
    V = np.array(vecs)
    dev = float(np.max(np.abs(V.conj() @ V.T - np.eye(len(cols)))))
    return IsometryReport(dev <= tol, dev, dim, False)


def invert(circuit: Circuit) -> Circuit:
    """The adjoint circuit: layers reversed, each element adjointed.

    Blockers and routes are self-adjoint swaps, so an inverted blocker maps
    sink amplitude back onto its path mode.  Original detectors become path
    modes (they are read first now) and the original input becomes the sole
    detector.
    """
    new_layers = tuple(tuple(el.adjoint() for el in layer) for layer in reversed(circuit.layers))
    old_detectors = {m.label for m in circuit.detectors}
    modes = []
    for m in circuit.table:
        if m.label in old_detectors or m.kind == ModeKind.SINK:
            modes.append(ModeId(m.index, m.label, ModeKind.PATH, m.region))
        elif m.label == circuit.input_mode.label:
            modes.append(ModeId(m.index, m.label, ModeKind.DETECTOR, m.region))
        else:
            modes.append(m)
    table = ModeTable(tuple(modes))
    new_input = table.get(circuit.detectors[0].label)
    new_detectors = (table.get(circuit.input_mode.label),)
    meta = dict(circuit.meta)
    meta["inverted"] = not meta.get("inverted", False)
    return Circuit(table, circuit.plate_dim, new_layers, new_input, new_detectors, meta)


class CircuitBuilder:
    """Assembles a circuit, allocating one sink mode per blocker occurrence.

    Sinks are appended after all declared modes, in layer order, so every
    absorption event is individually addressable and mode numbering is
    reproducible from the serialized form.
    """

    def __init__(self, plate_dim: int = 1):
        if plate_dim not in (1, 2):
            raise CircuitConstructionError("plate dimension must be 1 or 2")
        self.plate_dim = plate_dim
        self._modes: list[tuple[str, ModeKind, Region]] = []
        self._labels: set[str] = set()
        self._layers: list[list[Element]] = []
        self._input: str | None = None
        self._detectors: list[str] = []
        self.meta: dict = {}
        self._allow_sink_taps = False

    @property
    def n_layers(self) -> int:
        return len(self._layers)

    def add_mode(self, label: str, region: Region = Region.INTERNAL, kind: ModeKind = ModeKind.PATH) -> str:
        if label in self._labels:
            raise CircuitConstructionError(f"duplicate mode label {label!r}")
        if kind == ModeKind.SINK:
            raise CircuitConstructionError("sink modes are allocated by blockers, not declared")
        self._labels.add(label)
        self._modes.append((label, kind, region))
        return label

    def set_input(self, label: str) -> None:
        self._input = label

    def detect(self, *labels: str) -> None:
        self._detectors.extend(labels)

    def layer(self, *elements: Element) -> None:
        self._layers.append(list(elements))

    def build(self) -> Circuit:
        if self._input is None:
            raise CircuitConstructionError("no input mode declared")
        if not self._detectors:
            raise CircuitConstructionError("no detectors declared")
        # allocate sinks per blocker occurrence, appended after declared modes
        sink_specs: list[tuple[str, Region]] = []
        region_of = {label: region for label, _, region in self._modes}
        resolved_layers: list[tuple[Element, ...]] = []
        n_sinks = 0
        for layer in self._layers:
            out = []
            for el in layer:
                if isinstance(el, Blocker) and el.sink is None:
                    sink_label = f"sink{n_sinks}"
                    n_sinks += 1
                    if el.m not in region_of:
                        raise CircuitConstructionError(f"blocker on unknown mode {el.m!r}")
                    sink_specs.append((sink_label, region_of[el.m]))
                    el = Blocker(el.m, el.control, sink_label)
                if isinstance(el, Blocker) and el.control == BLOCK_WHEN_PLATE_PRESENT and self.plate_dim != 2:
                    raise CircuitConstructionError("plate-controlled blocker requires plate dimension 2")
                out.append(el)
            resolved_layers.append(tuple(out))

        modes = [ModeId(i, label, kind, region) for i, (label, kind, region) in enumerate(self._modes)]
        base = len(modes)
        modes += [ModeId(base + i, label, ModeKind.SINK, region) for i, (label, region) in enumerate(sink_specs)]
        try:
            table = ModeTable(tuple(modes))
        except ModeError as exc:
            raise CircuitConstructionError(str(exc)) from exc

        self._validate(table, resolved_layers)
        detectors = tuple(table.get(lbl) for lbl in self._detectors)
        circuit = Circuit(table, self.plate_dim, tuple(resolved_layers), table.get(self._input), detectors, dict(self.meta))
        return circuit

    def _validate(self, table: ModeTable, layers) -> None:
        known = {m.label for m in table}
        touch_count: dict[str, int] = {}
        blocker_of_sink: dict[str, int] = {}
        for t, layer in enumerate(layers, start=1):
            seen: set[str] = set()
            for el in layer:
                if isinstance(el, (BeamSplitter, Route)):
                    a, b = el.modes()
                    if a == b:
                        kind = "beam splitter" if isinstance(el, BeamSplitter) else "route"
                        raise CircuitConstructionError(f"{kind} needs two distinct modes, got {a!r} twice")
                for lbl in el.modes():
                    if lbl not in known:
                        raise CircuitConstructionError(f"element references unknown mode {lbl!r}")
                    if lbl in seen:
                        raise CircuitConstructionError(f"layer {t}: two elements touch mode {lbl!r}")
                    seen.add(lbl)
                    touch_count[lbl] = touch_count.get(lbl, 0) + 1
                if isinstance(el, Blocker):
                    if el.sink in blocker_of_sink:
                        raise CircuitConstructionError(f"sink {el.sink!r} is written by two blockers")
                    blocker_of_sink[el.sink] = t
        # terminal-mode discipline: detectors and sinks are written once, then left alone
        for m in table:
            uses = touch_count.get(m.label, 0)
            if m.kind == ModeKind.DETECTOR and uses > 1:
                raise CircuitConstructionError(f"detector {m.label!r} is terminal but is used {uses} times")
            if m.kind == ModeKind.SINK and not self._allow_sink_taps and uses != 1:
                raise CircuitConstructionError(f"sink {m.label!r} must be touched exactly once (its blocker)")
