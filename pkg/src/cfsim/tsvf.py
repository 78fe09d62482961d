"""Two-state-vector analysis: backward states, weak values, trace maps,
and per-region counterfactuality verdicts.

A pre- and post-selected photon is described by the pair (forward state,
backward state).  Its trace at a location is carried by the overlap
conj(backward) * forward there; the projector weak value is that overlap
divided by the post-selected amplitude.  Trace presence is thresholded on
the overlap magnitude, not the weak value, because weak values blow up near
small post-selection amplitudes while the physical disturbance follows the
overlap.  Sinks and detectors never carry an overlap (their forward and
backward supports are disjoint in time), so trace maps cover path modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Trajectory, post_selection_state, run_backward, run_forward
from .errors import ModeError, UndefinedWeakValueError
from .statespace import JointState, ModeId, ModeKind, Region, basis_state, inner_product

DEFAULT_TRACE_TOL = 1e-6
_ZERO_AMP = 1e-15

VERDICT_COUNTERFACTUAL = "counterfactual"
VERDICT_CROSSING_FREE = "crossing_free"
VERDICT_NOT_COUNTERFACTUAL = "not_counterfactual"


@dataclass(frozen=True)
class TwoStateTrajectory:
    """Paired forward and backward snapshots for one pre/post-selection."""

    circuit: Circuit
    forward: Trajectory
    backward: Trajectory
    post_amplitude: complex
    post_mode: ModeId
    post_plate: int | None

    def weak_value(self, mode, t: int, plate: int | None = None) -> complex:
        """Weak value of the (mode [, plate]) projector at timestep t."""
        m = self.circuit.table.get(mode)
        f = self.forward.state(t).amplitudes[m.index]
        b = self.backward.state(t).amplitudes[m.index]
        if plate is None:
            overlap = complex(np.vdot(b, f))
        else:
            overlap = complex(np.conj(b[plate]) * f[plate])
        return overlap / self.post_amplitude


def two_state_trajectory(
    circuit: Circuit,
    input_state: JointState,
    post_mode,
    post_plate: int | None = None,
) -> TwoStateTrajectory:
    """Forward and backward snapshot sequences for a fixed pre/post-selection.

    Raises :class:`UndefinedWeakValueError` when the post-selected amplitude
    is numerically zero (e.g. post-selecting a dark port).
    """
    if circuit.plate_dim == 1 and post_plate is None:
        post_plate = 0
    fwd = run_forward(circuit, input_state, record="full")
    bwd = run_backward(circuit, post_mode, post_plate, record="full")
    mode = circuit.table.get(post_mode)
    amp = complex(fwd.final.amplitudes[mode.index, post_plate])
    if abs(amp) < _ZERO_AMP:
        raise UndefinedWeakValueError(amp)
    return TwoStateTrajectory(circuit, fwd, bwd, amp, mode, post_plate)


def weak_value(trajectories: TwoStateTrajectory, mode, t: int, plate: int | None = None) -> complex:
    return trajectories.weak_value(mode, t, plate)


def weak_value_sum(trajectories: TwoStateTrajectory, t: int) -> complex:
    """Sum of mode-projector weak values over all non-sink modes at a cut."""
    total = 0.0 + 0.0j
    for m in trajectories.circuit.table:
        if m.kind != ModeKind.SINK:
            total += trajectories.weak_value(m, t)
    return total


# ---------------------------------------------------------------------------
# trace maps


@dataclass(frozen=True)
class TraceEntry:
    mode: str
    t: int
    forward_amp: complex | None
    backward_amp: complex | None
    overlap: complex | None
    weak_value: complex | None
    strength: float
    present: bool


@dataclass(frozen=True)
class TraceMap:
    """Per (path mode, timestep) record of the forward/backward overlap.

    For a definite post-selection the complex overlap and projector weak
    value are available per entry; when the plate is traced out (no plate
    state chosen on a plate-carrying circuit) the strength is the
    root-sum-square of overlaps over the post-selected plate basis.
    """

    circuit: Circuit
    post_mode: ModeId
    post_plates: tuple[int, ...]
    post_amplitudes: tuple[complex, ...]
    tol: float
    path_modes: tuple[ModeId, ...]
    strengths: np.ndarray  # (T+1, n_path), real
    overlaps: tuple[np.ndarray, ...]  # one (T+1, n_path) complex array per post plate
    forward_rows: np.ndarray | None = None
    backward_rows: tuple[np.ndarray, ...] | None = None
    max_strength: float = 0.0
    _mode_pos: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_mode_pos", {m.label: i for i, m in enumerate(self.path_modes)})

    @property
    def definite(self) -> bool:
        return len(self.post_plates) == 1

    def mode_max(self) -> dict[str, float]:
        mx = self.strengths.max(axis=0) if self.strengths.size else np.zeros(len(self.path_modes))
        return {m.label: float(mx[i]) for i, m in enumerate(self.path_modes)}

    def strength(self, mode, t: int) -> float:
        return float(self.strengths[t, self._mode_pos[self.circuit.table.get(mode).label]])

    def present(self, mode, t: int) -> bool:
        s = self.strength(mode, t)
        return s > 0.0 and s > self.tol * self.max_strength

    def overlap(self, mode, t: int, which: int = 0) -> complex:
        return complex(self.overlaps[which][t, self._mode_pos[self.circuit.table.get(mode).label]])

    def entries(self, max_entries: int = 2_000_000) -> list[TraceEntry]:
        n = self.strengths.size
        if n > max_entries:
            raise ValueError(f"trace map has {n} entries; raise max_entries to materialize")
        post_amp = self.post_amplitudes[0] if self.definite else None
        keep_amps = self.forward_rows is not None and self.circuit.plate_dim == 1
        out = []
        for t in range(self.strengths.shape[0]):
            for i, m in enumerate(self.path_modes):
                s = float(self.strengths[t, i])
                ov = complex(self.overlaps[0][t, i]) if self.definite else None
                wv = ov / post_amp if (ov is not None and post_amp) else None
                f_amp = complex(self.forward_rows[t, i, 0]) if keep_amps else None
                b_amp = complex(self.backward_rows[0][t, i, 0]) if (keep_amps and self.backward_rows) else None
                out.append(
                    TraceEntry(m.label, t, f_amp, b_amp, ov, wv, s, s > 0.0 and s > self.tol * self.max_strength)
                )
        return out


def trace_map(
    circuit: Circuit,
    input_state: JointState,
    post_mode,
    post_plate: int | None = None,
    tol: float = DEFAULT_TRACE_TOL,
    keep_amplitudes: bool | None = None,
) -> TraceMap:
    """Full (path mode, timestep) trace map for one run.

    ``post_plate=None`` on a plate-carrying circuit traces the plate out:
    strengths are root-sum-square over an orthonormal basis of post-selected
    plate states, which reduces to the pure-case definition when one
    component vanishes.
    """
    mode = circuit.table.get(post_mode)
    if circuit.plate_dim == 1:
        plates = (0,)
    elif post_plate is not None:
        plates = (int(post_plate),)
    else:
        plates = (0, 1)

    path_modes = tuple(m for m in circuit.table if m.kind == ModeKind.PATH)
    path_idx = np.array([m.index for m in path_modes])
    T = circuit.n_layers
    pd = circuit.plate_dim
    if keep_amplitudes is None:
        keep_amplitudes = (T + 1) * len(path_modes) <= 2_000_000

    # forward pass, recording path-mode rows at every snapshot
    from .circuit import _apply_ops  # local import to keep the hot path private

    arr = np.array(input_state.amplitudes, dtype=complex)
    F = np.empty((T + 1, len(path_modes), pd), dtype=complex)
    F[0] = arr[path_idx]
    for t, ops in enumerate(circuit.compiled(adjoint=False)):
        _apply_ops(arr, ops)
        F[t + 1] = arr[path_idx]
    post_amps = tuple(complex(arr[mode.index, p]) for p in plates)
    if all(abs(a) < _ZERO_AMP for a in post_amps):
        raise UndefinedWeakValueError(post_amps[0])

    overlaps = []
    backward_rows = [] if keep_amplitudes else None
    for p in plates:
        barr = np.array(post_selection_state(circuit, mode, p).amplitudes, dtype=complex)
        O = np.empty((T + 1, len(path_modes)), dtype=complex)
        B = np.empty_like(F) if keep_amplitudes else None
        t = T
        O[t] = np.sum(np.conj(barr[path_idx]) * F[t], axis=1)
        if B is not None:
            B[t] = barr[path_idx]
        for ops in reversed(circuit.compiled(adjoint=True)):
            _apply_ops(barr, ops)
            t -= 1
            O[t] = np.sum(np.conj(barr[path_idx]) * F[t], axis=1)
            if B is not None:
                B[t] = barr[path_idx]
        overlaps.append(O)
        if backward_rows is not None:
            backward_rows.append(B)

    strengths = np.sqrt(sum(np.abs(O) ** 2 for O in overlaps))
    return TraceMap(
        circuit=circuit,
        post_mode=mode,
        post_plates=plates,
        post_amplitudes=post_amps,
        tol=tol,
        path_modes=path_modes,
        strengths=strengths,
        overlaps=tuple(overlaps),
        forward_rows=F if keep_amplitudes else None,
        backward_rows=tuple(backward_rows) if backward_rows is not None else None,
        max_strength=float(strengths.max()) if strengths.size else 0.0,
    )


# ---------------------------------------------------------------------------
# counterfactuality audit


@dataclass(frozen=True)
class RegionTrace:
    region: Region
    max_trace_magnitude: float
    present: bool


@dataclass(frozen=True)
class CounterfactualityReport:
    regions: tuple[RegionTrace, ...]
    verdict: str
    trace_free_channel_modes: tuple[str, ...]
    traced_channel_modes: tuple[str, ...]
    channel_cut_found: bool
    tol: float

    def region(self, region: Region) -> RegionTrace:
        for r in self.regions:
            if r.region == region:
                return r
        raise KeyError(region)


def _adjacency(circuit: Circuit) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {m.label: set() for m in circuit.table}
    for layer in circuit.layers:
        for el in layer:
            labels = el.modes()
            for a in labels:
                for b in labels:
                    if a != b:
                        adj[a].add(b)
    return adj


def _alice_bob_connected(circuit: Circuit, removed: set[str]) -> bool:
    adj = _adjacency(circuit)
    starts = [m.label for m in circuit.table if m.region == Region.ALICE and m.label not in removed]
    targets = {m.label for m in circuit.table if m.region == Region.BOB}
    seen = set(starts)
    stack = list(starts)
    while stack:
        cur = stack.pop()
        if cur in targets:
            return True
        for nxt in adj[cur]:
            if nxt not in removed and nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def counterfactuality_report(tm: TraceMap, regions: dict | None = None) -> CounterfactualityReport:
    """Render the per-region trace audit and the counterfactuality verdict.

    Verdict rules: "counterfactual" when channel and object (bob) regions are
    both trace-free; "crossing_free" when some full cut of the channel (a set
    of channel modes whose removal disconnects alice from bob in the circuit's
    mode-adjacency graph) is trace-free while other channel parts are traced;
    "not_counterfactual" otherwise.

    ``regions`` optionally overrides the mode table's tags (mode label ->
    Region) and must then cover every mode.
    """
    circuit = tm.circuit
    if regions is not None:
        missing = [m.label for m in circuit.table if m.label not in regions]
        if missing:
            raise ModeError(f"region override does not cover modes: {missing}")
        region_of = {m.label: Region(regions[m.label]) for m in circuit.table}
    else:
        region_of = {m.label: m.region for m in circuit.table}

    mode_max = tm.mode_max()
    cutoff = tm.tol * tm.max_strength

    def clean(label: str) -> bool:
        return mode_max.get(label, 0.0) <= cutoff  # non-path modes carry no overlap

    region_rows = []
    for region in Region:
        vals = [mode_max.get(m.label, 0.0) for m in circuit.table if region_of[m.label] == region]
        mx = max(vals, default=0.0)
        region_rows.append(RegionTrace(region, mx, mx > cutoff))

    channel_path = [m.label for m in circuit.table if region_of[m.label] == Region.CHANNEL and m.kind == ModeKind.PATH]
    free_channel = tuple(l for l in channel_path if clean(l))
    traced_channel = tuple(l for l in channel_path if not clean(l))
    bob_clean = all(clean(m.label) for m in circuit.table if region_of[m.label] == Region.BOB)

    cut_found = bool(free_channel) and not _alice_bob_connected(circuit, set(free_channel))
    if bob_clean and not traced_channel:
        verdict = VERDICT_COUNTERFACTUAL
    elif cut_found and traced_channel:
        verdict = VERDICT_CROSSING_FREE
    else:
        verdict = VERDICT_NOT_COUNTERFACTUAL
    return CounterfactualityReport(
        regions=tuple(region_rows),
        verdict=verdict,
        trace_free_channel_modes=free_channel,
        traced_channel_modes=traced_channel,
        channel_cut_found=cut_found,
        tol=tm.tol,
    )


# ---------------------------------------------------------------------------
# complement states of the three-arm interferometer


def complement_states(circuit: Circuit, arm: str):
    """The normalized remainder of an arm state after removing its D component.

    Propagates the given arm's mid-circuit basis state to the output, strips
    the amplitude heading to detector D, and normalizes.  Returns the
    requested arm's complement state together with all pairwise scalar
    products among the three arms' complements.
    """
    arms = circuit.meta.get("arms")
    mid_t = circuit.meta.get("mid_t")
    if arms is None or mid_t is None:
        raise ValueError("complement states require a three-arm interferometer circuit")
    if arm not in arms:
        raise ModeError(f"arm {arm!r} not in {arms}")
    dark = circuit.table.get(circuit.meta["roles"]["dark"])

    from .circuit import _apply_ops

    states = {}
    for label in arms:
        arr = np.zeros((len(circuit.table), circuit.plate_dim), dtype=complex)
        arr[circuit.table.get(label).index, 0] = 1.0
        for ops in circuit.compiled(adjoint=False)[mid_t:]:
            _apply_ops(arr, ops)
        arr[dark.index] = 0.0
        nrm = np.linalg.norm(arr)
        states[label] = JointState(circuit.table, arr / nrm)
    products = {
        (x, y): inner_product(states[x], states[y])
        for i, x in enumerate(arms)
        for y in arms[i + 1 :]
    }
    return states[arm], products


# ---------------------------------------------------------------------------
# independent cross-check of weak values


def perturbative_trace_oracle(
    circuit: Circuit,
    input_state: JointState,
    post_mode,
    post_plate: int | None = None,
    mode=None,
    t: int = 0,
    plate: int | None = None,
    eps: float = 1e-5,
) -> complex:
    """Weak value via phase perturbation, independent of the backward state.

    Inserts a small phase exp(i*eps) on (mode [, plate]) at timestep t and
    differentiates the post-selected amplitude: d(log A)/d(i eps) equals the
    projector weak value.  Central differences at the given eps.
    """
    if circuit.plate_dim == 1 and post_plate is None:
        post_plate = 0
    m = circuit.table.get(mode)
    post = circuit.table.get(post_mode)

    from .circuit import _apply_ops

    compiled = circuit.compiled(adjoint=False)
    base = np.array(input_state.amplitudes, dtype=complex)
    for ops in compiled[:t]:
        _apply_ops(base, ops)

    def post_amp(phase: complex | None) -> complex:
        arr = base.copy()
        if phase is not None:
            if plate is None:
                arr[m.index] *= phase
            else:
                arr[m.index, plate] *= phase
        for ops in compiled[t:]:
            _apply_ops(arr, ops)
        return complex(arr[post.index, post_plate])

    a0 = post_amp(None)
    if abs(a0) < _ZERO_AMP:
        raise UndefinedWeakValueError(a0)
    plus = post_amp(complex(math.cos(eps), math.sin(eps)))
    minus = post_amp(complex(math.cos(eps), -math.sin(eps)))
    return (plus - minus) / (2j * eps * a0)
