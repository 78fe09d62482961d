"""End-to-end protocol runners.

Each runner composes a builder circuit, exact propagation, and the trace
audit into one report: outcome probabilities (always analytic, from the
amplitudes), success-branch states and fidelities where meaningful, and the
per-region counterfactuality verdict.  Randomness enters only through
explicit seeds, and only where a protocol is inherently round-based (the key
distribution runner) or needs a hidden placement (the empty-channel search).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .builders import (
    ChainParams,
    build_mzi,
    build_nested_mzi,
    build_nested_zeno,
    build_qubit_transfer,
    build_zeno_absence_chain,
    build_zeno_presence_chain,
)
from .circuit import detection_probabilities, run_forward
from .errors import NumericInvariantError
from .statespace import JointState, PlatePreparation, project, renormalized
from .tsvf import CounterfactualityReport, counterfactuality_report, trace_map

PROB_SUM_TOL = 1e-12


@dataclass
class ProtocolReport:
    """Outcome bookkeeping and the counterfactuality verdict for one run."""

    protocol: str
    params: dict
    outcome_probabilities: dict[str, float]
    success_probability: float
    counterfactuality: CounterfactualityReport | None
    success_state: JointState | None = None
    fidelity: float | None = None
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.outcome_probabilities.values())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise NumericInvariantError(
                f"outcome probabilities sum to {total!r}, not 1 (protocol {self.protocol})"
            )
        if self.fidelity is not None and not -PROB_SUM_TOL <= self.fidelity <= 1 + PROB_SUM_TOL:
            raise NumericInvariantError(f"fidelity {self.fidelity} outside [0, 1]")

    @property
    def verdict(self) -> str | None:
        return self.counterfactuality.verdict if self.counterfactuality else None


def zeno_survival(n: int) -> float:
    """cos^2N(pi/2N): probability of staying on the monitored rail."""
    return math.cos(math.pi / (2 * n)) ** (2 * n)


def presence_ifm(n: int = 1, audit: bool = True) -> ProtocolReport:
    """Find an object without the photon having been near it.

    n = 1 runs the single balanced interferometer; larger n runs the chained
    version whose detection probability approaches 1 as cos^2N(pi/2N).
    """
    if n == 1:
        blocked, free = build_mzi(blocked=True), build_mzi(blocked=False)
    else:
        blocked = build_zeno_presence_chain(ChainParams(n), blocked=True)
        free = build_zeno_presence_chain(ChainParams(n), blocked=False)
    dark = blocked.meta["roles"]["dark"]
    final = run_forward(blocked, blocked.input_state(), record="none").final
    probs = detection_probabilities(blocked, final)
    free_final = run_forward(free, free.input_state(), record="none").final
    report = None
    if audit:
        report = counterfactuality_report(trace_map(blocked, blocked.input_state(), dark))
    details = {"dark_port_probability_when_free": free_final.mode_probability(dark)}
    if n > 1:
        details["survival_law"] = zeno_survival(n)
    return ProtocolReport(
        protocol="presence_ifm",
        params={"n": n},
        outcome_probabilities=probs,
        success_probability=probs[dark],
        counterfactuality=report,
        details=details,
    )


def absence_ifm(n: int = 1, m: int | None = None, audit: bool = True) -> ProtocolReport:
    """Certify that the object location is empty (detector D fires only then).

    n = 1 runs the single nested interferometer (P(D) = 1/9 when free);
    larger n runs the chained version; the inner chain length defaults to n.
    """
    if n == 1:
        free, blocked = build_nested_mzi("a"), build_nested_mzi("a", blocked=True)
        params = {"n": 1}
    else:
        p = ChainParams(n, n if m is None else m)
        free = build_zeno_absence_chain(p, blocked=False)
        blocked = build_zeno_absence_chain(p, blocked=True)
        params = {"n": p.n, "m": p.m}
    dark = free.meta["roles"]["dark"]
    final = run_forward(free, free.input_state(), record="none").final
    probs = detection_probabilities(free, final)
    blocked_final = run_forward(blocked, blocked.input_state(), record="none").final
    report = None
    if audit:
        report = counterfactuality_report(trace_map(free, free.input_state(), dark))
    return ProtocolReport(
        protocol="absence_ifm",
        params=params,
        outcome_probabilities=probs,
        success_probability=probs[dark],
        counterfactuality=report,
        details={"dark_port_probability_when_blocked": blocked_final.mode_probability(dark)},
    )


def transfer_bit(params: ChainParams, bit: int, audit: bool = True) -> ProtocolReport:
    """One round of the two-detector communication machine.

    The sender's bit decides whether the object is placed (bit 1) or not
    (bit 0); the receiver reads D2 for 1 and D1 for 0.
    """
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    params = params if isinstance(params, ChainParams) else ChainParams(*params)
    circuit = build_nested_zeno(params, plate_dimension=1, blocked=bool(bit))
    correct = circuit.meta["roles"]["bit1" if bit else "bit0"]
    wrong = circuit.meta["roles"]["bit0" if bit else "bit1"]
    final = run_forward(circuit, circuit.input_state(), record="none").final
    probs = detection_probabilities(circuit, final)
    report = None
    if audit:
        report = counterfactuality_report(trace_map(circuit, circuit.input_state(), correct))
    details = {
        "bit": bit,
        "error_probability": probs[wrong],
        "absorption_probability": probs.get("absorbed", 0.0),
    }
    if bit == 0:
        details["survival_law"] = zeno_survival(params.n)
    return ProtocolReport(
        protocol="transfer_bit",
        params={"n": params.n, "m": params.m, "bit": bit},
        outcome_probabilities=probs,
        success_probability=probs[correct],
        counterfactuality=report,
        details=details,
    )


def _entangle_run(params: ChainParams, prep: PlatePreparation):
    circuit = build_nested_zeno(params, plate_dimension=2)
    state = circuit.input_state(prep)
    final = run_forward(circuit, state, record="none").final
    d1, d2 = circuit.table.get("D1"), circuit.table.get("D2")
    a00 = final.amplitude(d1, 0)  # object absent, detector D1
    a11 = final.amplitude(d2, 1)  # object present, detector D2
    return circuit, state, final, a00, a11


def entangle(params: ChainParams, prep: PlatePreparation, audit: bool = True) -> ProtocolReport:
    """Create the entangled record alpha|1,1> + beta|0,0> between the
    photon's exit port and the plate.

    The success branch keeps (D1, plate absent) + (D2, plate present) and is
    renormalized; its fidelity against the ideal entangled target is
    reported.  The audit traces the plate out, which is what exhibits the
    trace left in all parts of the channel for a genuinely superposed plate.
    """
    params = params if isinstance(params, ChainParams) else ChainParams(*params)
    circuit, state, final, a00, a11 = _entangle_run(params, prep)
    probs = detection_probabilities(circuit, final)
    selected, success_prob = project(final, ["D1", "D2"])
    # drop the cross terms (wrong detector for each plate component)
    arr = np.array(selected.amplitudes)
    arr[circuit.table.get("D1").index, 1] = 0.0
    arr[circuit.table.get("D2").index, 0] = 0.0
    branch = JointState(circuit.table, arr)
    success_prob = float(np.sum(np.abs(arr) ** 2))
    success = renormalized(branch)
    fid = abs(
        np.conj(prep.alpha) * success.amplitude("D2", 1)
        + np.conj(prep.beta) * success.amplitude("D1", 0)
    ) ** 2
    report = None
    if audit:
        post = "D2" if abs(a11) >= abs(a00) else "D1"
        report = counterfactuality_report(trace_map(circuit, state, post, post_plate=None))
    return ProtocolReport(
        protocol="entangle",
        params={"n": params.n, "m": params.m},
        outcome_probabilities=probs,
        success_probability=success_prob,
        counterfactuality=report,
        success_state=success,
        fidelity=float(fid),
        details={
            "alpha": prep.alpha,
            "beta": prep.beta,
            "branch_amplitude_present": a11,
            "branch_amplitude_absent": a00,
        },
    )


def transfer_qubit(params: ChainParams, prep: PlatePreparation, audit: bool = True) -> ProtocolReport:
    """Entangle, then run the role-swapped ideal reversal on the success
    branch, leaving the plate's state on the sender's side.

    Reported fidelity is the receiver-side qubit's overlap with the prepared
    state; the returned "ready" weight on the reversal's exit port is in the
    details.
    """
    params = params if isinstance(params, ChainParams) else ChainParams(*params)
    ent = entangle(params, prep, audit=audit)
    _, reversal = build_qubit_transfer(params)
    success = ent.success_state
    arr = np.zeros((len(reversal.table), 2), dtype=complex)
    # role swap: the photon's exit-port label becomes the traveling system,
    # the plate value rides along as the retained qubit
    arr[reversal.table.get("T1").index, 1] = success.amplitude("D2", 1)
    arr[reversal.table.get("T0").index, 0] = success.amplitude("D1", 0)
    out = run_forward(reversal, JointState(reversal.table, arr), record="none").final
    rb = out.amplitudes[reversal.table.get("RB").index]
    ready_weight = float(np.sum(np.abs(rb) ** 2))
    psi = prep.as_vector()
    fid_alice = float(abs(np.vdot(psi, rb)) ** 2) / ready_weight if ready_weight > 0 else 0.0
    return ProtocolReport(
        protocol="transfer_qubit",
        params={"n": params.n, "m": params.m},
        outcome_probabilities=ent.outcome_probabilities,
        success_probability=ent.success_probability,
        counterfactuality=ent.counterfactuality,
        success_state=ent.success_state,
        fidelity=fid_alice,
        details={
            "alpha": prep.alpha,
            "beta": prep.beta,
            "ready_port_weight": ready_weight,
            "entangled_branch_fidelity": ent.fidelity,
        },
    )


def find_empty_channel(k: int, n: int = 100, seed: int = 0, audit: bool = True) -> ProtocolReport:
    """Locate the single unblocked channel among k without absorbing the photon.

    Channels are probed in order with presence chains; a blocked channel
    certifies its object with probability cos^2N(pi/2N) (the rest is
    absorption), while the empty channel cannot produce a D click at all, so
    it is identified after at most k-1 probes.  The trace audit of the empty
    channel's run shows the photon *is* present there.
    """
    if k < 2:
        raise ValueError("need at least two channels")
    rng = np.random.default_rng(seed)
    empty = int(rng.integers(k))
    survival = zeno_survival(n)
    probed_blocked = 0
    for ch in range(k - 1):
        if ch == empty:
            break
        probed_blocked += 1
    runs = probed_blocked + (1 if empty < k - 1 else 0)
    absorption = 1.0 - survival**probed_blocked

    free = build_zeno_presence_chain(ChainParams(n), blocked=False)
    transmit = free.meta["roles"]["transmit"]
    final = run_forward(free, free.input_state(), record="none").final
    probs = detection_probabilities(free, final)
    report = None
    if audit:
        report = counterfactuality_report(trace_map(free, free.input_state(), transmit))
    return ProtocolReport(
        protocol="find_empty_channel",
        params={"k": k, "n": n, "seed": seed},
        outcome_probabilities=probs,
        success_probability=survival**probed_blocked,
        counterfactuality=report,
        details={
            "empty_channel": empty,
            "chain_runs": runs,
            "blocked_channels_probed": probed_blocked,
            "absorption_probability": absorption,
            "certify_probability_per_blocked": survival,
        },
    )


def qkd_rounds(n_rounds: int, seed: int, n: int = 1, audit: bool = True) -> ProtocolReport:
    """Minimal counterfactual key-bit rounds.

    Per round the remote party blocks (bit 1) or frees (bit 0) their arm of
    a presence interferometer; rounds where D clicks are kept.  D can only
    click on blocked rounds, so every kept round has bit 1 and passes the
    interaction-free audit.  Outcomes are sampled with the seeded generator;
    the click probability itself is analytic.
    """
    if n_rounds < 1:
        raise ValueError("need at least one round")
    blocked = build_mzi(blocked=True) if n == 1 else build_zeno_presence_chain(ChainParams(n), blocked=True)
    dark = blocked.meta["roles"]["dark"]
    final = run_forward(blocked, blocked.input_state(), record="none").final
    probs = detection_probabilities(blocked, final)
    p_click = probs[dark]

    rng = np.random.default_rng(seed)
    bob_bits = rng.integers(0, 2, size=n_rounds)
    clicks = (bob_bits == 1) & (rng.random(n_rounds) < p_click)
    key = bob_bits[clicks]
    kept_fraction = float(np.count_nonzero(clicks)) / n_rounds
    expected = 0.5 * p_click
    sigma = math.sqrt(expected * (1.0 - expected) / n_rounds)
    report = None
    if audit:
        report = counterfactuality_report(trace_map(blocked, blocked.input_state(), dark))
    return ProtocolReport(
        protocol="qkd",
        params={"rounds": n_rounds, "seed": seed, "n": n},
        outcome_probabilities=probs,
        success_probability=kept_fraction,
        counterfactuality=report,
        details={
            "kept_count": int(np.count_nonzero(clicks)),
            "kept_fraction": kept_fraction,
            "expected_fraction": expected,
            "fraction_sigma": sigma,
            "click_probability_when_blocked": p_click,
            "all_kept_bits_one": bool(np.all(key == 1)) if key.size else True,
            "key_bits": [int(b) for b in key],
        },
    )
