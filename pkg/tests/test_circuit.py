import math

import numpy as np
import pytest

from helpers import mzi_blocked_oracle, nested_mid_backward_oracle

from cfsim.builders import ChainParams, build_mzi, build_nested_mzi, build_zeno_presence_chain
from cfsim.circuit import (
    CircuitBuilder,
    check_isometry,
    detection_probabilities,
    invert,
    run_backward,
    run_forward,
    transfer_matrix,
)
from cfsim.elements import Angle, BeamSplitter, Blocker, PhaseShift, Route
from cfsim.errors import CircuitConstructionError, ModeError
from cfsim.statespace import JointState, ModeKind, Region, basis_state, fidelity, inner_product


def test_beam_splitter_matrix_is_unitary():
    for theta in (math.pi / 4, math.pi / 7, 1.234):
        c, s = math.cos(theta), math.sin(theta)
        u = np.array([[c, 1j * s], [1j * s, c]])
        assert np.max(np.abs(u.conj().T @ u - np.eye(2))) < 1e-15


def test_layer_mode_collision_rejected():
    b = CircuitBuilder()
    b.add_mode("a"), b.add_mode("b"), b.add_mode("c")
    b.add_mode("d", kind=ModeKind.DETECTOR)
    b.set_input("a")
    b.detect("d")
    b.layer(BeamSplitter("a", "b", Angle.pi_frac(1, 4)), BeamSplitter("b", "c", Angle.pi_frac(1, 4)))
    b.layer(Route("a", "d"))
    with pytest.raises(CircuitConstructionError, match="touch mode"):
        b.build()


def test_beam_splitter_needs_distinct_modes():
    b = CircuitBuilder()
    b.add_mode("a")
    b.add_mode("d", kind=ModeKind.DETECTOR)
    b.set_input("a")
    b.detect("d")
    b.layer(BeamSplitter("a", "a", Angle.pi_frac(1, 4)))
    with pytest.raises(CircuitConstructionError, match="distinct"):
        b.build()


def test_mzi_free_dark_port():
    c = build_mzi(blocked=False)
    final = run_forward(c, c.input_state()).final
    assert final.mode_probability("D") < 1e-12
    assert final.mode_probability("B") == pytest.approx(1.0, abs=1e-12)


def test_mzi_blocked_distribution_matches_oracle():
    want = mzi_blocked_oracle()
    c = build_mzi(blocked=True)
    probs = detection_probabilities(c, run_forward(c, c.input_state()).final)
    assert probs["D"] == pytest.approx(want[0], abs=1e-12)
    assert probs["B"] == pytest.approx(want[1], abs=1e-12)
    assert probs["absorbed"] == pytest.approx(want[2], abs=1e-12)


def test_forward_snapshots_and_norm():
    c = build_mzi(blocked=True)
    t = run_forward(c, c.input_state())
    assert len(t.snapshots) == c.n_layers + 1
    for s in t.snapshots:
        assert s.norm() == pytest.approx(1.0, abs=1e-12)


def test_two_state_consistency_is_constant_in_t():
    for circuit in (build_mzi(blocked=True), build_nested_mzi("a")):
        fwd = run_forward(circuit, circuit.input_state())
        for det in circuit.detectors:
            bwd = run_backward(circuit, det)
            amps = [inner_product(bwd.state(t), fwd.state(t)) for t in range(len(fwd.snapshots))]
            assert max(abs(a - amps[-1]) for a in amps) < 1e-12


def test_backward_final_snapshot_is_post_state():
    c = build_nested_mzi("a")
    bwd = run_backward(c, "D")
    last = bwd.state(c.n_layers)
    assert last.amplitude("D", 0) == 1.0
    assert last.norm() == pytest.approx(1.0, abs=1e-15)


def test_backward_mid_circuit_amplitudes():
    # adjoint oracle for the three-arm recombination stage
    want = nested_mid_backward_oracle()  # basis (plain, inner1, inner2, -)
    c = build_nested_mzi("a")
    bwd = run_backward(c, "D")
    mid = bwd.state(c.meta["mid_t"])
    got = np.array([mid.amplitude("A"), mid.amplitude("B"), mid.amplitude("C")])
    expect = np.array([want[1], want[2], want[0]])
    assert np.max(np.abs(got - expect)) < 1e-12
    # the pattern (1, -i, 1)/sqrt(3) up to a global phase
    ref = got[0] / abs(got[0])
    assert np.max(np.abs(got / ref - np.array([1, -1j, 1]) / math.sqrt(3))) < 1e-12


def test_backward_is_absorbed_at_blocked_segment():
    c = build_mzi(blocked=True)
    fwd = run_forward(c, c.input_state())
    bwd = run_backward(c, "D")
    # upstream of the object the backward wave is gone entirely
    for t in range(3):
        assert abs(bwd.state(t).amplitude("O")) == 0.0
    # and the overlap at the object's segment vanishes at every timestep
    for t in range(c.n_layers + 1):
        f = fwd.state(t).amplitude("O")
        b = bwd.state(t).amplitude("O")
        assert abs(np.conj(b) * f) == 0.0


def test_post_selection_on_sink_rejected():
    c = build_mzi(blocked=True)
    sink = c.table.by_kind(ModeKind.SINK)[0]
    with pytest.raises(ModeError, match="absorbed, not detected"):
        run_backward(c, sink.label)


def test_post_selection_requires_detector():
    c = build_mzi(blocked=True)
    with pytest.raises(ModeError, match="not a detector"):
        run_backward(c, "L")


def test_check_isometry_on_builders():
    for circuit in (
        build_mzi(blocked=True),
        build_nested_mzi("b", blocked=True),
        build_zeno_presence_chain(ChainParams(4), blocked=True),
    ):
        rep = check_isometry(circuit)
        assert rep.passed and rep.complete
        assert rep.max_deviation < 1e-12


def test_invert_roundtrip_free_interferometer():
    c = build_mzi(blocked=False)
    inv = invert(c)
    out = run_forward(c, c.input_state()).final
    back = run_forward(inv, JointState(inv.table, out.amplitudes)).final
    assert fidelity(back, JointState(inv.table, c.input_state().amplitudes)) == pytest.approx(1.0, abs=1e-12)


def test_invert_recovers_arbitrary_states_through_blockers():
    # blockers are swaps, so inversion brings sink amplitude back
    c = build_mzi(blocked=True)
    rng = np.random.default_rng(5)
    inv = invert(c)
    for _ in range(5):
        arr = np.zeros((len(c.table), 1), complex)
        arr[:3, 0] = rng.normal(size=3) + 1j * rng.normal(size=3)
        arr /= np.linalg.norm(arr)
        out = run_forward(c, JointState(c.table, arr)).final
        back = run_forward(inv, JointState(inv.table, out.amplitudes)).final
        assert np.max(np.abs(back.amplitudes - arr)) < 1e-9


def test_double_inversion_restores_layers():
    c = build_nested_mzi("a", blocked=True)
    assert invert(invert(c)).layers == c.layers


def test_inverted_circuit_is_isometric():
    rep = check_isometry(invert(build_nested_mzi("a", blocked=True)))
    assert rep.passed


def test_propagation_is_linear():
    c = build_nested_mzi("a", blocked=True)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.normal(size=(len(c.table), 1)) + 1j * rng.normal(size=(len(c.table), 1))
        y = rng.normal(size=(len(c.table), 1)) + 1j * rng.normal(size=(len(c.table), 1))
        a, b = complex(rng.normal(), rng.normal()), complex(rng.normal(), rng.normal())
        lhs = run_forward(c, JointState(c.table, a * x + b * y)).final.amplitudes
        rx = run_forward(c, JointState(c.table, x)).final.amplitudes
        ry = run_forward(c, JointState(c.table, y)).final.amplitudes
        assert np.max(np.abs(lhs - (a * rx + b * ry))) < 1e-12


def test_empty_layer_is_identity():
    b = CircuitBuilder()
    b.add_mode("a")
    b.add_mode("d", kind=ModeKind.DETECTOR)
    b.set_input("a")
    b.detect("d")
    b.layer()
    b.layer(Route("a", "d"))
    c = b.build()
    final = run_forward(c, c.input_state()).final
    assert final.amplitude("d") == 1.0


def test_transfer_matrix_matches_propagation():
    c = build_nested_mzi("a", blocked=True)
    u = transfer_matrix(c)
    s = c.input_state()
    direct = run_forward(c, s).final.amplitudes.reshape(-1)
    assert np.max(np.abs(u @ s.amplitudes.reshape(-1) - direct)) < 1e-14


def test_detector_is_terminal():
    b = CircuitBuilder()
    b.add_mode("a")
    b.add_mode("d", kind=ModeKind.DETECTOR)
    b.set_input("a")
    b.detect("d")
    b.layer(Route("a", "d"))
    b.layer(PhaseShift("d", Angle.pi_frac(1, 2)))
    with pytest.raises(CircuitConstructionError, match="terminal"):
        b.build()
