"""Shared test oracles: small hand-rolled matrix computations, independent
of the package's propagation engine, plus a seeded random-circuit generator.
"""

from __future__ import annotations

import math

import numpy as np


def bs_full(n: int, i: int, j: int, theta: float) -> np.ndarray:
    """n x n unitary acting as the splitter convention on modes (i, j)."""
    u = np.eye(n, dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    u[i, i] = u[j, j] = c
    u[i, j] = u[j, i] = 1j * s
    return u


def phase_full(n: int, i: int, phi: float) -> np.ndarray:
    u = np.eye(n, dtype=complex)
    u[i, i] = complex(math.cos(phi), math.sin(phi))
    return u


def swap_full(n: int, i: int, j: int) -> np.ndarray:
    u = np.eye(n, dtype=complex)
    u[i, i] = u[j, j] = 0.0
    u[i, j] = u[j, i] = 1.0
    return u


def mzi_blocked_oracle() -> tuple[float, float, float]:
    """(P(dark), P(bright), P(absorbed)) for the balanced interferometer
    with an absorber in one arm; 3 modes: 0 = kept arm, 1 = object arm,
    2 = absorber."""
    u = bs_full(3, 0, 1, math.pi / 4)
    u = swap_full(3, 1, 2) @ u
    u = bs_full(3, 0, 1, math.pi / 4) @ u
    v = u @ np.array([1.0, 0.0, 0.0], dtype=complex)
    return abs(v[0]) ** 2, abs(v[1]) ** 2, abs(v[2]) ** 2


def nested_oracle(block_first_arm: bool = False):
    """Hand-rolled three-arm interferometer over modes
    (0=plain, 1=excursion/inner1, 2=inner2, 3=waste-sink-if-blocked).

    Returns (mid_vector_over_arms, output_vector) with output basis
    (0=dark port D, 1=bright, 2=waste, 3=absorbed).
    """
    n = 4
    third = math.acos(1.0 / math.sqrt(3.0))
    u = bs_full(n, 0, 1, third)
    u = phase_full(n, 1, -math.pi / 2) @ u
    u = bs_full(n, 1, 2, math.pi / 4) @ u
    mid = u @ np.eye(n, dtype=complex)[:, 0]
    if block_first_arm:
        u = swap_full(n, 1, 3) @ u
    u = bs_full(n, 1, 2, math.pi / 4) @ u
    u = phase_full(n, 1, -math.pi / 2) @ u
    u = bs_full(n, 0, 1, third) @ u
    out = u @ np.eye(n, dtype=complex)[:, 0]
    return mid, out


def nested_mid_backward_oracle():
    """Backward amplitudes on (arm1, arm2, plain) at mid-circuit for
    post-selection on the dark port, via the adjoint of the mid-to-out map."""
    n = 4
    third = math.acos(1.0 / math.sqrt(3.0))
    u = bs_full(n, 1, 2, math.pi / 4)
    u = phase_full(n, 1, -math.pi / 2) @ u
    u = bs_full(n, 0, 1, third) @ u
    post = np.zeros(n, dtype=complex)
    post[0] = 1.0
    return u.conj().T @ post


def zeno_presence_oracle(n: int, blocked: bool):
    """(P(left detector), P(right port), P(absorbed)) by explicit matrix
    steps over (left, right, sink_k...) amplitudes."""
    left = 1.0 + 0.0j
    right = 0.0 + 0.0j
    absorbed = 0.0
    th = math.pi / (2 * n)
    c, s = math.cos(th), math.sin(th)
    for _ in range(n):
        left, right = c * left + 1j * s * right, 1j * s * left + c * right
        if blocked:
            absorbed += abs(right) ** 2
            right = 0.0
    return abs(left) ** 2, abs(right) ** 2, absorbed


def comm_chain_oracle(n: int, m: int):
    """(a_bit0, a_bit1): detector amplitudes of the communication machine.

    a_bit0 is the free-case D1 amplitude (pure survival); a_bit1 the
    blocked-case D2 amplitude after the quarter-turn correction, computed
    from the 2x2 outer rotation with each excursion attenuated by the inner
    mirror amplitude cos^M(pi/2M).
    """
    r = math.cos(math.pi / (2 * m)) ** m
    th = math.pi / (2 * n)
    b = np.array(
        [[math.cos(th), 1j * math.sin(th)], [1j * math.sin(th), math.cos(th)]], dtype=complex
    )
    t = np.eye(2, dtype=complex)
    for _ in range(n):
        t = np.diag([1.0, r]) @ b @ t
    a_bit1 = complex(np.exp(-1j * math.pi / 2) * t[1, 0])
    a_bit0 = math.cos(th) ** n
    return a_bit0, a_bit1


def entangle_fidelity_oracle(n: int, m: int, alpha: complex, beta: complex) -> float:
    a0, a1 = comm_chain_oracle(n, m)
    sa, sb = alpha * a1, beta * a0
    nrm = abs(sa) ** 2 + abs(sb) ** 2
    return abs(np.conj(alpha) * sa + np.conj(beta) * sb) ** 2 / nrm


# ---------------------------------------------------------------------------
# random circuit documents


def random_circuit_doc(rng: np.random.Generator) -> str:
    """A small random but well-formed circuit document."""
    n_path = int(rng.integers(3, 6))
    plate = int(rng.integers(1, 3))
    paths = [f"m{i}" for i in range(n_path)]
    regions = rng.choice(["alice", "channel", "bob", "internal"], size=n_path)
    lines = [f"plate dim={plate}"]
    lines += [f"mode {p} region={r}" for p, r in zip(paths, regions)]
    lines += ["mode d0 region=alice", "mode d1 region=alice", "input m0", "detect d0 d1"]
    denoms = [2, 3, 4, 6, 8]
    for _ in range(int(rng.integers(3, 8))):
        lines.append("layer")
        used: set[str] = set()
        for _ in range(int(rng.integers(1, 3))):
            avail = [p for p in paths if p not in used]
            kind = rng.choice(["bs", "bs", "phase", "route", "block"])
            if kind == "bs" and len(avail) >= 2:
                a, b = rng.choice(avail, size=2, replace=False)
                if rng.random() < 0.7:
                    ang = f"pi/{rng.choice(denoms)}"
                else:
                    ang = repr(float(rng.uniform(-math.pi, math.pi)))
                lines.append(f"  bs {a} {b} theta={ang}")
                used |= {a, b}
            elif kind == "phase" and avail:
                a = rng.choice(avail)
                lines.append(f"  phase {a} phi=pi/{rng.choice(denoms)}")
                used.add(a)
            elif kind == "route" and len(avail) >= 2:
                a, b = rng.choice(avail, size=2, replace=False)
                lines.append(f"  route {a} {b}")
                used |= {a, b}
            elif kind == "block" and avail:
                a = rng.choice(avail)
                when = " when=plate" if (plate == 2 and rng.random() < 0.5) else ""
                lines.append(f"  block {a}{when}")
                used.add(a)
    lines.append("layer")
    lines.append("  route m0 d0")
    lines.append("  route m1 d1")
    return "\n".join(lines) + "\n"


def first_blocker_layer(circuit) -> int | None:
    from cfsim.elements import Blocker

    for t, layer in enumerate(circuit.layers, start=1):
        if any(isinstance(el, Blocker) for el in layer):
            return t
    return None


def structural_checks(circuit, iso_tol=1e-12, pair_tol=1e-12, sum_tol=1e-9):
    """The four structural invariants shared by the property and acceptance
    suites: isometry, serialization round trip, forward/backward pairing
    constancy, and the weak-value resolution of the identity at every
    pre-absorption cut.  Returns how many post-selections were exercised."""
    from cfsim.circuit import check_isometry, run_backward, run_forward, transfer_matrix
    from cfsim.dsl import parse, serialize
    from cfsim.statespace import PlateBasis, inner_product
    from cfsim.tsvf import two_state_trajectory, weak_value_sum

    rep = check_isometry(circuit, tol=iso_tol)
    assert rep.passed, f"isometry deviation {rep.max_deviation:.3e}"

    parsed = parse(serialize(circuit))
    dev = np.max(np.abs(transfer_matrix(parsed) - transfer_matrix(circuit)))
    assert dev < 1e-12, f"round-trip transfer map deviation {dev:.3e}"

    state = circuit.input_state(PlateBasis.ABSENT if circuit.plate_dim == 2 else None)
    fwd = run_forward(circuit, state)
    assert abs(fwd.final.norm() - 1.0) < 1e-12

    cut_end = first_blocker_layer(circuit) or circuit.n_layers + 1
    checked = 0
    for det in circuit.detectors:
        for plate in range(circuit.plate_dim):
            amp = fwd.final.amplitude(det, plate)
            if abs(amp) < 1e-8:
                continue
            bwd = run_backward(circuit, det, plate)
            pairings = [inner_product(bwd.state(t), fwd.state(t)) for t in range(circuit.n_layers + 1)]
            assert max(abs(p - amp) for p in pairings) < pair_tol

            ts = two_state_trajectory(circuit, state, det, plate)
            for t in range(cut_end):
                assert abs(weak_value_sum(ts, t) - 1.0) < sum_tol
            checked += 1
    return checked
