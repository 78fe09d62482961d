import math

import numpy as np
import pytest

from cfsim.errors import EmptyBranchError, ModeError, SpaceMismatchError
from cfsim.statespace import (
    JointState,
    ModeId,
    ModeKind,
    ModeTable,
    PlatePreparation,
    Region,
    basis_state,
    fidelity,
    inner_product,
    project,
    renormalized,
)


@pytest.fixture
def table():
    return ModeTable(
        (
            ModeId(0, "IN", ModeKind.PATH, Region.ALICE),
            ModeId(1, "OUT", ModeKind.PATH, Region.CHANNEL),
            ModeId(2, "D", ModeKind.DETECTOR, Region.ALICE),
        )
    )


def test_basis_state_plain(table):
    s = basis_state(table, "IN")
    assert s.amplitude("IN", 0) == 1.0
    assert s.amplitude("OUT", 0) == 0.0
    assert s.norm() == pytest.approx(1.0, abs=1e-15)


def test_basis_state_superposed_plate(table):
    prep = PlatePreparation(1 / math.sqrt(2), 1 / math.sqrt(2))
    s = basis_state(table, "IN", prep)
    assert s.plate_dim == 2
    assert s.amplitude("IN", 0) == pytest.approx(1 / math.sqrt(2))
    assert s.amplitude("IN", 1) == pytest.approx(1 / math.sqrt(2))


def test_unknown_mode_is_named(table):
    with pytest.raises(ModeError, match="nowhere"):
        basis_state(table, "nowhere")


def test_duplicate_labels_rejected():
    with pytest.raises(ModeError, match="duplicate"):
        ModeTable((ModeId(0, "A"), ModeId(1, "A")))


def test_plate_preparation_normalization():
    PlatePreparation(0.6, 0.8)
    with pytest.raises(ValueError, match="normalized"):
        PlatePreparation(1.0, 0.5)


def test_inner_product_basics(table):
    a = basis_state(table, "IN")
    b = basis_state(table, "OUT")
    assert inner_product(a, a) == 1.0
    assert inner_product(a, b) == 0.0


def test_inner_product_conjugate_symmetry(table):
    rng = np.random.default_rng(11)
    for _ in range(25):
        x = rng.normal(size=(3, 1)) + 1j * rng.normal(size=(3, 1))
        y = rng.normal(size=(3, 1)) + 1j * rng.normal(size=(3, 1))
        a, b = JointState(table, x), JointState(table, y)
        lhs = inner_product(a, b)
        rhs = np.conj(inner_product(b, a))
        assert abs(lhs - rhs) <= 1e-15
        assert abs(lhs) <= a.norm() * b.norm() + 1e-12


def test_inner_product_space_mismatch(table):
    other = ModeTable((ModeId(0, "IN"),))
    with pytest.raises(SpaceMismatchError):
        inner_product(basis_state(table, "IN"), basis_state(other, "IN"))


def test_project_identity(table):
    s = basis_state(table, "IN")
    restricted, p = project(s, ["IN", "OUT", "D"])
    assert p == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(restricted.amplitudes, s.amplitudes)


def test_project_empty_branch_signal(table):
    s = basis_state(table, "IN")
    restricted, p = project(s, ["D"])
    assert p == 0.0  # reading a dark branch is not an error
    with pytest.raises(EmptyBranchError):
        renormalized(restricted)


def test_project_single_plate_component(table):
    prep = PlatePreparation(0.6, 0.8)
    s = basis_state(table, "IN", prep)
    _, p = project(s, ["IN"], plate=1)
    assert p == pytest.approx(0.36, abs=1e-12)


def test_fidelity(table):
    a = basis_state(table, "IN")
    b = basis_state(table, "OUT")
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-15)
    assert fidelity(a, b) == 0.0
    bad = JointState(table, 0.5 * np.asarray(a.amplitudes))
    with pytest.raises(ValueError, match="not normalized"):
        fidelity(a, bad)


def test_amplitudes_are_immutable(table):
    s = basis_state(table, "IN")
    with pytest.raises(ValueError):
        s.amplitudes[0, 0] = 2.0
