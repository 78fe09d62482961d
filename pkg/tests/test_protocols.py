import math

import numpy as np
import pytest

from helpers import comm_chain_oracle, entangle_fidelity_oracle

from cfsim.builders import ChainParams
from cfsim.protocols import (
    absence_ifm,
    entangle,
    find_empty_channel,
    presence_ifm,
    qkd_rounds,
    transfer_bit,
    transfer_qubit,
    zeno_survival,
)
from cfsim.statespace import PlatePreparation, Region

SQ2 = math.sqrt(2.0)
HALF = PlatePreparation(1 / SQ2, 1 / SQ2)


def test_presence_single():
    rep = presence_ifm(1)
    assert rep.success_probability == pytest.approx(0.25, abs=1e-12)
    assert rep.outcome_probabilities["absorbed"] == pytest.approx(0.5, abs=1e-12)
    assert rep.verdict == "counterfactual"
    assert rep.details["dark_port_probability_when_free"] < 1e-12


def test_presence_chain_efficiency_grows():
    rep = presence_ifm(100)
    assert rep.success_probability == pytest.approx(zeno_survival(100), abs=1e-9)
    assert rep.success_probability > 0.97
    assert rep.verdict == "counterfactual"


def test_absence_single():
    rep = absence_ifm(1)
    assert rep.success_probability == pytest.approx(1 / 9, abs=1e-12)
    assert rep.verdict == "not_counterfactual"
    assert rep.counterfactuality.region(Region.BOB).present
    assert rep.details["dark_port_probability_when_blocked"] < 1e-12


def test_absence_chain_monotone():
    p10 = absence_ifm(10, audit=False).success_probability
    p20 = absence_ifm(20, audit=False).success_probability
    assert p20 > p10
    assert absence_ifm(20, audit=False).details["dark_port_probability_when_blocked"] < 1e-12


def test_transfer_bit_statistics_and_verdicts():
    params = ChainParams(5, 25)
    a0, a1 = comm_chain_oracle(5, 25)
    rep1 = transfer_bit(params, 1)
    assert rep1.success_probability == pytest.approx(abs(a1) ** 2, abs=1e-12)
    assert rep1.verdict == "crossing_free"
    assert rep1.counterfactuality.region(Region.BOB).max_trace_magnitude == 0.0
    rep0 = transfer_bit(params, 0)
    assert rep0.success_probability == pytest.approx(a0**2, abs=1e-12)
    assert rep0.verdict == "crossing_free"
    assert rep0.counterfactuality.region(Region.BOB).present


def test_transfer_bit_rejects_bad_bit():
    with pytest.raises(ValueError):
        transfer_bit(ChainParams(2, 2), 2)


def test_entangle_fidelity_matches_oracle():
    params = ChainParams(5, 25)
    rep = entangle(params, HALF, audit=False)
    want = entangle_fidelity_oracle(5, 25, 1 / SQ2, 1 / SQ2)
    assert rep.fidelity == pytest.approx(want, abs=1e-12)
    a0, a1 = comm_chain_oracle(5, 25)
    assert rep.success_probability == pytest.approx((abs(a1) ** 2 + a0**2) / 2, abs=1e-12)


def test_entangle_with_certain_plate_reduces_to_bit_one():
    params = ChainParams(4, 12)
    rep = entangle(params, PlatePreparation(1.0, 0.0), audit=False)
    bit = transfer_bit(params, 1, audit=False)
    assert rep.success_probability == pytest.approx(bit.success_probability, abs=1e-12)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-12)  # branch is exactly the target


def test_entangle_success_branch_is_linear_in_preparation():
    # success branch of the superposed run equals the weighted basis branches
    params = ChainParams(3, 9)
    a0, a1 = comm_chain_oracle(3, 9)
    rep = entangle(params, HALF, audit=False)
    s = rep.success_state
    got = np.array([s.amplitude("D2", 1), s.amplitude("D1", 0)])
    want = np.array([a1 / SQ2, a0 / SQ2])
    want /= np.linalg.norm(want)
    assert np.max(np.abs(got - want)) < 1e-9


def test_entangle_superposed_is_not_counterfactual():
    rep = entangle(ChainParams(4, 12), HALF)
    assert rep.verdict == "not_counterfactual"
    assert not rep.counterfactuality.channel_cut_found


def test_transfer_qubit_ideal_reversal_and_finite_gap():
    rep = transfer_qubit(ChainParams(5, 25), HALF, audit=False)
    assert rep.details["ready_port_weight"] == pytest.approx(1.0, abs=1e-9)
    want = entangle_fidelity_oracle(5, 25, 1 / SQ2, 1 / SQ2)
    assert rep.fidelity == pytest.approx(want, abs=1e-9)


def test_transfer_qubit_certain_plate_is_exact():
    rep = transfer_qubit(ChainParams(3, 9), PlatePreparation(1.0, 0.0), audit=False)
    assert rep.fidelity == pytest.approx(1.0, abs=1e-12)


def test_transfer_qubit_fidelity_nondecreasing_along_schedule():
    fids = [
        transfer_qubit(ChainParams(n, m), HALF, audit=False).fidelity
        for n, m in ((2, 4), (4, 16), (8, 64))
    ]
    assert fids[0] <= fids[1] <= fids[2]


def test_find_empty_channel_small():
    rep = find_empty_channel(2, 100, seed=3)
    assert rep.details["empty_channel"] in (0, 1)
    assert rep.details["absorption_probability"] < 0.03
    assert rep.details["chain_runs"] <= 1
    # the located empty channel is emphatically not photon-free
    assert rep.verdict == "not_counterfactual"
    assert rep.counterfactuality.region(Region.CHANNEL).present
    assert rep.counterfactuality.region(Region.BOB).present


def test_find_empty_channel_elimination_bound():
    for seed in range(6):
        rep = find_empty_channel(4, 50, seed=seed)
        assert rep.details["chain_runs"] <= 3


def test_qkd_rounds_deterministic_and_counterfactual():
    rep = qkd_rounds(1000, seed=7)
    again = qkd_rounds(1000, seed=7)
    assert rep.details["key_bits"] == again.details["key_bits"]
    expected = rep.details["expected_fraction"]
    sigma = rep.details["fraction_sigma"]
    assert expected == pytest.approx(1 / 8, abs=1e-12)
    assert abs(rep.details["kept_fraction"] - expected) < 4 * sigma
    assert rep.details["all_kept_bits_one"]
    assert rep.verdict == "counterfactual"


def test_qkd_chain_variant_click_rate():
    rep = qkd_rounds(400, seed=11, n=10)
    assert rep.details["click_probability_when_blocked"] == pytest.approx(zeno_survival(10), abs=1e-9)
    assert rep.details["all_kept_bits_one"]


def test_reports_always_account_for_all_probability():
    for rep in (
        presence_ifm(3, audit=False),
        absence_ifm(2, audit=False),
        transfer_bit(ChainParams(3, 6), 0, audit=False),
        entangle(ChainParams(3, 6), HALF, audit=False),
    ):
        assert sum(rep.outcome_probabilities.values()) == pytest.approx(1.0, abs=1e-12)
