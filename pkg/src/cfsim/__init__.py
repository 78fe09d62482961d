"""Exact discrete-time simulator of single-photon interferometric
counterfactual protocols.

Layers of the package:

* :mod:`cfsim.statespace` — modes, regions, the plate ancilla, joint states.
* :mod:`cfsim.circuit` — elements as exact isometries, forward/adjoint
  propagation, isometry checks, circuit inversion.
* :mod:`cfsim.builders` — the canonical interferometers (balanced, nested,
  chained, and the two-detector communication machine).
* :mod:`cfsim.tsvf` — two-state-vector analysis: weak values, trace maps,
  counterfactuality verdicts.
* :mod:`cfsim.protocols` — end-to-end protocol runners and reports.
* :mod:`cfsim.dsl` — the .cf circuit file format.
* :mod:`cfsim.cli` — the ``cfsim`` command.
"""

from .builders import (
    ChainParams,
    build_mzi,
    build_nested_mzi,
    build_nested_zeno,
    build_qubit_transfer,
    build_zeno_absence_chain,
    build_zeno_presence_chain,
)
from .circuit import (
    Circuit,
    CircuitBuilder,
    Trajectory,
    check_isometry,
    detection_probabilities,
    invert,
    run_backward,
    run_forward,
    transfer_matrix,
)
from .dsl import parse, serialize
from .elements import Angle, BeamSplitter, Blocker, PhaseShift, Route
from .errors import (
    CfsimError,
    DslError,
    EmptyBranchError,
    NumericInvariantError,
    UndefinedWeakValueError,
)
from .protocols import (
    ProtocolReport,
    absence_ifm,
    entangle,
    find_empty_channel,
    presence_ifm,
    qkd_rounds,
    transfer_bit,
    transfer_qubit,
    zeno_survival,
)
from .statespace import (
    JointState,
    ModeId,
    ModeKind,
    ModeTable,
    PlateBasis,
    PlatePreparation,
    Region,
    basis_state,
    fidelity,
    inner_product,
    project,
    renormalized,
)
from .tsvf import (
    CounterfactualityReport,
    TraceMap,
    TwoStateTrajectory,
    complement_states,
    counterfactuality_report,
    perturbative_trace_oracle,
    trace_map,
    two_state_trajectory,
    weak_value,
    weak_value_sum,
)

__version__ = "0.1.0"
