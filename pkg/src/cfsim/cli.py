"""Command-line front end.

JSON on stdout for runs, traces, and protocol reports; CSV for sweeps;
diagnostics on stderr.  Exit codes: 0 success, 2 usage or parse error,
3 numeric invariant violation, 4 undefined weak values (dark-port
post-selection).  Identical arguments and seed produce byte-identical
output.  The environment variable CFSIM_TOL overrides the default trace
tolerance; an explicit --tol beats both.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys

import numpy as np

from . import protocols
from .builders import (
    ChainParams,
    build_mzi,
    build_nested_mzi,
    build_nested_zeno,
    build_zeno_absence_chain,
    build_zeno_presence_chain,
)
from .circuit import Circuit, detection_probabilities, run_forward
from .dsl import parse
from .errors import CfsimError, DslError, NumericInvariantError, UndefinedWeakValueError
from .statespace import JointState, ModeKind, PlatePreparation, Region
from .tsvf import DEFAULT_TRACE_TOL, CounterfactualityReport, counterfactuality_report, trace_map

PROB_SUM_TOL = 1e-12
MAX_TRACE_ENTRIES = 200_000


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.complexfloating,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Region):
        return obj.value
    if isinstance(obj, ChainParams):
        return {"n": obj.n, "m": obj.m}
    if isinstance(obj, JointState):
        entries = []
        for m in obj.table:
            for p in range(obj.plate_dim):
                a = obj.amplitudes[m.index, p]
                if abs(a) > 1e-15:
                    entries.append({"mode": m.label, "plate": p, "amplitude": [a.real, a.imag]})
        return entries
    if isinstance(obj, CounterfactualityReport):
        return {
            "verdict": obj.verdict,
            "regions": {
                r.region.value: {"max_trace_magnitude": r.max_trace_magnitude, "present": r.present}
                for r in obj.regions
            },
            "trace_free_channel_modes": list(obj.trace_free_channel_modes),
            "traced_channel_modes": list(obj.traced_channel_modes),
            "channel_cut_found": obj.channel_cut_found,
            "tol": obj.tol,
        }
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _int_range(text: str) -> list[int]:
    """Parse '5', '1..20', or '5,10,20' into an ascending value list."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"reversed bounds {text!r}")
        return list(range(lo, hi + 1))
    vals = [int(v) for v in text.split(",") if v]
    if not vals:
        raise argparse.ArgumentTypeError("empty range")
    return vals


def _schedule(text: str) -> tuple[int, int]:
    try:
        n_s, m_s = text.split(":")
        return int(n_s), int(m_s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"schedule points look like N:M, got {text!r}") from None


def _circuit_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--builder", choices=["mzi", "nested_mzi", "zeno_presence", "zeno_absence", "nested_zeno"])
    sub.add_argument("--circuit", metavar="FILE", help="circuit document (.cf) to load")
    sub.add_argument("--N", type=int, default=1, help="outer chain length")
    sub.add_argument("--M", type=int, help="inner chain length (defaults to N)")
    sub.add_argument("--variant", choices=["a", "b"], default="a")
    sub.add_argument("--blocked", action="store_true", help="place the opaque object")
    sub.add_argument("--free", action="store_true", help="leave the object location empty")
    sub.add_argument("--plate", type=int, choices=[1, 2], default=1, help="plate dimension")
    sub.add_argument("--alpha", type=float, help="plate-present amplitude (plate dim 2)")
    sub.add_argument("--beta", type=float, help="plate-absent amplitude (plate dim 2)")


def _resolve_circuit(args) -> tuple[Circuit, str]:
    if bool(args.circuit) == bool(args.builder):
        raise DslError("exactly one of --builder or --circuit is required", 0, 0)
    if args.circuit:
        with open(args.circuit, encoding="utf-8") as fh:
            return parse(fh.read()), args.circuit
    blocked = "plate" if (args.plate == 2 and args.builder in ("mzi", "nested_mzi")) else (args.blocked and not args.free)
    m = args.M if args.M is not None else args.N
    if args.builder == "mzi":
        return build_mzi(blocked=blocked), "mzi"
    if args.builder == "nested_mzi":
        return build_nested_mzi(args.variant, blocked=blocked), "nested_mzi"
    if args.builder == "zeno_presence":
        return build_zeno_presence_chain(ChainParams(args.N), blocked=blocked), "zeno_presence"
    if args.builder == "zeno_absence":
        return build_zeno_absence_chain(ChainParams(args.N, m), blocked=blocked), "zeno_absence"
    return build_nested_zeno(ChainParams(args.N, m), plate_dimension=args.plate, blocked=blocked), "nested_zeno"


def _input_state(circuit: Circuit, args) -> JointState:
    if circuit.plate_dim == 1:
        return circuit.input_state()
    alpha = args.alpha if args.alpha is not None else 1.0 / math.sqrt(2.0)
    beta = args.beta if args.beta is not None else 1.0 / math.sqrt(2.0)
    return circuit.input_state(PlatePreparation(alpha, beta))


def _trace_tol(args) -> float:
    if args.tol is not None:
        return args.tol
    env = os.environ.get("CFSIM_TOL")
    return float(env) if env else DEFAULT_TRACE_TOL


def cmd_run(args) -> int:
    circuit, name = _resolve_circuit(args)
    final = run_forward(circuit, _input_state(circuit, args), record="none").final
    probs = detection_probabilities(circuit, final)
    total = sum(probs.values())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise NumericInvariantError(f"probabilities sum to {total!r}")
    _emit_json(
        {
            "circuit": name,
            "params": {"N": args.N, "M": args.M, "plate": circuit.plate_dim, "blocked": args.blocked},
            "probabilities": probs,
            "norm_check": total,
        }
    )
    return 0


def cmd_trace(args) -> int:
    circuit, name = _resolve_circuit(args)
    tm = trace_map(circuit, _input_state(circuit, args), args.post, args.post_plate, tol=_trace_tol(args))
    report = counterfactuality_report(tm)
    n_entries = tm.strengths.size
    payload = {
        "circuit": name,
        "post_mode": args.post,
        "post_plate": args.post_plate,
        "post_amplitude": tm.post_amplitudes[0],
        "post_amplitudes": list(tm.post_amplitudes),
        "tol": tm.tol,
        "max_overlap": tm.max_strength,
        "mode_max": tm.mode_max(),
        "regions": report,
    }
    if n_entries <= MAX_TRACE_ENTRIES:
        payload["entries"] = [
            {
                "mode": e.mode,
                "t": e.t,
                "forward": e.forward_amp,
                "backward": e.backward_amp,
                "overlap": e.overlap,
                "weak_value": e.weak_value,
                "strength": e.strength,
                "present": e.present,
            }
            for e in tm.entries()
        ]
    else:
        payload["entries_omitted"] = n_entries
    _emit_json(payload)
    return 0


def cmd_protocol(args) -> int:
    prep = PlatePreparation(
        args.alpha if args.alpha is not None else 1.0 / math.sqrt(2.0),
        args.beta if args.beta is not None else 1.0 / math.sqrt(2.0),
    )
    m = args.M if args.M is not None else args.N
    audit = not args.no_audit
    name = args.name
    if name == "presence_ifm":
        report = protocols.presence_ifm(args.N, audit=audit)
    elif name == "absence_ifm":
        report = protocols.absence_ifm(args.N, args.M, audit=audit)
    elif name == "transfer_bit":
        report = protocols.transfer_bit(ChainParams(args.N, m), args.bit, audit=audit)
    elif name == "entangle":
        report = protocols.entangle(ChainParams(args.N, m), prep, audit=audit)
    elif name == "transfer_qubit":
        report = protocols.transfer_qubit(ChainParams(args.N, m), prep, audit=audit)
    elif name == "find_empty_channel":
        report = protocols.find_empty_channel(args.K, args.N, seed=args.seed, audit=audit)
    else:
        report = protocols.qkd_rounds(args.rounds, seed=args.seed, n=args.N, audit=audit)
    _emit_json(report)
    return 0


def cmd_sweep(args) -> int:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    name = args.name
    if name == "zeno_survival":
        writer.writerow(["n", "survival_closed_form", "survival_simulated"])
        for n in args.N:
            c = build_zeno_presence_chain(ChainParams(n), blocked=True)
            final = run_forward(c, c.input_state(), record="none").final
            writer.writerow([n, repr(protocols.zeno_survival(n)), repr(final.mode_probability("D"))])
    elif name == "absence_free":
        writer.writerow(["n", "m", "p_detect_free"])
        for n in args.N:
            c = build_zeno_absence_chain(ChainParams(n, n), blocked=False)
            final = run_forward(c, c.input_state(), record="none").final
            writer.writerow([n, n, repr(final.mode_probability("D"))])
    elif name == "transfer_bit":
        writer.writerow(["n", "m", "bit", "p_correct"])
        for n, m in args.schedule:
            rep = protocols.transfer_bit(ChainParams(n, m), args.bit, audit=False)
            writer.writerow([n, m, args.bit, repr(rep.success_probability)])
    else:  # transfer_qubit
        writer.writerow(["n", "m", "fidelity"])
        prep = PlatePreparation(1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0))
        for n, m in args.schedule:
            rep = protocols.transfer_qubit(ChainParams(n, m), prep, audit=False)
            writer.writerow([n, m, repr(rep.fidelity)])
    sys.stdout.write(out.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfsim", description="interferometric counterfactual-protocol simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="propagate and print outcome probabilities")
    _circuit_args(p_run)
    p_run.add_argument("--tol", type=float, default=None)
    p_run.set_defaults(func=cmd_run)

    p_trace = subs.add_parser("trace", help="two-state trace map and region verdict")
    _circuit_args(p_trace)
    p_trace.add_argument("--post", required=True, help="detector to post-select")
    p_trace.add_argument("--post-plate", type=int, choices=[0, 1], default=None)
    p_trace.add_argument("--tol", type=float, default=None)
    p_trace.set_defaults(func=cmd_trace)

    p_proto = subs.add_parser("protocol", help="run a named protocol")
    p_proto.add_argument(
        "name",
        choices=[
            "presence_ifm",
            "absence_ifm",
            "transfer_bit",
            "entangle",
            "transfer_qubit",
            "find_empty_channel",
            "qkd",
        ],
    )
    p_proto.add_argument("--N", type=int, default=1)
    p_proto.add_argument("--M", type=int, default=None)
    p_proto.add_argument("--bit", type=int, choices=[0, 1], default=1)
    p_proto.add_argument("--alpha", type=float, default=None)
    p_proto.add_argument("--beta", type=float, default=None)
    p_proto.add_argument("--K", type=int, default=2, help="channel count for the empty-channel search")
    p_proto.add_argument("--rounds", type=int, default=1000)
    p_proto.add_argument("--seed", type=int, default=0)
    p_proto.add_argument("--no-audit", action="store_true", help="skip the trace audit")
    p_proto.set_defaults(func=cmd_protocol)

    p_sweep = subs.add_parser("sweep", help="parameter sweeps as CSV")
    p_sweep.add_argument("name", choices=["zeno_survival", "absence_free", "transfer_bit", "transfer_qubit"])
    p_sweep.add_argument("--N", type=_int_range, help="range: 5, 1..20, or 5,10,20")
    p_sweep.add_argument("--schedule", type=_schedule, nargs="+", help="N:M points")
    p_sweep.add_argument("--bit", type=int, choices=[0, 1], default=1)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "sweep":
            if args.name in ("zeno_survival", "absence_free") and not args.N:
                parser.error("this sweep requires --N")
            if args.name in ("transfer_bit", "transfer_qubit") and not args.schedule:
                parser.error("this sweep requires --schedule")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except DslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UndefinedWeakValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericInvariantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CfsimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
