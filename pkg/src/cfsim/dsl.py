"""Line-oriented text format for circuits (.cf files).

Grammar ('#' starts a comment, blank lines ignored):

    plate dim=<1|2>
    mode <label> [region=alice|channel|bob|internal] [kind=path|detector]
    input <mode>
    detect <mode> [<mode> ...]
    layer                      # begins a layer; element lines follow
      bs <m1> <m2> theta=<angle>
      phase <m> phi=<angle>
      block <m> [when=plate]
      route <m1> <m2>
    use <builder> key=value ...   # expands to a canonical circuit; must be
                                  # the only directive in the document

Angles are radian literals or exact pi fractions (pi, -pi/2, 3pi/8); pi
fractions are kept symbolic until matrix construction so dark-port tunings
survive a round trip bit-for-bit.  Sink modes are never written: each
`block` allocates its own sink when the circuit is assembled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .builders import (
    ChainParams,
    build_mzi,
    build_nested_mzi,
    build_nested_zeno,
    build_zeno_absence_chain,
    build_zeno_presence_chain,
)
from .circuit import Circuit, CircuitBuilder
from .elements import Angle, BeamSplitter, Blocker, PhaseShift, Route
from .errors import CircuitConstructionError, DslError
from .statespace import ModeKind, Region

_PI_RE = re.compile(r"^([+-]?)(\d*)pi(?:/(\d+))?$")
_ELEMENT_WORDS = {"bs", "phase", "block", "route"}


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class CircuitDocument:
    source: str
    circuit: Circuit
    positions: dict  # directive index -> (line, column) of its first token


def _tokenize(text: str):
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [Token(m.group(), line_no, m.start() + 1) for m in re.finditer(r"\S+", line)]
        if toks:
            yield toks


def _parse_angle(tok: Token, value: str) -> Angle:
    m = _PI_RE.match(value)
    if m:
        sign = -1 if m.group(1) == "-" else 1
        num = int(m.group(2)) if m.group(2) else 1
        den = int(m.group(3)) if m.group(3) else 1
        if den == 0:
            raise DslError("zero denominator in angle", tok.line, tok.column)
        return Angle.pi_frac(sign * num, den)
    try:
        return Angle.radians(float(value))
    except ValueError:
        raise DslError(f"cannot parse angle {value!r}", tok.line, tok.column) from None


def _kv(tok: Token) -> tuple[str, str]:
    if "=" not in tok.text:
        raise DslError(f"expected key=value, got {tok.text!r}", tok.line, tok.column)
    k, v = tok.text.split("=", 1)
    return k, v


def _expand_use(toks: list[Token]) -> Circuit:
    if len(toks) < 2:
        raise DslError("use requires a builder name", toks[0].line, toks[0].column)
    name = toks[1].text
    kw: dict = {}
    for tok in toks[2:]:
        k, v = _kv(tok)
        if k in ("N", "M", "plate"):
            try:
                kw[k] = int(v)
            except ValueError:
                raise DslError(f"{k} must be an integer, got {v!r}", tok.line, tok.column) from None
        elif k == "blocked":
            kw[k] = {"true": True, "false": False, "plate": "plate"}.get(v)
            if kw[k] is None:
                raise DslError(f"blocked must be true, false, or plate, got {v!r}", tok.line, tok.column)
        elif k == "variant":
            kw[k] = v
        else:
            raise DslError(f"unknown builder option {k!r}", tok.line, tok.column)
    try:
        if name == "mzi":
            return build_mzi(blocked=kw.get("blocked", False))
        if name == "nested_mzi":
            return build_nested_mzi(kw.get("variant", "a"), blocked=kw.get("blocked", False))
        if name == "zeno_presence":
            return build_zeno_presence_chain(ChainParams(kw["N"]), blocked=kw.get("blocked", True))
        if name == "zeno_absence":
            return build_zeno_absence_chain(
                ChainParams(kw["N"], kw.get("M", kw["N"])), blocked=kw.get("blocked", False)
            )
        if name == "nested_zeno":
            return build_nested_zeno(
                ChainParams(kw["N"], kw.get("M", 1)),
                plate_dimension=kw.get("plate", 1),
                blocked=kw.get("blocked", True),
            )
    except KeyError as exc:
        raise DslError(f"builder {name!r} requires option {exc.args[0]}", toks[0].line, toks[0].column) from None
    except (ValueError, CircuitConstructionError) as exc:
        raise DslError(str(exc), toks[0].line, toks[0].column) from None
    raise DslError(f"unknown builder {name!r}", toks[1].line, toks[1].column)


def parse_document(text: str) -> CircuitDocument:
    """Parse a circuit document; every failure names a line and column."""
    lines = list(_tokenize(text))
    if not lines:
        raise DslError("empty document", 1)

    # a `use` line must stand alone
    for toks in lines:
        if toks[0].text == "use":
            if len(lines) != 1:
                raise DslError("use must be the only directive in the document", toks[0].line, toks[0].column)
            return CircuitDocument(text, _expand_use(toks), {0: (toks[0].line, toks[0].column)})

    declared: dict[str, Token] = {}
    declared_kinds: dict[str, str] = {}
    regions: dict[str, Region] = {}
    plate_seen = input_seen = False
    input_label = ""
    detect_toks: list[Token] = []
    in_layer = False
    current_layer: list = []
    layers: list[list] = []
    positions: dict = {}
    last = lines[-1][0]

    def close_layer():
        nonlocal in_layer
        if in_layer:
            layers.append(current_layer.copy())
            current_layer.clear()
            in_layer = False

    def need_mode(tok: Token) -> str:
        if tok.text not in declared:
            raise DslError(f"unknown mode {tok.text!r}", tok.line, tok.column)
        return tok.text

    plate_dim = 1
    for toks in lines:
        head = toks[0]
        word = head.text
        positions[len(positions)] = (head.line, head.column)
        if word == "plate":
            close_layer()
            if plate_seen:
                raise DslError("plate declared twice", head.line, head.column)
            plate_seen = True
            if len(toks) != 2:
                raise DslError("plate takes exactly dim=<1|2>", head.line, head.column)
            k, v = _kv(toks[1])
            if k != "dim" or v not in ("1", "2"):
                raise DslError("plate takes exactly dim=<1|2>", toks[1].line, toks[1].column)
            plate_dim = int(v)
        elif word == "mode":
            close_layer()
            if len(toks) < 2:
                raise DslError("mode requires a label", head.line, head.column)
            label = toks[1].text
            if label in declared:
                raise DslError(f"duplicate mode {label!r}", toks[1].line, toks[1].column)
            region, kind = Region.INTERNAL, "path"
            for tok in toks[2:]:
                k, v = _kv(tok)
                if k == "region":
                    try:
                        region = Region(v)
                    except ValueError:
                        raise DslError(f"unknown region {v!r}", tok.line, tok.column) from None
                elif k == "kind":
                    if v not in ("path", "detector"):
                        raise DslError(f"mode kind must be path or detector, got {v!r}", tok.line, tok.column)
                    kind = v
                else:
                    raise DslError(f"unknown mode option {k!r}", tok.line, tok.column)
            declared[label] = toks[1]
            declared_kinds[label] = kind
            regions[label] = region
        elif word == "input":
            close_layer()
            if input_seen:
                raise DslError("input declared twice", head.line, head.column)
            if len(toks) != 2:
                raise DslError("input takes exactly one mode", head.line, head.column)
            input_seen = True
            input_label = need_mode(toks[1])
        elif word == "detect":
            close_layer()
            if detect_toks:
                raise DslError("detect declared twice", head.line, head.column)
            if len(toks) < 2:
                raise DslError("detect requires at least one mode", head.line, head.column)
            for tok in toks[1:]:
                need_mode(tok)
            detect_toks = list(toks[1:])
        elif word == "layer":
            close_layer()
            if len(toks) != 1:
                raise DslError("layer takes no arguments", toks[1].line, toks[1].column)
            in_layer = True
        elif word in _ELEMENT_WORDS:
            if not in_layer:
                raise DslError(f"{word} outside a layer", head.line, head.column)
            el = _parse_element(toks, need_mode)
            used = {m for prev in current_layer for m in prev.modes()}
            for lbl in el.modes():
                if lbl in used:
                    raise DslError(f"mode {lbl!r} already used in this layer", head.line, head.column)
            current_layer.append(el)
        else:
            raise DslError(f"unknown directive {word!r}", head.line, head.column)
    close_layer()

    if not input_seen:
        raise DslError("missing input directive", last.line, last.column)
    if not detect_toks:
        raise DslError("missing detect directive", last.line, last.column)

    b = CircuitBuilder(plate_dim=plate_dim)
    detect_set = {t.text for t in detect_toks}
    for label, tok in declared.items():
        if declared_kinds[label] == "detector" and label not in detect_set:
            raise DslError(f"mode {label!r} is declared a detector but not listed in detect", tok.line, tok.column)
        kind = ModeKind.DETECTOR if label in detect_set else ModeKind.PATH
        b.add_mode(label, regions[label], kind)
    b.set_input(input_label)
    b.detect(*[t.text for t in detect_toks])
    for layer in layers:
        b.layer(*layer)
    try:
        circuit = b.build()
    except CircuitConstructionError as exc:
        raise DslError(str(exc), last.line, last.column) from None
    return CircuitDocument(text, circuit, positions)


def _parse_element(toks: list[Token], need_mode):
    word = toks[0].text
    if word == "bs":
        if len(toks) != 4:
            raise DslError("bs takes <m1> <m2> theta=<angle>", toks[0].line, toks[0].column)
        m1, m2 = need_mode(toks[1]), need_mode(toks[2])
        if m1 == m2:
            raise DslError("distinct modes required", toks[2].line, toks[2].column)
        k, v = _kv(toks[3])
        if k != "theta":
            raise DslError(f"expected theta=..., got {k}=", toks[3].line, toks[3].column)
        return BeamSplitter(m1, m2, _parse_angle(toks[3], v))
    if word == "phase":
        if len(toks) != 3:
            raise DslError("phase takes <m> phi=<angle>", toks[0].line, toks[0].column)
        m = need_mode(toks[1])
        k, v = _kv(toks[2])
        if k != "phi":
            raise DslError(f"expected phi=..., got {k}=", toks[2].line, toks[2].column)
        return PhaseShift(m, _parse_angle(toks[2], v))
    if word == "block":
        if len(toks) not in (2, 3):
            raise DslError("block takes <m> [when=plate]", toks[0].line, toks[0].column)
        m = need_mode(toks[1])
        control = "always"
        if len(toks) == 3:
            k, v = _kv(toks[2])
            if k != "when" or v != "plate":
                raise DslError("only when=plate is recognized", toks[2].line, toks[2].column)
            control = "plate"
        return Blocker(m, control)
    # route
    if len(toks) != 3:
        raise DslError("route takes <m1> <m2>", toks[0].line, toks[0].column)
    m1, m2 = need_mode(toks[1]), need_mode(toks[2])
    if m1 == m2:
        raise DslError("distinct modes required", toks[2].line, toks[2].column)
    return Route(m1, m2)


def parse(text: str) -> Circuit:
    """Parse a circuit document, returning the circuit."""
    return parse_document(text).circuit


def serialize(circuit: Circuit) -> str:
    """Canonical text form: modes by index, layers in sequence.

    Sink modes are omitted (each `block` recreates its own sink on parse, in
    the same order), so parse(serialize(c)) reproduces c's transfer map
    exactly.
    """
    out = [f"plate dim={circuit.plate_dim}"]
    for m in circuit.table:
        if m.kind == ModeKind.SINK:
            continue
        line = f"mode {m.label} region={m.region.value}"
        if m.kind == ModeKind.DETECTOR:
            line += " kind=detector"
        out.append(line)
    out.append(f"input {circuit.input_mode.label}")
    out.append("detect " + " ".join(m.label for m in circuit.detectors))
    # element order within a layer is preserved: blockers allocate their
    # sinks in encounter order, so reordering would renumber sink modes
    for layer in circuit.layers:
        out.append("layer")
        for el in layer:
            if isinstance(el, BeamSplitter):
                out.append(f"  bs {el.m1} {el.m2} theta={el.theta}")
            elif isinstance(el, PhaseShift):
                out.append(f"  phase {el.m} phi={el.phi}")
            elif isinstance(el, Blocker):
                out.append(f"  block {el.m}" + (" when=plate" if el.control == "plate" else ""))
            else:
                out.append(f"  route {el.m1} {el.m2}")
    return "\n".join(out) + "\n"
