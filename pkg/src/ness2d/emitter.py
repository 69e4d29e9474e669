"""Textual circuit programs for whole trajectories, and an interpreter for them.

The IR is a small line-oriented dialect in the style of OpenQASM 3::

    qreg q[18];
    creg c[76];
    h q[0];
    tk2(0.1, 0.1, 0.0) q[0], q[1];
    measure q[16] -> c[16];
    reset q[16];
    if (c[16]==1) {
    measure q[0] -> c[17];
    reset q[0];
    x q[0];
    }
    barrier;

Angles are radians printed with 17 significant digits.  Internally gates take
turn-normalized parameters (``rz(t) = exp(-i pi t Z / 2)``), so emission
multiplies by pi and interpretation divides by it.

Register layout.  Qubits ``0..N-1`` are the sites, followed by the two
compact-encoding ancillas in fermion mode, followed by the source coin and the
drain coin.  Classical bits ``0..N-1`` hold the initial-state draws (the
source and drain are fixed for a random product start), then four
bits per period (source coin, source outcome, drain coin, drain outcome), then
``N`` final-shot bits.  The first ``barrier`` marks the end of the site
preparation and the last one the end of the evolution; the interpreter reads
the initial bitstring and snapshots the state at those points.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .channel import TrajectoryRecord
from .lattice import LatticeSpec
from .model import ConfigError, GateSequence, ModelParams, build_hcb_trotter_step, coin_angle
from .qsim import NumericalIntegrityError, RngStream, StateVector

FORMAT_VERSION = "ness2d-qprog 1"
FIXED_GATES = {"h": 1, "x": 1, "y": 1, "z": 1, "s": 1, "sdg": 1, "cz": 2}
PARAM_GATES = {"rx": (1, 1), "ry": (1, 1), "rz": (1, 1), "tk2": (3, 2)}  # name: (n_params, arity)
MODES = ("hcb", "fermion", "jw")


class ParseError(ValueError):
    """Malformed program text; ``str()`` reads ``line:col: message``."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line, self.col, self.message = line, col, message


class SemanticError(ValueError):
    """A well-formed program that cannot run, located by instruction index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"instruction {index}: {message}")
        self.index, self.message = index, message


@dataclass
class Instruction:
    op: str  # gate name, "measure", "reset", "barrier" or "if"
    qubits: tuple = ()
    params: tuple = ()  # radians
    clbit: int | None = None
    body: list = field(default_factory=list)  # for "if"
    line: int = 0


@dataclass
class CircuitProgram:
    n_qubits: int
    n_clbits: int
    instructions: list
    metadata: dict = field(default_factory=dict)

    def count(self, op: str) -> int:
        """Number of instructions named ``op``, including those inside conditional blocks."""
        def walk(items):
            return sum((i.op == op) + walk(i.body) for i in items)
        return walk(self.instructions)


# --- emission --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    return "0.0" if s in ("0", "-0") else s


def _gate_line(kind: str, qubits, params=()) -> str:
    qs = ", ".join(f"q[{q}]" for q in qubits)
    if params:
        return f"{kind}({', '.join(_fmt(math.pi * t) for t in params)}) {qs};"
    return f"{kind} {qs};"


def _sequence_lines(seq: GateSequence) -> list[str]:
    return [_gate_line(g.kind, g.qubits, g.params) for g in seq.gates]


def _trotter_and_prep(params: ModelParams, lat: LatticeSpec, mode: str):
    """(physical qubit count, Trotter step, ancilla preparation or None, encoding name)."""
    if mode == "hcb":
        if params.fermionic:
            raise ConfigError("hcb mode needs hard-core boson statistics")
        return lat.n_sites, build_hcb_trotter_step(lat, params), None, "hcb"
    if not params.fermionic:
        raise ConfigError(f"{mode} mode needs fermionic statistics")
    from .fermions import DKEncoding, JordanWignerEncoding

    if mode == "fermion":
        if (lat.width, lat.height) != (4, 4):
            raise ConfigError("fermion mode uses the compact encoding, which is laid out for 4x4 only")
        enc = DKEncoding(lat)
        return enc.n_qubits, enc.trotter_step(params), enc.ancilla_preparation(), "dk"
    if mode == "jw":
        enc = JordanWignerEncoding(lat)
        return lat.n_sites, enc.trotter_step(params), None, "jw"
    raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")


def emit(params: ModelParams, lat: LatticeSpec, mode: str = "hcb", measurement: str = "density") -> str:
    """Full trajectory circuit as program text.

    Args:
        mode: ``"hcb"``; ``"fermion"`` (compact encoding, 4x4); or ``"jw"``
            (Jordan-Wigner fermions, any size).
        measurement: ``"density"`` or ``"current:<sector>"``.
    """
    from .observables import current_measurement_gadget

    nphys, step, prep, enc = _trotter_and_prep(params, lat, mode)
    if measurement != "density":
        if not measurement.startswith("current:") or measurement.split(":", 1)[1] not in lat.sectors:
            raise ConfigError(f"unknown measurement {measurement!r}")
    n = lat.n_sites
    coin_s, coin_d = nphys, nphys + 1
    nq = nphys + 2
    m = params.m
    n_cl = n + 4 * m + n
    meta = {"format": FORMAT_VERSION, "mode": mode, "encoding": enc, "measurement": measurement,
            "lattice": [lat.width, lat.height], "source": lat.source, "drain": lat.drain,
            "params": params.to_dict(), "rng": "one uniform per measurement and per reset of a superposed qubit"}
    out = [f"// {FORMAT_VERSION}", "// meta: " + json.dumps(meta, sort_keys=True),
           f"qreg q[{nq}];", f"creg c[{n_cl}];", "// site preparation"]
    if params.init == "bitstring":
        out += [f"x q[{i}];" for i, b in enumerate(params.init_bits) if b]
    elif params.init == "biased":
        for i in range(n):
            out.append(_gate_line("ry", (i,), (coin_angle(float(params.init_densities[i])),)))
            out.append(f"measure q[{i}] -> c[{i}];")
    else:
        for i in range(n):
            if i == lat.source:
                out.append(f"x q[{i}];")
            elif i != lat.drain:
                out += [f"h q[{i}];", f"measure q[{i}] -> c[{i}];"]
    out.append("barrier;")
    if prep is not None:
        out.append("// ancilla preparation")
        out += _sequence_lines(prep)
    trotter = _sequence_lines(step)
    theta = coin_angle(params.p)
    for t in range(m):
        out.append(f"// period {t + 1}")
        out += trotter
        base = n + 4 * t
        for site, coin, target, cb in ((lat.source, coin_s, 1, base), (lat.drain, coin_d, 0, base + 2)):
            out += [_gate_line("ry", (coin,), (theta,)), f"measure q[{coin}] -> c[{cb}];", f"reset q[{coin}];",
                    f"if (c[{cb}]==1) {{", f"measure q[{site}] -> c[{cb + 1}];", f"reset q[{site}];"]
            if target:
                out.append(f"x q[{site}];")
            out.append("}")
    out += ["barrier;", "// final measurement"]
    final = n + 4 * m
    done = set()
    if measurement.startswith("current:"):
        for b in lat.sector_bonds(measurement.split(":", 1)[1]):
            g, _ = current_measurement_gadget(lat, b, params, enc, nphys)
            out += _sequence_lines(g)
            out += [f"measure q[{b.j}] -> c[{final + b.j}];", f"measure q[{b.k}] -> c[{final + b.k}];"]
            out += _sequence_lines(g.inverse())
            done |= {b.j, b.k}
    out += [f"measure q[{i}] -> c[{final + i}];" for i in range(n) if i not in done]
    return "\n".join(out) + "\n"


def emit_program(params: ModelParams, lat: LatticeSpec, mode: str = "hcb",
                 measurement: str = "density") -> CircuitProgram:
    return parse(emit(params, lat, mode, measurement))


# --- parsing ---------------------------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RE_REG = re.compile(r"^(qreg|creg)\s+([qc])\[(\d+)\]\s*;$")
_RE_MEASURE = re.compile(r"^measure\s+q\[(\d+)\]\s*->\s*c\[(\d+)\]\s*;$")
_RE_RESET = re.compile(r"^reset\s+q\[(\d+)\]\s*;$")
_RE_IF = re.compile(r"^if\s*\(\s*c\[(\d+)\]\s*==\s*1\s*\)\s*\{$")
_RE_GATE = re.compile(r"^([a-z][a-z0-9]*)\s*(?:\(([^)]*)\))?\s+(q\[\d+\](?:\s*,\s*q\[\d+\])*)\s*;$")
_RE_NUM = re.compile(rf"^\s*{_NUM}\s*$")


def parse(text: str) -> CircuitProgram:
    """Parse program text; every failure is a :class:`ParseError` with a location."""
    nq = nc = None
    meta: dict = {}
    top: list = []
    stack: list[list] = [top]
    open_if: list[int] = []
    for ln, raw in enumerate(text.split("\n"), start=1):
        col = len(raw) - len(raw.lstrip()) + 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith("//"):
            if line.startswith("// meta:"):
                try:
                    meta = json.loads(line[len("// meta:"):])
                except json.JSONDecodeError as exc:
                    raise ParseError(ln, col + len("// meta:") + exc.pos, f"bad metadata: {exc.msg}") from None
            continue
        mr = _RE_REG.match(line)
        if mr:
            kind, letter, size = mr.group(1), mr.group(2), int(mr.group(3))
            if letter != kind[0]:
                raise ParseError(ln, col, f"{kind} must declare register {kind[0]!r}")
            if kind == "qreg":
                if nq is not None:
                    raise ParseError(ln, col, "qreg declared twice")
                if not 1 <= size <= 30:
                    raise ParseError(ln, col, f"qreg size {size} outside 1..30")
                nq = size
            else:
                if nc is not None:
                    raise ParseError(ln, col, "creg declared twice")
                nc = size
            continue
        if nq is None or nc is None:
            raise ParseError(ln, col, "qreg and creg must be declared before instructions")
        if line == "}":
            if not open_if:
                raise ParseError(ln, col, "unmatched '}'")
            open_if.pop()
            stack.pop()
            continue
        if line == "barrier;":
            if open_if:
                raise ParseError(ln, col, "barrier inside a conditional block")
            stack[-1].append(Instruction("barrier", line=ln))
            continue
        mm = _RE_MEASURE.match(line)
        if mm:
            q, c = int(mm.group(1)), int(mm.group(2))
            _check_index(q, nq, "qubit", ln, col)
            _check_index(c, nc, "classical bit", ln, col)
            stack[-1].append(Instruction("measure", (q,), (), c, line=ln))
            continue
        mres = _RE_RESET.match(line)
        if mres:
            q = int(mres.group(1))
            _check_index(q, nq, "qubit", ln, col)
            stack[-1].append(Instruction("reset", (q,), line=ln))
            continue
        mi = _RE_IF.match(line)
        if mi:
            c = int(mi.group(1))
            _check_index(c, nc, "classical bit", ln, col)
            if open_if:
                raise ParseError(ln, col, "nested conditional blocks are not supported")
            ins = Instruction("if", (), (), c, line=ln)
            stack[-1].append(ins)
            stack.append(ins.body)
            open_if.append(ln)
            continue
        mg = _RE_GATE.match(line)
        if mg:
            stack[-1].append(_parse_gate(mg, nq, ln, col))
            continue
        raise ParseError(ln, col, f"cannot parse {line[:40]!r}")
    if open_if:
        raise ParseError(open_if[-1], 1, "conditional block is never closed")
    if nq is None or nc is None:
        raise ParseError(1, 1, "missing qreg/creg declaration")
    return CircuitProgram(nq, nc, top, meta)


def _check_index(i: int, size: int, what: str, ln: int, col: int) -> None:
    if not 0 <= i < size:
        raise ParseError(ln, col, f"{what} index {i} out of range (size {size})")


def _parse_gate(mg: re.Match, nq: int, ln: int, col: int) -> Instruction:
    name, args, qtext = mg.group(1), mg.group(2), mg.group(3)
    qubits = tuple(int(x) for x in re.findall(r"q\[(\d+)\]", qtext))
    if name in FIXED_GATES:
        n_params, arity = 0, FIXED_GATES[name]
    elif name in PARAM_GATES:
        n_params, arity = PARAM_GATES[name]
    else:
        raise ParseError(ln, col, f"unknown gate {name!r}")
    params: tuple = ()
    if args is not None:
        pieces = args.split(",") if args.strip() else []
        for p in pieces:
            if not _RE_NUM.match(p):
                raise ParseError(ln, col + mg.start(2), f"bad angle {p.strip()!r} for {name}")
        params = tuple(float(p) for p in pieces)
    if len(params) != n_params:
        raise ParseError(ln, col, f"{name} takes {n_params} parameter(s), got {len(params)}")
    if not all(math.isfinite(p) for p in params):
        raise ParseError(ln, col, f"non-finite angle for {name}")
    if len(qubits) != arity:
        raise ParseError(ln, col, f"{name} acts on {arity} qubit(s), got {len(qubits)}")
    for q in qubits:
        _check_index(q, nq, "qubit", ln, col)
    if len(set(qubits)) != len(qubits):
        raise ParseError(ln, col, f"{name} repeats a qubit")
    return Instruction(name, qubits, params, line=ln)


def to_text(program: CircuitProgram) -> str:
    """Render a parsed program back to text (metadata comment included)."""
    out = []
    if program.metadata:
        out.append("// meta: " + json.dumps(program.metadata, sort_keys=True))
    out += [f"qreg q[{program.n_qubits}];", f"creg c[{program.n_clbits}];"]

    def render(items):
        for i in items:
            if i.op == "measure":
                out.append(f"measure q[{i.qubits[0]}] -> c[{i.clbit}];")
            elif i.op == "reset":
                out.append(f"reset q[{i.qubits[0]}];")
            elif i.op == "barrier":
                out.append("barrier;")
            elif i.op == "if":
                out.append(f"if (c[{i.clbit}]==1) {{")
                render(i.body)
                out.append("}")
            else:
                out.append(_gate_line(i.op, i.qubits, tuple(p / math.pi for p in i.params)))

    render(program.instructions)
    return "\n".join(out) + "\n"


# --- interpretation -------------------------------------------------------------------


@dataclass
class Execution:
    """Everything an interpreted program produced."""

    clbits: np.ndarray  # -1 where never written
    init_bits: tuple | None
    state: StateVector | None  # at the last barrier, coins and qubits beyond the encoding dropped
    final_state: StateVector
    record: TrajectoryRecord | None = None
    final_bits: tuple | None = None


def execute(program: CircuitProgram | str, rng: RngStream) -> Execution:
    """Run a program on the state-vector simulator.

    ``measure`` draws one uniform; ``reset`` draws one only when the qubit is
    not already definite.  Reading a classical bit that was never written is a
    :class:`SemanticError`.
    """
    prog = parse(program) if isinstance(program, str) else program
    state = StateVector.zeros(prog.n_qubits)
    clbits = np.full(prog.n_clbits, -1, dtype=np.int64)
    barriers: list[StateVector] = []
    counter = [0]

    def run(items):
        nonlocal state
        for ins in items:
            idx = counter[0]
            counter[0] += 1
            if ins.op == "measure":
                bit, state = qsim.measure(state, ins.qubits[0], rng)
                clbits[ins.clbit] = bit
            elif ins.op == "reset":
                state = qsim.reset_to(state, ins.qubits[0], 0, rng)
            elif ins.op == "barrier":
                barriers.append(state.copy())
            elif ins.op == "if":
                if clbits[ins.clbit] < 0:
                    raise SemanticError(idx, f"c[{ins.clbit}] is read before it is written")
                if clbits[ins.clbit] == 1:
                    run(ins.body)
            else:
                turns = tuple(p / math.pi for p in ins.params)
                state = qsim.apply_gate(state, ins.op, ins.qubits, turns)

    run(prog.instructions)
    meta = prog.metadata
    n_keep = _register_size(meta, prog.n_qubits)
    init = None
    snap = None
    if barriers:
        n_sites = _n_sites(meta)
        if n_sites is not None:
            init = _definite_bits(barriers[0], n_sites)
        snap = _drop_high_qubits(barriers[-1], n_keep)
    ex = Execution(clbits, init, snap, state)
    if meta.get("format") == FORMAT_VERSION:
        ex.record, ex.final_bits = _record_from(meta, clbits, init, rng)
    return ex


def interpret(program: CircuitProgram | str, rng: RngStream) -> tuple[TrajectoryRecord, tuple]:
    """Run an emitted program and return the trajectory log and the final bitstring."""
    ex = execute(program, rng)
    if ex.record is None:
        raise SemanticError(0, "program carries no trajectory metadata")
    return ex.record, ex.final_bits


def _n_sites(meta: dict) -> int | None:
    lat = meta.get("lattice")
    return None if lat is None else int(lat[0]) * int(lat[1])


def _register_size(meta: dict, n_qubits: int) -> int:
    return n_qubits - 2 if meta.get("format") == FORMAT_VERSION else n_qubits


def _definite_bits(state: StateVector, n: int) -> tuple:
    bits = []
    for q in range(n):
        p1 = state.probability_one(q)
        if 1e-12 < p1 < 1 - 1e-12:
            raise SemanticError(0, f"site {q} is not in a definite state after preparation")
        bits.append(int(p1 > 0.5))
    return tuple(bits)


def _drop_high_qubits(state: StateVector, n_keep: int) -> StateVector:
    """Restrict to the first ``n_keep`` qubits, given the rest are in ``|0>``."""
    dim = 1 << n_keep
    tail = state.amplitudes[dim:]
    if tail.size and float(np.vdot(tail, tail).real) > 1e-20:
        raise SemanticError(0, "coin qubits are not reset at the snapshot")
    return StateVector(state.amplitudes[:dim])


def _record_from(meta: dict, clbits: np.ndarray, init: tuple | None, rng: RngStream):
    n = _n_sites(meta)
    try:
        m = int(meta["params"]["m"])
    except (KeyError, TypeError, ValueError):
        raise SemanticError(0, "metadata lacks the period count") from None
    if n is None or clbits.shape[0] < 2 * n + 4 * m:
        raise SemanticError(0, "classical register does not match the metadata")
    coins = np.zeros((m, 2), dtype=np.int8)
    pre = np.full((m, 2), -1, dtype=np.int8)
    for t in range(m):
        base = n + 4 * t
        for s in range(2):
            coins[t, s] = clbits[base + 2 * s]
            if coins[t, s] == 1:
                pre[t, s] = clbits[base + 2 * s + 1]
    final = tuple(int(b) for b in clbits[n + 4 * m: n + 4 * m + n])
    rec = TrajectoryRecord(rng.seed, rng.stream_id, init, coins, pre,
                           final_basis=meta.get("measurement"), final_bits=final)
    try:
        rec.validate()
    except NumericalIntegrityError as exc:
        raise SemanticError(0, f"drive log is inconsistent: {exc}") from None
    if any(b < 0 for b in final):
        raise SemanticError(0, "final-shot bits were never written")
    return rec, final
