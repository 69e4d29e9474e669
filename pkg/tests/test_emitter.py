"""Circuit program emission, parsing and interpretation."""

import math

import numpy as np
import pytest

from ness2d import emitter as E
from ness2d.channel import run_trajectory
from ness2d.lattice import build_lattice
from ness2d.model import ConfigError, ModelParams
from ness2d.qsim import RngStream

HEADER = "qreg q[2];\ncreg c[2];\n"


def random_params(gen, k):
    stat = ("hcb", "fermion")[k % 2]
    init = ("random_product", "bitstring", "biased")[k % 3]
    kw = {}
    if init == "bitstring":
        kw["init_bits"] = tuple(int(b) for b in gen.integers(0, 2, 4))
    if init == "biased":
        kw["init_densities"] = tuple(float(x) for x in gen.uniform(0.1, 0.9, 4))
    return ModelParams(V=float(gen.uniform(0, 2)), phi=float(gen.uniform(0, math.pi)),
                       dt=float(gen.uniform(0.05, 0.3)), m=int(gen.integers(0, 6)),
                       gamma=float(gen.uniform(0.1, 3)), statistics=stat, init=init, **kw)


def test_round_trip_matches_direct_simulation():
    lat = build_lattice(2, 2)
    gen = np.random.default_rng(1)
    for k in range(12):
        params = random_params(gen, k)
        meas = "density" if k % 4 < 2 else "current:" + ("blue", "red")[k % 2]
        mode = "jw" if params.fermionic else "hcb"
        ex = E.execute(E.emit(params, lat, mode, meas), RngStream(2, k))
        rec, sv = run_trajectory(params, lat, RngStream(2, k), measurement=meas, engine="dense")
        np.testing.assert_allclose(ex.state.amplitudes, sv.amplitudes, atol=1e-10)
        assert ex.record.to_json() == rec.to_json()


def test_fermion_mode_round_trip_on_4x4():
    lat = build_lattice(4, 4)
    params = ModelParams(V=1.0, phi=math.pi / 2, dt=0.29, m=1, statistics="fermion")
    ex = E.execute(E.emit(params, lat, "fermion", "density"), RngStream(3, 1))
    rec, sv = run_trajectory(params, lat, RngStream(3, 1), encoding="dk", measurement="density")
    np.testing.assert_allclose(ex.state.amplitudes, sv.amplitudes, atol=1e-10)
    assert ex.final_bits == rec.final_bits


def test_counts_for_4x4_hcb():
    lat = build_lattice(4, 4)
    prog = E.emit_program(ModelParams(dt=0.31, m=10), lat, "hcb")
    assert prog.n_qubits == 18
    assert prog.n_clbits == 16 + 4 * 10 + 16
    assert prog.count("tk2") == 24 * 10
    assert prog.count("if") == 2 * 10


def test_text_round_trip():
    lat = build_lattice(2, 2)
    text = E.emit(ModelParams(V=0.7, phi=0.3, m=3), lat, "hcb")
    prog = E.parse(text)
    again = E.parse(E.to_text(prog))
    assert again.count("tk2") == prog.count("tk2")
    assert again.metadata == prog.metadata
    a = E.execute(prog, RngStream(5)).final_state.amplitudes
    b = E.execute(again, RngStream(5)).final_state.amplitudes
    np.testing.assert_array_equal(a, b)


def test_emission_is_deterministic():
    lat = build_lattice(2, 2)
    p = ModelParams(V=1.0, phi=1.0, m=2)
    assert E.emit(p, lat) == E.emit(p, lat)


def test_angles_survive_printing():
    text = HEADER + "rz(0.12345678901234568) q[0];\n"
    prog = E.parse(text)
    assert prog.instructions[0].params[0] == 0.12345678901234568


@pytest.mark.parametrize("text,line", [
    ("qreg q[2];\ncreg c[1];\nfoo q[0];\n", 3),
    ("qreg q[2];\ncreg c[1];\nh q[5];\n", 3),
    ("qreg q[2];\ncreg c[1];\n\nmeasure q[0] -> c[3];\n", 4),
    ("qreg q[2];\ncreg c[1];\nif (c[0]==1) {\nh q[0];\n", 3),
    ("qreg q[2];\ncreg c[1];\n}\n", 3),
    ("h q[0];\n", 1),
    ("qreg q[2];\ncreg c[1];\nrz(abc) q[0];\n", 3),
    ("qreg q[2];\ncreg c[1];\ntk2(0.1, 0.2) q[0], q[1];\n", 3),
    ("qreg q[2];\ncreg c[1];\ncz q[0], q[0];\n", 3),
])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(E.ParseError) as err:
        E.parse(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"{line}:")


def test_guard_zero_skips_block():
    text = HEADER + "measure q[0] -> c[0];\nif (c[0]==1) {\nx q[1];\n}\n"
    ex = E.execute(text, RngStream(0))
    assert ex.clbits[0] == 0
    assert ex.final_state.probability_one(1) == 0.0
    text = HEADER + "x q[0];\nmeasure q[0] -> c[0];\nif (c[0]==1) {\nx q[1];\n}\n"
    assert E.execute(text, RngStream(0)).final_state.probability_one(1) == 1.0


def test_unwritten_guard_is_semantic_error():
    with pytest.raises(E.SemanticError):
        E.execute(HEADER + "if (c[1]==1) {\nx q[0];\n}\n", RngStream(0))


def test_reset_draws_only_when_superposed():
    rng = RngStream(0)
    E.execute(HEADER + "x q[0];\nreset q[0];\n", rng)
    assert rng.draws == 0
    E.execute(HEADER + "h q[0];\nreset q[0];\n", rng)
    assert rng.draws == 1


def test_interpret_needs_metadata():
    with pytest.raises(E.SemanticError):
        E.interpret(HEADER + "h q[0];\n", RngStream(0))


def test_fuzzed_text_never_crashes():
    lat = build_lattice(2, 2)
    base = E.emit(ModelParams(m=2), lat).split("\n")
    gen = np.random.default_rng(7)
    alphabet = list("qcregif(){}[];,->=0123456789. abxyzhsdgtkmu\n/")
    for _ in range(300):
        lines = list(base)
        for _ in range(int(gen.integers(1, 4))):
            i = int(gen.integers(len(lines)))
            kind = gen.integers(3)
            if kind == 0:
                lines[i] = "".join(gen.choice(alphabet, int(gen.integers(0, 20))))
            elif kind == 1:
                del lines[i]
            else:
                lines.insert(i, lines[int(gen.integers(len(lines)))])
        text = "\n".join(lines)
        try:
            E.execute(text, RngStream(1))
        except (E.ParseError, E.SemanticError):
            pass


def test_unknown_mode_and_bad_lattice():
    with pytest.raises(ConfigError):
        E.emit(ModelParams(), build_lattice(2, 2), "qudit")
    with pytest.raises((ConfigError, ValueError)):
        E.emit(ModelParams(statistics="fermion"), build_lattice(2, 2), "fermion")
