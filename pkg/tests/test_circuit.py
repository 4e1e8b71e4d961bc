import json
from fractions import Fraction

from qmf.circuit import Circuit, CircuitBuilder, CountBuilder, count, summarize
from qmf.compiler import CompileConfig, compile_phase_product


def _demo():
    return compile_phase_product(5, 5, Fraction(2, 7), CompileConfig(k_policy=2, n_base=2), angle_in_turns=True)


def test_json_roundtrip():
    c = _demo()
    d = json.loads(c.dumps())
    assert set(d) >= {"registers", "gates", "ancilla_high_water"}
    assert set(d["registers"][0]) >= {"name", "size", "role"}
    assert set(d["gates"][0]) >= {"kind", "targets", "controls", "angle"}
    back = Circuit.from_json(d)
    assert back.gates == c.gates and back.n_qubits == c.n_qubits


def test_angle_only_json():
    c = _demo()
    d = json.loads(c.dumps())
    for g in d["gates"]:
        g.pop("turns", None)
    back = Circuit.from_json(d)
    for a, b in zip(back.gates, c.gates):
        assert a.kind == b.kind and (a.turns is None) == (b.turns is None)


def test_text_export():
    lines = _demo().to_text().splitlines()
    assert lines and all(len(l.split()) >= 2 for l in lines if not l.startswith("#"))


def test_inverse_cancels_phases():
    c = _demo()
    total = sum((g.turns for g in c.gates if g.turns is not None), Fraction(0))
    total_inv = sum((g.turns for g in c.inverse().gates if g.turns is not None), Fraction(0))
    assert (total + total_inv) % 1 == 0


def test_count_builder_matches():
    def body(b):
        q = b.alloc(3)
        b.h(q[0])
        b.toffoli(q[0], q[1], q[2])
        b.phase(q[:2], Fraction(1, 4))
        b.free(q)
    cnt, hw = count(body)
    cb = CircuitBuilder()
    body(cb)
    assert +cb.build().census() == +cnt and hw == 3


def test_summarize_classes():
    s = summarize(_demo().census())
    assert s["toffoli"] > 0 and s["crphi"] > 0 and s["clifford"] > 0


def test_markers_and_segments():
    cb = CircuitBuilder()
    q = cb.register("q", 1)
    cb.mark("a")
    cb.h(q[0])
    cb.mark("b")
    cb.x(q[0])
    c = cb.build()
    assert [g.kind for g in c.segment("a", "b")] == ["H"]
    assert [g.kind for g in c.segment("b")] == ["X"]
    assert "marker" not in c.census()
