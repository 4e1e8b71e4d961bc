import cmath
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from qmf.arith import (QftConfig, add_constant, cuccaro_add, cuccaro_circuit, gradient_increment,
                       inplace_mod_mul, modmul_layout, phase_gradient_prepare, phase_gradient_rotate,
                       qft_circuit, u_cq, u_cq_mod, u_qq)
from qmf.circuit import CircuitBuilder
from qmf.compiler import CompileConfig
from qmf.simulator import run, simulate_mod_mul, unitary

from helpers import multiplier_deviation, reg_value, set_value

K2 = CompileConfig(k_policy=2, n_base=2)


def _adder_out(n, a, b, cin, subtract=False):
    c = cuccaro_circuit(n, subtract)
    ra, rb, rc = (c.register(s).qubits for s in ("a", "b", "cin"))
    basis = set_value(set_value(set_value(0, ra, a), rb, b), rc, cin)
    st = run(c, basis)
    out = int(np.argmax(np.abs(st.amplitudes)))
    assert abs(abs(st.amplitudes[out]) - 1) < 1e-12
    return reg_value(out, ra), reg_value(out, rb), reg_value(out, rc)


def test_cuccaro_examples():
    assert _adder_out(4, 3, 5, 0) == (3, 8, 0)
    assert _adder_out(4, 3, 5, 1) == (3, 9, 1)
    assert _adder_out(4, 9, 3, 1, subtract=True) == (9, (3 - 10) % 16, 1)


def test_cuccaro_reversible():
    c = cuccaro_circuit(3)
    u = unitary(c)
    v = unitary(c.inverse())
    assert np.allclose(v @ u, np.eye(u.shape[0]))


def test_cuccaro_dirty_carry_superposition():
    c = cuccaro_circuit(3)
    ra, rb, rc = (c.register(s).qubits for s in ("a", "b", "cin"))
    psi = np.zeros(1 << c.n_qubits, complex)
    for cin in (0, 1):
        psi[set_value(set_value(set_value(0, ra, 5), rb, 6), rc, cin)] = 1 / math.sqrt(2)
    from qmf.simulator import run_state
    out = run_state(c, psi)
    for cin in (0, 1):
        b = set_value(set_value(set_value(0, ra, 5), rb, (11 + cin) % 8), rc, cin)
        assert abs(out[b] - 1 / math.sqrt(2)) < 1e-12


def test_cuccaro_pause_exposes_carry():
    seen = []
    for a, b in [(5, 4), (1, 2), (7, 1)]:
        cb = CircuitBuilder()
        ra, rb, rc = cb.register("a", 3), cb.register("b", 3), cb.register("cin", 1)
        out = cb.register("carry", 1, "output")
        cuccaro_add(cb, ra, rb, rc[0], carry_out=out[0])
        c = cb.build()
        st = run(c, set_value(set_value(0, ra, a), rb, b))
        res = int(np.argmax(np.abs(st.amplitudes)))
        seen.append(reg_value(res, out))
    assert seen == [1, 0, 1]


def test_qft_n1_is_h():
    c = qft_circuit(1)
    assert [g.kind for g in c.gates] == ["H"]


def test_qft_gate_counts():
    for n in range(1, 9):
        cen = qft_circuit(n).census()
        assert cen["CRphi"] == n * (n - 1) // 2 and cen["H"] == n
        assert qft_circuit(n).ancilla_high_water == 0


def test_qft_uniform_from_zero():
    st = run(qft_circuit(5), 0)
    assert np.allclose(np.abs(st.amplitudes), 2 ** -2.5)


def test_qft_matches_dft():
    n = 4
    u = unitary(qft_circuit(n))
    N = 1 << n
    dft = np.array([[cmath.exp(2j * math.pi * j * k / N) for j in range(N)] for k in range(N)]) / math.sqrt(N)
    assert np.abs(u - dft).max() < 1e-12


def test_fast_qft_n6():
    std = unitary(qft_circuit(6, QftConfig("standard")))
    fast = unitary(qft_circuit(6, QftConfig("fast"), K2))
    assert np.abs(std - fast).max() < 1e-9


def test_pruning_is_monotone():
    for n in (10, 30, 60):
        full = qft_circuit(n).census()["CRphi"]
        pruned = qft_circuit(n, QftConfig(eta=1e-6)).census()["CRphi"]
        assert pruned <= full
    assert qft_circuit(40, QftConfig(eta=1e-6)).census()["CRphi"] < qft_circuit(40).census()["CRphi"]


def test_gradient_increment():
    assert gradient_increment(math.pi, 8) == 128
    assert gradient_increment(0.0, 8) == 0


def _gradient_run(angles, m, controls_on=True):
    cb = CircuitBuilder()
    g = cb.register("grad", m)
    ctl = cb.register("ctl", 1)
    phase_gradient_prepare(cb, g)
    incs = [phase_gradient_rotate(cb, a, g, controls=ctl) for a in angles]
    c = cb.build()
    st = run(c, set_value(0, ctl, int(controls_on)))
    psi = np.array([st.amplitudes[set_value(set_value(0, ctl, int(controls_on)), g, w)] for w in range(1 << m)])
    phi = np.exp(-2j * np.pi * np.arange(1 << m) / (1 << m)) / math.sqrt(1 << m)
    return np.vdot(phi, psi), sum(incs)


def test_gradient_rotation_pi():
    ov, a = _gradient_run([math.pi], 8)
    assert a == 128 and abs(ov - (-1)) < 1e-9
    ov, a = _gradient_run([math.pi], 8, controls_on=False)
    assert abs(ov - 1) < 1e-9


def test_gradient_zero_angle():
    ov, a = _gradient_run([0.0], 6)
    assert a == 0 and abs(ov - 1) < 1e-12


def test_add_constant_controlled():
    cb = CircuitBuilder()
    d = cb.register("d", 4)
    ctl = cb.register("c", 2)
    add_constant(cb, 11, d, ctl)
    c = cb.build()
    for v in range(16):
        for cv in range(4):
            st = run(c, set_value(set_value(0, d, v), ctl, cv))
            out = int(np.argmax(np.abs(st.amplitudes)))
            assert reg_value(out, d) == (v + (11 if cv == 3 else 0)) % 16


def test_u_cq_examples():
    c = u_cq(1, 3, 3, K2)
    for x in range(8):
        st = run(c, x)
        assert abs(abs(st.amplitudes[x | (x << 3)]) - 1) < 1e-9
    c = u_cq(3, 3, 5, K2)
    st = run(c, 5 | (2 << 3))
    assert abs(abs(st.amplitudes[5 | (17 << 3)]) - 1) < 1e-9


@pytest.mark.parametrize("a", [0, 1, 6, 11])
def test_u_cq_exhaustive(a):
    assert multiplier_deviation(u_cq(a, 4, 4, K2), a) < 1e-9


def test_u_cq_fast_qft():
    assert multiplier_deviation(u_cq(5, 3, 4, K2, QftConfig("fast")), 5) < 1e-9


def test_u_cq_real_scalar_concentrates():
    a = 2.5
    c = u_cq(a, 2, 4, K2)
    st = run(c, 3)
    w = (3 * 2.5) % 16
    probs = {v: abs(st.amplitudes[3 | (v << 2)]) ** 2 for v in range(16)}
    assert probs[int(w)] + probs[(int(w) + 1) % 16] > 0.8


def test_u_qq_examples():
    c = u_qq(2, 2, 4, CompileConfig(k_policy=2, n_base=2))
    for y in range(4):
        for w in range(16):
            b = (y << 2) | (w << 4)
            st = run(c, b)
            assert abs(abs(st.amplitudes[b]) - 1) < 1e-9
    c = u_qq(3, 3, 6, CompileConfig(n_base=2), scale=2)
    st = run(c, 3 | (5 << 3))
    assert abs(abs(st.amplitudes[3 | (5 << 3) | (30 << 6)]) - 1) < 1e-9


def test_u_cq_mod_power_of_two():
    # N = 2^n reduces to an ordinary multiplier on the top n output bits
    n, pad, a = 3, 2, 5
    c = u_cq_mod(a, 1 << n, n, pad, K2)
    for x in range(8):
        st = run(c, x)
        assert abs(abs(st.amplitudes[x | ((a * x % 8) << (pad + n))]) - 1) < 1e-9


def test_u_cq_mod_fraction():
    n, pad = 2, 6
    L = n + pad
    c = u_cq_mod(1, 3, n, pad)
    st = run(c, 2)
    probs = np.array([abs(st.amplitudes[2 | (w << n)]) ** 2 for w in range(1 << L)])
    assert probs.argmax() == round(2 / 3 * 2 ** L)
    for a, N in [(1, 3), (2, 3)]:
        c = u_cq_mod(a, N, n, pad)
        for x in range(N):
            st = run(c, x)
            f = (a * x % N) / N
            near = 0.0
            for w in range(1 << L):
                d = abs((w / 2 ** L - f + 0.5) % 1 - 0.5)
                if d <= 2 ** -n:
                    near += abs(st.amplitudes[x | (w << n)]) ** 2
            assert near >= 1 - 4 * 2 ** -pad


def test_modmul_layout():
    lay = modmul_layout(3, 7, 1e-3)
    assert lay.n == 3 and lay.m == 3 + math.ceil(2 * math.log(2 + 1 / 2e-3))
    assert lay.c_inv == 5 and lay.total_qubits == lay.n + lay.m + 2
    with pytest.raises(ValueError):
        modmul_layout(4, 6, 1e-3)
    with pytest.raises(ValueError):
        inplace_mod_mul(4, 6, 1e-3)


def test_modmul_examples():
    eta = 1e-3
    c = inplace_mod_mul(3, 7, eta)
    res = simulate_mod_mul(c, 3, 7, xs=[4])
    assert res[0].target == 5 and res[0].fidelity_bound >= 1 - 10 * eta
    c = inplace_mod_mul(1, 7, eta)
    assert all(r.fidelity_bound > 1 - 10 * eta for r in simulate_mod_mul(c, 1, 7))
    assert c.n_qubits == modmul_layout(1, 7, eta).total_qubits


def test_modmul_dense_cross_check():
    """The branch-wise bound agrees with a plain dense run on a tiny instance."""
    eta = 0.05
    c = inplace_mod_mul(2, 3, eta)
    lay = modmul_layout(2, 3, eta)
    x = c.register("x").qubits
    for xv in range(3):
        st = run(c, set_value(0, x, xv))
        dense = abs(st.amplitudes[set_value(0, x, 2 * xv % 3)]) ** 2
        bound = simulate_mod_mul(c, 2, 3, xs=[xv], tail_tol=0.0)[0].fidelity_bound
        assert abs(dense - bound) < 1e-9
    assert c.n_qubits == lay.total_qubits
