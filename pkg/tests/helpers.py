"""Shared simulation helpers for the test-suite."""

import math
from fractions import Fraction

from qmf.simulator import verify_against


def reg_value(basis, qubits):
    return sum(((basis >> q) & 1) << i for i, q in enumerate(qubits))


def set_value(basis, qubits, value):
    for i, q in enumerate(qubits):
        basis = (basis & ~(1 << q)) | (((value >> i) & 1) << q)
    return basis


def phase_product_deviation(circ, turns, names=("x", "z"), inputs=None):
    """max |1 - <actual|expected>| against exp(2 pi i turns prod(registers))."""
    regs = [circ.register(n).qubits for n in names]
    turns = Fraction(turns)

    def spec(b):
        p = turns
        for r in regs:
            p *= reg_value(b, r)
        return b, 2 * math.pi * float(p % 1)

    return verify_against(circ, spec, inputs)


def multiplier_deviation(circ, a, inputs=None):
    ins = [r.qubits for r in circ.registers if r.role == "input"]
    w = circ.register("w").qubits

    def spec(b):
        p = a
        for r in ins:
            p *= reg_value(b, r)
        return set_value(b, w, (reg_value(b, w) + p) % (1 << len(w))), 0.0

    return verify_against(circ, spec, inputs)
