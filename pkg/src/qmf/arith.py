"""Gate-level arithmetic: ripple-carry adders, QFTs, phase gradients and the
multiplier circuits built from phase products.

All registers are little-endian lists of qubit indices.  Generators take a
:class:`~qmf.circuit.Builder` so the same code is used for synthesis and for
gate counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .circuit import Builder, Circuit, CircuitBuilder


# --- Cuccaro ripple-carry adder -------------------------------------------

def _maj(b: Builder, c, t, a):
    b.cnot(a, t)
    b.cnot(a, c)
    b.toffoli(c, t, a)


def _maj_inv(b: Builder, c, t, a):
    b.toffoli(c, t, a)
    b.cnot(a, c)
    b.cnot(a, t)


def _uma(b: Builder, c, t, a):
    b.toffoli(c, t, a)
    b.cnot(a, c)
    b.cnot(c, t)


def _uma_inv(b: Builder, c, t, a):
    b.cnot(c, t)
    b.cnot(a, c)
    b.toffoli(c, t, a)


def cuccaro_add(b: Builder, a: Sequence[int], t: Sequence[int], cin: int, *, subtract: bool = False,
                pause: Callable[[int], None] | None = None, carry_out: int | None = None):
    """t += a + cin (mod 2^len(t)), or t -= a + cin when ``subtract``.

    ``pause(q)`` is called half way through, when qubit ``q`` (the top qubit
    of ``a``) holds the outgoing carry of the addition, or the outgoing borrow
    of the subtraction.  ``carry_out`` receives that bit when given.
    """
    L = len(a)
    if L != len(t):
        raise ValueError("adder registers must have equal length")
    if L == 0:
        return
    if b.counting:
        b.bulk("Toffoli", 2 * L)
        b.bulk("CNOT", 4 * L + (carry_out is not None))
        if pause is not None:
            pause(a[-1])
        return
    chain = [cin] + list(a[:-1])
    if not subtract:
        for i in range(L):
            _maj(b, chain[i], t[i], a[i])
        if pause is not None:
            pause(a[-1])
        if carry_out is not None:
            b.cnot(a[-1], carry_out)
        for i in reversed(range(L)):
            _uma(b, chain[i], t[i], a[i])
    else:
        for i in range(L):
            _uma_inv(b, chain[i], t[i], a[i])
        if pause is not None:
            pause(a[-1])
        if carry_out is not None:
            b.cnot(a[-1], carry_out)
        for i in reversed(range(L)):
            _maj_inv(b, chain[i], t[i], a[i])


def cuccaro_circuit(n: int, subtract: bool = False) -> Circuit:
    cb = CircuitBuilder()
    a = cb.register("a", n)
    t = cb.register("b", n)
    c = cb.register("cin", 1)
    cuccaro_add(cb, a, t, c[0], subtract=subtract)
    return cb.build()


def add_register(b: Builder, src: Sequence[int], dst: Sequence[int], *, subtract: bool = False,
                 src_signed: bool = False):
    """dst += src (mod 2^len(dst)) with a clean carry qubit; src is sign- or
    zero-extended with temporary ancillas when shorter than dst."""
    L = len(dst)
    src = list(src)[:L]
    pad = L - len(src)
    if b.counting:
        b.alloc(pad + 1)
        b.free([0] * (pad + 1))
        if src_signed:
            b.bulk("CNOT", 2 * pad)
        cuccaro_add(b, [0] * L, [0] * L, 0)
        return
    ext = b.alloc(pad) if pad else []
    if src_signed and pad:
        for q in ext:
            b.cnot(src[-1], q)
    cin = b.alloc(1)[0]
    cuccaro_add(b, src + ext, dst, cin, subtract=subtract)
    b.free([cin])
    if src_signed and pad:
        for q in ext:
            b.cnot(src[-1], q)
    if pad:
        b.free(ext)


def add_constant(b: Builder, const: int, dst: Sequence[int], controls: Sequence[int] = ()):
    """dst += const (mod 2^len(dst)), optionally controlled (at most two controls)."""
    L = len(dst)
    const %= 1 << L
    if const == 0 or L == 0:
        return
    scratch = b.alloc(L)
    ctl = list(controls)
    tmp = None
    if len(ctl) == 2:
        tmp = b.alloc(1)[0]
        b.toffoli(ctl[0], ctl[1], tmp)
        ctl = [tmp]
    bits = [i for i in range(L) if (const >> i) & 1]

    def load():
        for i in bits:
            if ctl:
                b.cnot(ctl[0], scratch[i])
            else:
                b.x(scratch[i])

    load()
    cin = b.alloc(1)[0]
    cuccaro_add(b, scratch, dst, cin)
    b.free([cin])
    load()
    if tmp is not None:
        b.toffoli(controls[0], controls[1], tmp)
        b.free([tmp])
    b.free(scratch)


# --- QFT ------------------------------------------------------------------

@dataclass(frozen=True)
class QftConfig:
    variant: str = "standard"          # standard | fast | phase_gradient
    eta: float | None = None           # prune rotations with |angle| < 2 pi eta
    n_base: int = 2                    # fast variant: size handled by the standard circuit
    gradient_bits: int | None = None   # phase_gradient variant: m (defaults from eta)

    def __post_init__(self):
        if self.variant not in ("standard", "fast", "phase_gradient"):
            raise ValueError(f"unknown QFT variant {self.variant!r}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")

    def grad_bits(self) -> int:
        if self.gradient_bits is not None:
            return self.gradient_bits
        if self.eta is None:
            raise ValueError("phase gradient QFT needs eta or gradient_bits")
        return max(1, math.ceil(math.log2(1 / self.eta)))


def qft_rev_standard(b: Builder, q: Sequence[int], eta: float | None = None):
    """QFT with bit-reversed output: qubit q[j] ends up holding output bit n-1-j."""
    n = len(q)
    if b.counting:
        keep = _kept_distance(eta, n)
        b.bulk("H", n)
        b.bulk("CRphi", sum(min(j, keep) for j in range(n)))
        return
    for j in reversed(range(n)):
        b.h(q[j])
        for l in range(j):
            turns = Fraction(1, 1 << (j - l + 1))
            if eta is not None and turns < eta:
                continue
            b.phase((q[l], q[j]), turns)


def _kept_distance(eta, n: int) -> int:
    """Largest qubit distance d whose rotation 2^-(d+1) turns survives pruning."""
    if eta is None:
        return n
    d = 0
    while d < n and not Fraction(1, 1 << (d + 2)) < eta:
        d += 1
    return d


def qft_rev_fast(b: Builder, q: Sequence[int], cfg, n_base: int = 2):
    """Recursive three-step QFT: the cross term is a phase product.

    With y = y1 + 2^a y2 and output z = z1 + 2^(n-a) z2:
    QFT(y2) -> z1, PhaseProduct(2 pi / 2^n) on (y1, z1), QFT(y1) -> z2.
    """
    from .compiler import emit_phase_product

    n = len(q)
    if n <= max(n_base, 1):
        qft_rev_standard(b, q)
        return
    a = n // 2
    y1, y2 = list(q[:a]), list(q[a:])
    qft_rev_fast(b, y2, cfg, n_base)
    emit_phase_product(b, y1, list(reversed(y2)), Fraction(1, 1 << n), cfg)
    qft_rev_fast(b, y1, cfg, n_base)


def qft_rev_gradient(b: Builder, q: Sequence[int], grad: Sequence[int]):
    """Bit-reversed QFT whose rotations are additions into a phase gradient
    register ``grad`` (m qubits, prepared with :func:`phase_gradient_prepare`).

    For qubit j the rotations implement exp(2 pi i q_j Y / 2^(j+1)) with Y the
    lower j bits; this is realised by adding q_j * Y, scaled to m fractional
    bits and truncated, into the gradient register.
    """
    m = len(grad)
    n = len(q)
    for j in reversed(range(n)):
        b.h(q[j])
        if j == 0:
            continue
        shift = m - j - 1
        if shift >= 0:
            src = list(q[:j])
            window = list(grad[shift:])
        else:
            src = list(q[j + 1 - m:j])
            window = list(grad)
        if not src:
            continue
        key = ("grad_rot", len(src), len(window))

        def body(bb, src=src, window=window, c=q[j]):
            _controlled_register_add(bb, c, src, window)

        b.call(key, body)


def _controlled_register_add(b: Builder, c: int, src: Sequence[int], window: Sequence[int]):
    """window += c * src, through an AND-scratch register."""
    L = len(window)
    scratch = b.alloc(L)
    for i, s in enumerate(src[:L]):
        b.toffoli(c, s, scratch[i])
    cin = b.alloc(1)[0]
    cuccaro_add(b, scratch, window, cin)
    b.free([cin])
    for i, s in enumerate(src[:L]):
        b.toffoli(c, s, scratch[i])
    b.free(scratch)


def reverse_qubits(b: Builder, q: Sequence[int]):
    n = len(q)
    for i in range(n // 2):
        a, c = q[i], q[n - 1 - i]
        b.cnot(a, c)
        b.cnot(c, a)
        b.cnot(a, c)


def emit_qft_rev(b: Builder, q: Sequence[int], qcfg: QftConfig, pcfg=None, inverse: bool = False,
                 grad: Sequence[int] | None = None):
    """Bit-reversed QFT (or its inverse) in any variant."""
    if inverse:
        inverse_of(b, lambda bb: emit_qft_rev(bb, q, qcfg, pcfg, False, grad))
        return
    if qcfg.variant == "standard":
        qft_rev_standard(b, q, qcfg.eta)
    elif qcfg.variant == "fast":
        from .compiler import CompileConfig
        qft_rev_fast(b, q, pcfg or CompileConfig(), qcfg.n_base)
    else:
        if grad is None:
            raise ValueError("phase gradient QFT needs a gradient register")
        qft_rev_gradient(b, q, grad)


class _Recorder(CircuitBuilder):
    """Records gates over an existing qubit numbering, borrowing ancillas from a parent."""

    def __init__(self, parent: Builder):
        super().__init__()
        self.parent = parent

    def alloc(self, n):
        return self.parent.alloc(n)

    def free(self, qubits):
        self.parent.free(qubits)


def _emit_inverse_of(b: Builder, fn: Callable[[Builder], None]):
    """Emit the inverse of the gates produced by ``fn``.

    Ancillas used inside ``fn`` must be returned clean, which makes the
    reversed sequence valid on the same ancilla qubits.
    """
    rec = _Recorder(b)
    fn(rec)
    for g in reversed(rec.gates):
        gi = g.inverse()
        b._emit(gi.kind, gi.targets, gi.controls, gi.turns)


def inverse_of(b: Builder, fn: Callable[[Builder], None]):
    if b.counting:
        fn(b)
    else:
        _emit_inverse_of(b, fn)


def qft_circuit(n: int, qcfg: QftConfig = QftConfig(), pcfg=None) -> Circuit:
    """The full QFT mod 2^n (standard output order) as a circuit."""
    cb = CircuitBuilder()
    q = cb.register("x", n)
    grad = None
    if qcfg.variant == "phase_gradient":
        grad = cb.register("grad", qcfg.grad_bits(), "dirty")
    emit_qft_rev(cb, q, qcfg, pcfg, grad=grad)
    reverse_qubits(cb, q)
    return cb.build()


# --- phase gradient -------------------------------------------------------

def phase_gradient_prepare(b: Builder, g: Sequence[int]):
    """|0...0> -> sum_w exp(-2 pi i w / 2^m) |w>, normalised."""
    m = len(g)
    for j, q in enumerate(g):
        b.h(q)
        b.phase((q,), Fraction(-(1 << j), 1 << m))


def phase_gradient_prepare_circuit(m: int) -> Circuit:
    cb = CircuitBuilder()
    g = cb.register("grad", m)
    phase_gradient_prepare(cb, g)
    return cb.build()


def gradient_increment(angle: float, m: int) -> int:
    """Integer a with 2 pi a / 2^m closest to ``angle``."""
    return int(round(angle * (1 << m) / (2 * math.pi))) % (1 << m)


def phase_gradient_rotate(b: Builder, angle: float, g: Sequence[int], controls: Sequence[int] = ()) -> int:
    """Apply exp(i angle) (rounded to m bits) on the branch where all controls are 1."""
    a = gradient_increment(angle, len(g))
    add_constant(b, a, g, controls)
    return a


# --- multipliers ----------------------------------------------------------

def _pcfg(cfg):
    from .compiler import CompileConfig
    return cfg if cfg is not None else CompileConfig()


def dyadic(a, bits: int) -> Fraction:
    """``a`` rounded to a multiple of 2^-bits (integers and Fractions pass through)."""
    if isinstance(a, (int, Fraction)):
        return Fraction(a)
    return Fraction(round(a * (1 << bits)), 1 << bits)


def fourier_add_product(b: Builder, x: Sequence[int], w: Sequence[int], turns, cfg=None,
                        qcfg: QftConfig = QftConfig(), grad=None):
    """QFT sandwich on ``w``: w += 2^len(w) * turns * x (mod 2^len(w)).

    The bit-reversed QFT leaves the Fourier index z on ``reversed(w)``, so
    the middle step is the phase product exp(2 pi i turns x z).
    """
    from .compiler import emit_phase_product
    cfg = _pcfg(cfg)
    emit_qft_rev(b, w, qcfg, cfg, grad=grad)
    if turns:
        emit_phase_product(b, x, list(reversed(w)), turns, cfg)
    emit_qft_rev(b, w, qcfg, cfg, inverse=True, grad=grad)


def emit_u_cq(b: Builder, a, x, w, cfg=None, qcfg: QftConfig = QftConfig(), grad=None):
    a = dyadic(a, len(w) + 8)
    fourier_add_product(b, x, w, a / (1 << len(w)), cfg, qcfg, grad)


def u_cq(a, n_x: int, n_w: int, cfg=None, qcfg: QftConfig = QftConfig()) -> Circuit:
    """|x>|w> -> |x>|w + a x mod 2^n_w>."""
    if n_w < 1 or n_x < 1:
        raise ValueError("register widths must be at least 1")
    cb = CircuitBuilder()
    x = cb.register("x", n_x)
    w = cb.register("w", n_w, "output")
    grad = cb.register("grad", qcfg.grad_bits(), "dirty") if qcfg.variant == "phase_gradient" else None
    emit_u_cq(cb, a, x, w, cfg, qcfg, grad)
    return cb.build()


def u_qq(n_x: int, n_y: int, n_w: int, cfg=None, qcfg: QftConfig = QftConfig(), scale=1) -> Circuit:
    """|x>|y>|w> -> |x>|y>|w + scale x y mod 2^n_w>, via a triple phase product."""
    from .compiler import emit_phase_triple
    if min(n_x, n_y, n_w) < 1:
        raise ValueError("register widths must be at least 1")
    cfg = _pcfg(cfg)
    cb = CircuitBuilder()
    x = cb.register("x", n_x)
    y = cb.register("y", n_y)
    w = cb.register("w", n_w, "output")
    s = dyadic(scale, n_w + 8)
    emit_qft_rev(cb, w, qcfg, cfg)
    if s:
        emit_phase_triple(cb, x, y, list(reversed(w)), s / (1 << n_w), cfg)
    emit_qft_rev(cb, w, qcfg, cfg, inverse=True)
    return cb.build()


def u_cq_mod(a: int, N: int, n: int, pad: int, cfg=None, qcfg: QftConfig = QftConfig()) -> Circuit:
    """|x>|0> -> |x>|~2^(n+pad) frac(a x / N)>: the phase 2 pi a x z / N makes
    multiples of N vanish, so the output is a binary fraction close to a x / N."""
    if not 0 < N < (1 << n) + 1:
        raise ValueError("need 0 < N <= 2^n")
    cb = CircuitBuilder()
    x = cb.register("x", n)
    w = cb.register("w", n + pad, "output")
    fourier_add_product(cb, x, w, Fraction(a % N, N), cfg, qcfg)
    return cb.build()


# --- in-place modular multiplication --------------------------------------

@dataclass(frozen=True)
class ModMulLayout:
    N: int
    c: int
    n: int
    m: int
    eta: float

    @property
    def c_inv(self) -> int:
        return pow(self.c, -1, self.N)

    @property
    def total_qubits(self) -> int:
        # x, its overflow qubit, the fraction register and the comparator
        return self.n + 1 + self.m + 1


def fraction_bits(n: int, eta: float, log=math.log) -> int:
    """m = n + ceil(2 log(2 + 1/(2 eta)))."""
    return n + math.ceil(2 * log(2 + 1 / (2 * eta)))


def modmul_layout(c: int, N: int, eta: float, log=math.log) -> ModMulLayout:
    if N < 2:
        raise ValueError("modulus must be at least 2")
    if math.gcd(c, N) != 1:
        raise ValueError(f"gcd({c}, {N}) != 1: c has no inverse mod N")
    if eta <= 0:
        raise ValueError("eta must be positive")
    n = N.bit_length()
    return ModMulLayout(N, c % N, n, fraction_bits(n, eta, log), eta)


def _fourier_constant(b: Builder, y: Sequence[int], turns, controls=()):
    """exp(2 pi i turns z) on the Fourier index z = reversed(y)."""
    L = len(y)
    for j, q in enumerate(y):
        t = turns * (1 << (L - 1 - j))
        if t.denominator != 1:
            b.phase(tuple(controls) + (q,), t)


def inplace_mod_mul(c: int, N: int, eta: float, cfg=None, qcfg: QftConfig = QftConfig(),
                    log=math.log) -> Circuit:
    """|x>|0> -> ~|c x mod N>|0> for 0 <= x < N.

    Registers: x (n), top (overflow qubit of x), w (m fraction bits) and cmp
    (comparator).  Markers "step1" ... "step5" delimit the five stages.
    """
    lay = modmul_layout(c, N, eta, log)
    n, m = lay.n, lay.m
    cfg = _pcfg(cfg)
    cb = CircuitBuilder()
    x = cb.register("x", n)
    top = cb.register("top", 1, "ancilla")
    w = cb.register("w", m, "ancilla")
    cmp_ = cb.register("cmp", 1, "ancilla")
    y = x + top
    from .compiler import emit_phase_product
    wz = list(reversed(w))
    yz = list(reversed(y))
    scale = Fraction(N, 1 << (m + n + 1))   # y += N w / 2^m in the Fourier basis of y

    def add_nw(bb, sign):
        emit_qft_rev(bb, y, qcfg, cfg)
        emit_phase_product(bb, w, yz, sign * scale, cfg)
        emit_qft_rev(bb, y, qcfg, cfg, inverse=True)

    cb.mark("step1")
    fourier_add_product(cb, x, w, Fraction((lay.c - 1) % N, N), cfg, qcfg)
    cb.mark("step2")
    add_nw(cb, 1)
    cb.mark("step3")
    # y -= N; the sign lands on top; add N back where it went negative
    emit_qft_rev(cb, y, qcfg, cfg)
    _fourier_constant(cb, y, Fraction(-N, 1 << (n + 1)))
    emit_qft_rev(cb, y, qcfg, cfg, inverse=True)
    cb.cnot(top[0], cmp_[0])
    emit_qft_rev(cb, y, qcfg, cfg)
    _fourier_constant(cb, y, Fraction(N, 1 << (n + 1)), controls=cmp_)
    emit_qft_rev(cb, y, qcfg, cfg, inverse=True)
    cb.mark("step4")
    # cmp is set exactly when y >= N w; the sign of y - N w clears it
    add_nw(cb, -1)
    cb.cnot(top[0], cmp_[0])
    cb.x(cmp_[0])
    add_nw(cb, 1)
    cb.mark("step5")
    fourier_add_product(cb, x, w, -Fraction((1 - lay.c_inv) % N, N), cfg, qcfg)
    cb.mark("end")
    return cb.build()
