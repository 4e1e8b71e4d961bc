"""Statevector simulation of circuits.

The workhorse is :class:`BatchState`: a batch of ``B`` runs of the same gate
list.  Qubits that are still in a definite computational-basis value are kept
as plain bits per run ("classical" qubits); only qubits that have been put in
superposition are carried in the dense amplitude array, which has shape
``(B, 2, 2, ..., 2)``.  For arithmetic circuits whose inputs are basis states
this keeps the dense part small (often just the output register) while the
result is the same linear algebra as a full statevector.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .circuit import Circuit, Gate, inverse_gates

DEFAULT_QUBIT_LIMIT = 24
COMPACT_AT = 1 << 14
_H = 1 / math.sqrt(2)


class QubitLimitError(ValueError):
    pass


class NotPermutationError(ValueError):
    pass


class BatchState:
    def __init__(self, n_qubits: int, bits: np.ndarray, dense_limit: int = DEFAULT_QUBIT_LIMIT):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim == 1:
            bits = bits[None, :]
        self.n = n_qubits
        self.B = bits.shape[0]
        self.bits = bits.copy()            # (B, n); meaningful only where classical
        self.qlist: list[int] = []          # quantum qubits, axis i+1 of psi
        self.psi = np.ones((self.B,), dtype=np.complex128)
        self.dense_limit = dense_limit
        self.discarded = np.zeros(self.B)   # squared norm dropped by compact()

    @staticmethod
    def from_ints(n_qubits: int, values: Sequence[int], **kw) -> "BatchState":
        vals = np.asarray(values, dtype=object)
        bits = np.array([[(int(v) >> q) & 1 for q in range(n_qubits)] for v in vals], dtype=np.uint8)
        return BatchState(n_qubits, bits.reshape(len(vals), n_qubits), **kw)

    # -- helpers ---------------------------------------------------------
    def _axis(self, q):
        try:
            return self.qlist.index(q) + 1
        except ValueError:
            return None

    def promote(self, q: int, compact: bool = True):
        if q in self.qlist:
            return
        if compact and self.psi.size >= COMPACT_AT:
            # uncomputed ancillas are exactly definite again; demote them first
            self.compact(tol=0.0)
        if len(self.qlist) + 1 > self.dense_limit:
            raise QubitLimitError(f"more than {self.dense_limit} qubits in superposition")
        v = self.bits[:, q]
        new = np.zeros(self.psi.shape + (2,), dtype=np.complex128)
        rows = np.arange(self.B)
        new[rows, ..., v] = self.psi[rows] if self.psi.ndim > 1 else self.psi
        # numpy fancy indexing above puts the row axis first; keep layout (B, ..., 2)
        self.psi = new
        self.qlist.append(q)

    def _cmask(self, cqs):
        if not cqs:
            return None
        m = self.bits[:, cqs[0]].astype(bool)
        for c in cqs[1:]:
            m &= self.bits[:, c].astype(bool)
        return m

    def _view(self, qaxes_one: Iterable[int]):
        sl = [slice(None)] * self.psi.ndim
        for ax in qaxes_one:
            sl[ax] = 1
        return tuple(sl)

    # -- gate application ------------------------------------------------
    def apply(self, g: Gate):
        k = g.kind
        if k == "marker":
            return
        if k in ("Rphi", "CRphi", "CCRphi"):
            self._phase(g.qubits, cmath.exp(2j * math.pi * float(g.turns)))
        elif k in ("X", "CNOT", "Toffoli"):
            self._mcx(g.controls, g.targets[0])
        elif k == "H":
            self._h(g.targets[0])
        elif k == "SWAP":
            a, b = g.targets
            self._mcx((a,), b); self._mcx((b,), a); self._mcx((a,), b)
        else:
            raise ValueError(f"unsupported gate {k}")

    def run(self, gates: Iterable[Gate]):
        for g in gates:
            self.apply(g)
        return self

    def _split(self, qubits):
        cq, qa = [], []
        for q in qubits:
            ax = self._axis(q)
            if ax is None:
                cq.append(q)
            else:
                qa.append(ax)
        return cq, qa

    def _phase(self, qubits, e):
        cq, qa = self._split(qubits)
        mask = self._cmask(cq)
        if not qa:
            if mask is None:
                self.psi *= e
            else:
                self.psi[mask] *= e
            return
        sl = self._view(qa)
        if mask is None:
            self.psi[sl] *= e
        elif mask.any():
            sub = self.psi[sl]
            sub[mask] *= e

    def _mcx(self, controls, t):
        cq, qa = self._split(controls)
        tax = self._axis(t)
        mask = self._cmask(cq)
        if tax is None:
            if not qa:
                if mask is None:
                    self.bits[:, t] ^= 1
                else:
                    self.bits[:, t] ^= mask.astype(np.uint8)
                return
            self.promote(t)
            # promotion may demote other qubits, so recompute the layout
            cq, qa = self._split(controls)
            mask = self._cmask(cq)
            tax = self._axis(t)
        sl = list(self._view(qa))
        s0, s1 = list(sl), list(sl)
        s0[tax], s1[tax] = 0, 1
        s0, s1 = tuple(s0), tuple(s1)
        if mask is None:
            tmp = self.psi[s0].copy()
            self.psi[s0] = self.psi[s1]
            self.psi[s1] = tmp
        elif mask.any():
            rows = np.nonzero(mask)[0]
            a = self.psi[s0][rows]
            b = self.psi[s1][rows]
            v0 = self.psi[s0]
            v1 = self.psi[s1]
            v0[rows] = b
            v1[rows] = a

    def _h(self, t):
        self.promote(t)
        tax = self._axis(t)
        s0 = [slice(None)] * self.psi.ndim
        s1 = list(s0)
        s0[tax], s1[tax] = 0, 1
        a = self.psi[tuple(s0)].copy()
        b = self.psi[tuple(s1)]
        self.psi[tuple(s0)] = (a + b) * _H
        self.psi[tuple(s1)] = (a - b) * _H

    # -- reading out -----------------------------------------------------
    def compact(self, tol: float = 1e-24):
        """Turn quantum qubits back into classical bits where every run is definite."""
        for q in list(self.qlist):
            ax = self._axis(q)
            s0 = [slice(None)] * self.psi.ndim
            s1 = list(s0)
            s0[ax], s1[ax] = 0, 1
            red = tuple(range(1, self.psi.ndim - 1))
            n0 = (np.abs(self.psi[tuple(s0)]) ** 2).sum(axis=red) if red else np.abs(self.psi[tuple(s0)]) ** 2
            n1 = (np.abs(self.psi[tuple(s1)]) ** 2).sum(axis=red) if red else np.abs(self.psi[tuple(s1)]) ** 2
            one = n1 > n0
            small = np.where(one, n0, n1)
            if np.all(small <= tol):
                self.discarded += small
                self.psi = np.where(one.reshape((-1,) + (1,) * (self.psi.ndim - 2)),
                                    self.psi[tuple(s1)], self.psi[tuple(s0)])
                self.bits[:, q] = one.astype(np.uint8)
                self.qlist.remove(q)
        return self

    def amplitudes(self, row: int) -> np.ndarray:
        """Full dense amplitude vector for one run (little-endian qubit order)."""
        nq = self.n
        if nq > DEFAULT_QUBIT_LIMIT + 4:
            raise QubitLimitError("state too large to expand")
        base = 0
        for q in range(nq):
            if q not in self.qlist and self.bits[row, q]:
                base |= 1 << q
        out = np.zeros(1 << nq, dtype=np.complex128)
        sub = np.asarray(self.psi[row]).reshape(-1)
        m = len(self.qlist)
        idx = np.full(1 << m, base, dtype=np.int64)
        # psi axis order: first listed qubit is the most significant axis
        for j, q in enumerate(self.qlist):
            bit = (np.arange(1 << m) >> (m - 1 - j)) & 1
            idx |= bit.astype(np.int64) << q
        out[idx] = sub
        return out

    def peak(self) -> tuple[np.ndarray, np.ndarray]:
        """Most likely output basis value and its amplitude for each run."""
        m = len(self.qlist)
        flat = self.psi.reshape(self.B, -1) if m else self.psi.reshape(self.B, 1)
        arg = np.abs(flat).argmax(axis=1)
        amp = flat[np.arange(self.B), arg]
        vals = np.zeros(self.B, dtype=object)
        for r in range(self.B):
            v = 0
            for q in range(self.n):
                if q not in self.qlist and self.bits[r, q]:
                    v |= 1 << q
            for j, q in enumerate(self.qlist):
                if (int(arg[r]) >> (m - 1 - j)) & 1:
                    v |= 1 << q
            vals[r] = v
        return vals, amp

    def overlap(self, row: int, value: int) -> complex:
        """<value|state> for run ``row``."""
        for q in range(self.n):
            if q not in self.qlist and self.bits[row, q] != ((value >> q) & 1):
                return 0j
        m = len(self.qlist)
        if not m:
            return complex(self.psi[row])
        j = 0
        for i, q in enumerate(self.qlist):
            j |= ((value >> q) & 1) << (m - 1 - i)
        return complex(np.asarray(self.psi[row]).reshape(-1)[j])


# --- public API -------------------------------------------------------------

@dataclass
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def run(circuit: Circuit, basis: int = 0, limit: int = DEFAULT_QUBIT_LIMIT) -> StateVector:
    """Apply the circuit to one basis state and return the dense state."""
    if circuit.n_qubits > limit:
        raise QubitLimitError(f"{circuit.n_qubits} qubits exceeds limit {limit}")
    st = BatchState.from_ints(circuit.n_qubits, [basis], dense_limit=limit)
    st.run(circuit.gates)
    return StateVector(st.amplitudes(0), circuit.n_qubits)


def run_state(circuit: Circuit, psi: np.ndarray) -> np.ndarray:
    """Apply the circuit to an arbitrary dense input state."""
    n = circuit.n_qubits
    st = BatchState(n, np.zeros((1, n), dtype=np.uint8), dense_limit=max(n, 1))
    for q in reversed(range(n)):
        st.promote(q)
    # promoted in order n-1..0, so axis order is most significant first
    st.psi = np.asarray(psi, dtype=np.complex128).reshape((1,) + (2,) * n).copy()
    st.run(circuit.gates)
    return st.amplitudes(0)


def unitary(circuit: Circuit) -> np.ndarray:
    """Full matrix, column j = circuit applied to basis state j."""
    n = circuit.n_qubits
    st = BatchState.from_ints(n, list(range(1 << n)), dense_limit=n)
    st.run(circuit.gates)
    return np.stack([st.amplitudes(r) for r in range(1 << n)], axis=1)


def fidelity(state: StateVector | np.ndarray, target: int) -> float:
    amps = state.amplitudes if isinstance(state, StateVector) else state
    return float(abs(amps[target]) ** 2)


def input_qubits(circuit: Circuit) -> list[int]:
    return [q for r in circuit.registers if r.role in ("input", "output", "dirty") for q in r.qubits]


def enumerate_inputs(circuit: Circuit, fixed: dict | None = None) -> list[int]:
    """All basis states over input/output registers (ancillas zero)."""
    qs = input_qubits(circuit)
    out = []
    for v in range(1 << len(qs)):
        b = 0
        for i, q in enumerate(qs):
            if (v >> i) & 1:
                b |= 1 << q
        out.append(b)
    return out


@dataclass
class ActionTable:
    inputs: list
    outputs: list
    phases: np.ndarray   # radians
    max_leak: float      # 1 - |amplitude| worst case

    def as_dict(self) -> dict:
        return {i: (o, float(p)) for i, o, p in zip(self.inputs, self.outputs, self.phases)}


MAX_AMPLITUDES = 1 << 23


def _batched(circuit: Circuit, inputs: Sequence[int], chunk: int, limit: int):
    # register qubits may all end up in superposition, plus a few live ancillas
    dense = min(len(input_qubits(circuit)) + 4, circuit.n_qubits, 23)
    chunk = max(1, min(chunk, MAX_AMPLITUDES >> dense))
    for s in range(0, len(inputs), chunk):
        part = inputs[s:s + chunk]
        st = BatchState.from_ints(circuit.n_qubits, part, dense_limit=limit)
        st.run(circuit.gates)
        st.compact(tol=1e-18)
        yield part, st


def action_table(circuit: Circuit, inputs: Sequence[int] | None = None, tol: float = 1e-9,
                 chunk: int = 4096, limit: int = DEFAULT_QUBIT_LIMIT) -> ActionTable:
    inputs = enumerate_inputs(circuit) if inputs is None else list(inputs)
    ins, outs, phases, worst = [], [], [], 0.0
    for part, st in _batched(circuit, inputs, chunk, limit):
        vals, amps = st.peak()
        leak = 1 - np.abs(amps)
        worst = max(worst, float(leak.max()))
        if leak.max() > tol:
            raise NotPermutationError(f"circuit leaves a superposition (1-|amp| = {leak.max():.3g})")
        ins += list(part)
        outs += [int(v) for v in vals]
        phases += list(np.angle(amps))
    return ActionTable(ins, outs, np.array(phases), worst)


def verify_against(circuit: Circuit, spec: Callable[[int], tuple], inputs: Sequence[int] | None = None,
                   chunk: int = 4096, limit: int = DEFAULT_QUBIT_LIMIT) -> float:
    """max over inputs of |1 - <actual|expected>|, expected = spec(basis) -> (basis, phase)."""
    inputs = enumerate_inputs(circuit) if inputs is None else list(inputs)
    worst = 0.0
    for part, st in _batched(circuit, inputs, chunk, limit):
        for r, b in enumerate(part):
            out, ph = spec(b)
            ov = st.overlap(r, out) * cmath.exp(-1j * ph)
            worst = max(worst, abs(1 - ov))
    return worst


def register_amplitudes(st: BatchState, qubits: Sequence[int]) -> np.ndarray:
    """(B, 2^len(qubits)) amplitudes indexed by the register value.

    Every other qubit must be classical in every run; the returned vector is
    then the full state of each run up to those definite bits.
    """
    st.compact(tol=0.0)
    extra = [q for q in st.qlist if q not in qubits]
    if extra:
        raise ValueError(f"qubits {extra} outside the register are in superposition")
    for q in reversed(qubits):
        st.promote(q, compact=False)
    # axes ordered most significant register qubit first
    order = [st.qlist.index(q) + 1 for q in reversed(qubits)]
    psi = np.transpose(st.psi, [0] + order)
    return psi.reshape(st.B, 1 << len(qubits))


@dataclass
class ModMulResult:
    x: int
    target: int
    fidelity_bound: float   # rigorous lower bound on |<target, 0|psi>|^2
    kept: int               # fraction-register branches simulated exactly
    tail: float             # Cauchy-Schwarz bound on the dropped branches


def simulate_mod_mul(circuit: Circuit, c: int, N: int, xs: Sequence[int] | None = None,
                     tail_tol: float = 1e-4, max_branches: int = 4096) -> list[ModMulResult]:
    """Fidelity of the in-place modular multiplier on basis inputs ``xs``.

    Steps 1 and 5 only touch the fraction register w (controlled by x or by
    the product), and steps 2-4 only touch x and the comparator (controlled
    by w).  Writing the output of step 1 as sum_w alpha_w |x>|w> and the
    pull-back of the target through step 5 as sum_w chi_w |y>|w>, the
    amplitude of the target is sum_w conj(chi_w) alpha_w <y,0|U|x,0>_w.
    Branches are simulated in order of |alpha chi| until the rest is bounded
    by sqrt(sum |alpha|^2 sum |chi|^2) <= tail_tol.
    """
    xs = list(range(N)) if xs is None else list(xs)
    xr = circuit.register("x").qubits
    wr = list(circuit.register("w").qubits)
    nq = circuit.n_qubits
    step1 = circuit.segment("step1", "step2")
    middle = circuit.segment("step2", "step5")
    step5 = circuit.segment("step5", "end")
    ys = [c * x % N for x in xs]

    def embed(vals, reg):
        return [sum(((v >> i) & 1) << q for i, q in enumerate(reg)) for v in vals]

    st = BatchState.from_ints(nq, embed(xs, xr), dense_limit=nq)
    st.run(step1)
    alpha = register_amplitudes(st, wr)
    st = BatchState.from_ints(nq, embed(ys, xr), dense_limit=nq)
    st.run(inverse_gates(step5))
    chi = register_amplitudes(st, wr)
    del st
    out = []
    for r, (x, y) in enumerate(zip(xs, ys)):
        a, ch = alpha[r], chi[r]
        order = np.argsort(-(np.abs(a) * np.abs(ch)))
        ra = np.cumsum((np.abs(a[order]) ** 2)[::-1])[::-1]
        rc = np.cumsum((np.abs(ch[order]) ** 2)[::-1])[::-1]
        tails = np.sqrt(np.append(ra[1:] * rc[1:], 0.0))
        K = int(np.argmax(tails <= tail_tol)) + 1 if (tails <= tail_tol).any() else len(order)
        K = min(K, max_branches)
        keep = order[:K]
        tail = float(tails[K - 1])
        xb = embed([x], xr)[0]
        rows = [xb | embed([int(wv)], wr)[0] for wv in keep]
        bs = BatchState.from_ints(nq, rows, dense_limit=nq)
        bs.run(middle)
        yb = embed([y], xr)[0]
        amp = 0j
        for i, wv in enumerate(keep):
            ov = bs.overlap(i, yb | embed([int(wv)], wr)[0])
            amp += np.conj(ch[wv]) * a[wv] * ov
        bound = max(0.0, abs(amp) - tail) ** 2
        out.append(ModMulResult(x, y, bound, K, tail))
    return out
