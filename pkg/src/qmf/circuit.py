"""Gate-level circuit representation, builders and JSON/text export.

Rotation angles are stored as exact ``Fraction`` multiples of a full turn
(``turns``); a gate with ``turns = t`` multiplies the all-ones branch of its
qubits by ``exp(2*pi*i*t)``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

PHASE_KINDS = ("Rphi", "CRphi", "CCRphi")
CLIFFORD_KINDS = ("H", "X", "CNOT")
_PHASE_BY_ARITY = {1: "Rphi", 2: "CRphi", 3: "CCRphi"}


def norm_turns(t) -> Fraction:
    """Reduce a rotation to the interval (-1/2, 1/2]."""
    t = Fraction(t)
    t -= math.floor(t)
    if t > Fraction(1, 2):
        t -= 1
    return t


@dataclass(frozen=True, slots=True)
class Gate:
    kind: str
    targets: tuple
    controls: tuple = ()
    turns: Fraction | None = None
    label: str | None = None  # only for "marker" pseudo-gates

    @property
    def qubits(self) -> tuple:
        return self.controls + self.targets

    @property
    def angle(self) -> float | None:
        return None if self.turns is None else 2 * math.pi * float(self.turns)

    def inverse(self) -> "Gate":
        if self.turns is None:
            return self
        return Gate(self.kind, self.targets, self.controls, norm_turns(-self.turns))

    def to_json(self) -> dict:
        d = {"kind": self.kind, "targets": list(self.targets), "controls": list(self.controls),
             "angle": self.angle}
        if self.turns is not None:
            d["turns"] = f"{self.turns.numerator}/{self.turns.denominator}"
        if self.label is not None:
            d["label"] = self.label
        return d

    @staticmethod
    def from_json(d: dict) -> "Gate":
        turns = None
        if d.get("turns") is not None:
            turns = Fraction(d["turns"])
        elif d.get("angle") is not None:
            turns = Fraction(d["angle"] / (2 * math.pi)).limit_denominator(1 << 62)
        return Gate(d["kind"], tuple(d["targets"]), tuple(d.get("controls", ())), turns, d.get("label"))


def inverse_gates(gates: Sequence[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


@dataclass(frozen=True)
class Register:
    name: str
    qubits: tuple
    role: str  # input, output, ancilla, dirty

    @property
    def size(self) -> int:
        return len(self.qubits)


@dataclass
class Circuit:
    n_qubits: int
    registers: list
    gates: list
    ancilla_high_water: int = 0

    def register(self, name: str) -> Register:
        for r in self.registers:
            if r.name == name:
                return r
        raise KeyError(name)

    def census(self) -> Counter:
        return census(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, list(self.registers), inverse_gates(self.gates),
                       self.ancilla_high_water)

    def segment(self, start: str, stop: str | None = None) -> list[Gate]:
        """Gates strictly between two marker labels (``stop=None``: until the end)."""
        out, on = [], False
        for g in self.gates:
            if g.kind == "marker":
                if g.label == start:
                    on = True
                    continue
                if on and g.label == stop:
                    break
                continue
            if on:
                out.append(g)
        if not on:
            raise KeyError(start)
        return out

    def to_json(self) -> dict:
        return {
            "registers": [{"name": r.name, "size": r.size, "role": r.role, "qubits": list(r.qubits)}
                          for r in self.registers],
            "gates": [g.to_json() for g in self.gates],
            "ancilla_high_water": self.ancilla_high_water,
            "n_qubits": self.n_qubits,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @staticmethod
    def from_json(d: dict) -> "Circuit":
        regs, nxt = [], 0
        for r in d["registers"]:
            qs = tuple(r["qubits"]) if "qubits" in r else tuple(range(nxt, nxt + r["size"]))
            nxt = max([nxt] + [q + 1 for q in qs])
            regs.append(Register(r["name"], qs, r["role"]))
        gates = [Gate.from_json(g) for g in d["gates"]]
        nq = d.get("n_qubits", nxt)
        return Circuit(nq, regs, gates, d.get("ancilla_high_water", 0))

    def to_text(self) -> str:
        lines = []
        for g in self.gates:
            if g.kind == "marker":
                lines.append(f"# {g.label}")
                continue
            ops = " ".join(str(q) for q in g.qubits)
            lines.append(f"{g.kind} {ops}" + ("" if g.turns is None else f" {g.angle!r}"))
        return "\n".join(lines) + "\n"


def census(gates: Iterable[Gate]) -> Counter:
    c = Counter()
    for g in gates:
        if g.kind != "marker":
            c[g.kind] += 1
    return c


def summarize(counts: Counter) -> dict:
    """Collapse per-kind counts into the reporting classes."""
    return {
        "toffoli": counts.get("Toffoli", 0),
        "crphi": counts.get("CRphi", 0) + counts.get("CCRphi", 0),
        "ccrphi": counts.get("CCRphi", 0),
        "rphi": counts.get("Rphi", 0),
        "clifford": sum(counts.get(k, 0) for k in CLIFFORD_KINDS),
    }


class Builder:
    """Common emission interface used by every circuit generator.

    Two implementations share it: :class:`CircuitBuilder` records gates, and
    :class:`CountBuilder` only tallies them (with memoised sub-calls), so a
    single generator serves both synthesis and cost estimation.
    """

    def h(self, q):
        self._emit("H", (q,), ())

    def x(self, q):
        self._emit("X", (q,), ())

    def cnot(self, c, t):
        self._emit("CNOT", (t,), (c,))

    def toffoli(self, c1, c2, t):
        self._emit("Toffoli", (t,), (c1, c2))

    def phase(self, qubits: Sequence[int], turns):
        """Phase exp(2 pi i turns) on the branch where all ``qubits`` are 1."""
        qubits = tuple(qubits)
        kind = _PHASE_BY_ARITY[len(qubits)]
        self._emit(kind, qubits[-1:], qubits[:-1], turns)

    def bulk(self, kind: str, n: int):
        """Count-only shortcut: ``n`` gates of ``kind`` (counting builders only)."""
        raise TypeError("bulk() is only available while counting")

    def emit_all(self, gates: Iterable[Gate]):
        for g in gates:
            self._emit(g.kind, g.targets, g.controls, g.turns)

    # overridden
    def _emit(self, kind, targets, controls, turns=None):
        raise NotImplementedError

    def alloc(self, n: int) -> list[int]:
        raise NotImplementedError

    def free(self, qubits: Sequence[int]):
        raise NotImplementedError

    def call(self, key, fn: Callable[["Builder"], None]):
        fn(self)

    def mark(self, label: str):
        pass

    counting = False


class CircuitBuilder(Builder):
    def __init__(self):
        self.registers: list[Register] = []
        self.gates: list[Gate] = []
        self._n_inputs = 0
        self._anc_free: list[int] = []
        self._anc_total = 0
        self._in_use = 0
        self.high_water = 0
        self._frozen = False

    def register(self, name: str, size: int, role: str = "input") -> list[int]:
        if self._anc_total:
            raise RuntimeError("declare registers before allocating ancillas")
        qs = tuple(range(self._n_inputs, self._n_inputs + size))
        self._n_inputs += size
        self.registers.append(Register(name, qs, role))
        return list(qs)

    def _emit(self, kind, targets, controls, turns=None):
        if turns is not None:
            turns = norm_turns(turns)
        ops = tuple(controls) + tuple(targets)
        if len(set(ops)) != len(ops):
            raise ValueError(f"repeated operand in {kind} {ops}")
        self.gates.append(Gate(kind, tuple(targets), tuple(controls), turns))

    def mark(self, label: str):
        self.gates.append(Gate("marker", (), (), None, label))

    def alloc(self, n: int) -> list[int]:
        out = []
        self._anc_free.sort(reverse=True)
        for _ in range(n):
            if self._anc_free:
                out.append(self._anc_free.pop())
            else:
                out.append(self._n_inputs + self._anc_total)
                self._anc_total += 1
        self._in_use += n
        self.high_water = max(self.high_water, self._in_use)
        return out

    def free(self, qubits):
        self._in_use -= len(qubits)
        self._anc_free.extend(qubits)

    def build(self) -> Circuit:
        if self._in_use:
            raise RuntimeError(f"{self._in_use} ancillas still allocated")
        regs = list(self.registers)
        if self._anc_total:
            regs.append(Register("anc", tuple(range(self._n_inputs, self._n_inputs + self._anc_total)),
                                 "ancilla"))
        return Circuit(self._n_inputs + self._anc_total, regs, self.gates, self.high_water)


class CountBuilder(Builder):
    """Tallies gates without storing them; ``call`` results are memoised by key."""

    counting = True

    def __init__(self, memo: dict | None = None):
        self.counts = Counter()
        self.memo = {} if memo is None else memo
        self._in_use = 0
        self.high_water = 0
        self._next = 1 << 40

    def _emit(self, kind, targets, controls, turns=None):
        self.counts[kind] += 1

    def bulk(self, kind, n):
        if n:
            self.counts[kind] += n

    def alloc(self, n):
        self._in_use += n
        self.high_water = max(self.high_water, self._in_use)
        base = self._next
        self._next += n
        return list(range(base, base + n))

    def free(self, qubits):
        self._in_use -= len(qubits)

    def call(self, key, fn):
        hit = self.memo.get(key)
        if hit is None:
            sub = CountBuilder(self.memo)
            fn(sub)
            if sub._in_use:
                raise RuntimeError("sub-call leaked ancillas")
            hit = (sub.counts, sub.high_water)
            self.memo[key] = hit
        self.counts.update(hit[0])
        self.high_water = max(self.high_water, self._in_use + hit[1])


def count(fn: Callable[[Builder], None], memo: dict | None = None) -> tuple[Counter, int]:
    """Run a generator in counting mode, returning (counts, ancilla high water)."""
    b = CountBuilder(memo)
    fn(b)
    return b.counts, b.high_water
