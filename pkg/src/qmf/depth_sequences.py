"""Symbolic checking of hand-written parallel addition sequences.

A sequence acts on k registers that start out holding the pieces
x0 .. x(k-1).  Every register state is tracked as an exact linear
combination of those symbols, so a sequence can be checked for three things:
the combinations present at each product marker are (up to a +-2^j factor)
evaluation rows of the intended points, every point is hit exactly once, and
the registers end where they started.

Sequences are JSON assets in ``qmf/data``.  A product entry with
``after_op = i`` takes place right after op ``i`` (0-based), and ``table``
mirrors the printed rows, one per op or product, with the expected states.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Sequence

from .toom import EvalPoint

NAMES = ("k3_cq", "k3_qq", "k4_qq")


class SequenceError(ValueError):
    pass


class InexactDivisionError(SequenceError):
    pass


@dataclass(frozen=True)
class SeqOp:
    kind: str                 # add_scaled | negate | divide | product_marker
    src: int | None = None
    dst: int | None = None
    src_coeff: int = 1
    dst_coeff: int = 1
    reg: int | None = None
    by: int = 1
    registers: tuple = ()

    def __str__(self) -> str:
        if self.kind == "add_scaled":
            s = "" if self.src_coeff == 1 else f"{self.src_coeff}x "
            d = "" if self.dst_coeff == 1 else f"{self.dst_coeff}x "
            return f"add {s}reg {self.src} to {d}reg {self.dst}"
        if self.kind == "negate":
            return f"negate reg {self.reg}"
        if self.kind == "divide":
            return f"divide reg {self.reg} by {self.by}"
        return "product on regs " + ",".join(str(r) for r in self.registers)


@dataclass
class ParallelSequence:
    name: str
    registers: int
    points: tuple
    ops: list                     # SeqOp, product markers included
    table: list = field(default_factory=list)   # (label, expected state) per printed row
    title: str = ""


# a register state: tuple of Fractions, coefficient of x_i at position i
RegState = tuple


def parse_combo(text: str, k: int) -> tuple:
    """'x0-2x1+4x2' -> (1, -2, 4)."""
    s = text.replace(" ", "").replace("−", "-")
    if not s:
        raise SequenceError("empty combination")
    if s[0] not in "+-":
        s = "+" + s
    out = [Fraction(0)] * k
    pos = 0
    for m in re.finditer(r"([+-])(\d*)x(\d+)", s):
        if m.start() != pos:
            raise SequenceError(f"cannot parse {text!r}")
        pos = m.end()
        c = int(m.group(2)) if m.group(2) else 1
        i = int(m.group(3))
        if i >= k:
            raise SequenceError(f"symbol x{i} out of range in {text!r}")
        out[i] += -c if m.group(1) == "-" else c
    if pos != len(s):
        raise SequenceError(f"cannot parse {text!r}")
    return tuple(out)


def format_combo(c: Sequence) -> str:
    terms = []
    for i, v in enumerate(c):
        if v == 0:
            continue
        mag = abs(v)
        body = (f"x{i}" if mag == 1 else f"{mag}x{i}")
        terms.append(("-" if v < 0 else "+") + body)
    if not terms:
        return "0"
    s = "".join(terms)
    return s[1:] if s[0] == "+" else s


def _op_from_json(d: dict) -> SeqOp:
    kind = d["kind"]
    if kind == "add_scaled":
        return SeqOp(kind, src=d["src"], dst=d["dst"], src_coeff=d.get("src_coeff", 1),
                     dst_coeff=d.get("dst_coeff", 1))
    if kind == "negate":
        return SeqOp(kind, reg=d["reg"])
    if kind == "divide":
        return SeqOp(kind, reg=d["reg"], by=d["by"])
    if kind == "product_marker":
        return SeqOp(kind, registers=tuple(d["registers"]))
    raise SequenceError(f"unknown op kind {kind!r}")


def sequence_from_json(doc: dict) -> ParallelSequence:
    try:
        k = int(doc["registers"])
        arith = [_op_from_json(d) for d in doc["ops"]]
        after = {}
        for p in doc.get("products", []):
            after.setdefault(int(p["after_op"]), []).append(
                SeqOp("product_marker", registers=tuple(p["registers"])))
        ops = list(after.get(-1, []))
        for i, op in enumerate(arith):
            ops.append(op)
            ops.extend(after.get(i, []))
        table = []
        for row in doc.get("table", []):
            label = "product" if row["row"] == "product" else str(arith[row["op"]])
            table.append((label, tuple(parse_combo(s, k) for s in row["state"])))
        points = tuple(EvalPoint.parse(p) for p in doc.get("points", []))
    except (KeyError, TypeError, ValueError) as e:
        raise SequenceError(f"bad sequence asset: {e}") from e
    return ParallelSequence(doc.get("name", ""), k, points, ops, table, doc.get("title", ""))


def load_sequence(name: str) -> ParallelSequence:
    text = resources.files("qmf.data").joinpath(f"{name}.json").read_text()
    return sequence_from_json(json.loads(text))


def load_sequences() -> dict:
    return {n: load_sequence(n) for n in NAMES}


def initial_state(k: int) -> list:
    return [tuple(Fraction(int(i == j)) for j in range(k)) for i in range(k)]


def _check_reg(r, k):
    if r is None or not 0 <= r < k:
        raise SequenceError(f"unknown register {r}")


def apply_op(state: list, op: SeqOp) -> list:
    k = len(state)
    st = list(state)
    if op.kind == "add_scaled":
        _check_reg(op.src, k)
        _check_reg(op.dst, k)
        if op.src == op.dst:
            raise SequenceError("source and destination coincide")
        st[op.dst] = tuple(op.dst_coeff * d + op.src_coeff * s for d, s in zip(st[op.dst], st[op.src]))
    elif op.kind == "negate":
        _check_reg(op.reg, k)
        st[op.reg] = tuple(-v for v in st[op.reg])
    elif op.kind == "divide":
        _check_reg(op.reg, k)
        q = [Fraction(v) / op.by for v in st[op.reg]]
        if any(v.denominator != 1 for v in q):
            raise InexactDivisionError(f"{op}: {format_combo(st[op.reg])} is not divisible by {op.by}")
        st[op.reg] = tuple(q)
    elif op.kind == "product_marker":
        for r in op.registers:
            _check_reg(r, k)
    else:
        raise SequenceError(f"unknown op kind {op.kind!r}")
    return st


def symbolic_execute(seq: ParallelSequence) -> list:
    """State after every op (product markers included), as lists of RegState."""
    st = initial_state(seq.registers)
    trace = []
    for op in seq.ops:
        st = apply_op(st, op)
        trace.append(list(st))
    return trace


def op_matrix(op: SeqOp, k: int) -> list:
    """The op as a k x k matrix M acting on the column of register contents."""
    cols = apply_op(initial_state(k), op)
    return [[cols[i][j] for j in range(k)] for i in range(k)]


def _power_of_two(c: Fraction) -> bool:
    a = abs(Fraction(c))
    if a == 0:
        return False
    n, d = a.numerator, a.denominator
    return (n & (n - 1)) == 0 and (d & (d - 1)) == 0


def match_point(combo: Sequence, points: Sequence[EvalPoint]):
    """(point index, constant) with combo = constant * row, constant = +-2^j; else None."""
    k = len(combo)
    for i, p in enumerate(points):
        row = list(reversed(p.row(k)))  # little endian
        ratio = None
        ok = True
        for c, r in zip(combo, row):
            if r == 0:
                if c != 0:
                    ok = False
                    break
                continue
            q = Fraction(c) / r
            if ratio is None:
                ratio = q
            elif q != ratio:
                ok = False
                break
        if ok and ratio is not None and _power_of_two(ratio):
            return i, ratio
    return None


@dataclass
class VerifyResult:
    ok: bool
    diagnostics: list
    coverage: dict           # point label -> (op index, register, constant)

    def __bool__(self):
        return self.ok


def verify_sequence(seq: ParallelSequence, plan_points=None) -> VerifyResult:
    points = [p if isinstance(p, EvalPoint) else EvalPoint.parse(p)
              for p in (plan_points if plan_points is not None else seq.points)]
    diags, cover = [], {}
    st = initial_state(seq.registers)
    try:
        for idx, op in enumerate(seq.ops):
            st = apply_op(st, op)
            if op.kind != "product_marker":
                continue
            for r in op.registers:
                m = match_point(st[r], points)
                if m is None:
                    diags.append(f"op {idx}: register {r} holds {format_combo(st[r])}, "
                                 f"which matches no evaluation point")
                    continue
                pi, c = m
                label = str(points[pi])
                if label in cover:
                    diags.append(f"op {idx}: point {label} already used at op {cover[label][0]}")
                else:
                    cover[label] = (idx, r, c)
    except SequenceError as e:
        diags.append(str(e))
        return VerifyResult(False, diags, cover)
    for p in points:
        if str(p) not in cover:
            diags.append(f"point {p} never reached")
    if st != initial_state(seq.registers):
        diags.append("final state " + "; ".join(format_combo(c) for c in st) + " is not the initial state")
    return VerifyResult(not diags, diags, cover)


def compare_table(seq: ParallelSequence) -> list:
    """Mismatches between the executed trace and the printed table rows."""
    trace = symbolic_execute(seq)
    if len(trace) != len(seq.table):
        return [f"trace has {len(trace)} rows, table has {len(seq.table)}"]
    bad = []
    for i, (got, (label, want)) in enumerate(zip(trace, seq.table)):
        if tuple(got) != want:
            bad.append(f"row {i + 1} ({label}): got " + "; ".join(format_combo(c) for c in got)
                       + ", table says " + "; ".join(format_combo(c) for c in want))
    return bad
