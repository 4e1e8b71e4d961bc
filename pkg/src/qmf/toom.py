"""Exact Toom-Cook algebra: evaluation points, matrices and phase coefficients.

Everything here works over Python integers and ``fractions.Fraction`` so that
identities hold exactly, with no floating point anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class EvalPoint:
    """A finite point ``w`` or a unit fraction ``1/c``.

    Infinity is the unit fraction with ``c == 0``.  The points +-1 are stored
    as unit fractions so that the most significant piece always carries
    coefficient 1 in their rows.
    """

    kind: str  # "finite" or "unit"
    value: int

    @staticmethod
    def finite(w: int) -> "EvalPoint":
        return EvalPoint("finite", w)

    @staticmethod
    def unit(c: int) -> "EvalPoint":
        return EvalPoint("unit", c)

    @staticmethod
    def parse(text) -> "EvalPoint":
        s = str(text).strip().replace("−", "-")
        if s in ("inf", "oo", "∞"):
            return EvalPoint.unit(0)
        if "/" in s:
            num, den = s.split("/")
            num, den = int(num), int(den)
            if abs(num) != 1:
                raise ValueError(f"not a unit fraction: {text}")
            return EvalPoint.unit(num * den)
        v = int(s)
        if v in (1, -1):
            return EvalPoint.unit(v)
        return EvalPoint.finite(v)

    def row(self, width: int) -> list[int]:
        if self.kind == "finite":
            return [self.value ** (width - 1 - j) for j in range(width)]
        return [self.value ** j for j in range(width)]

    def __str__(self) -> str:
        if self.kind == "finite":
            return str(self.value)
        c = self.value
        if c == 0:
            return "inf"
        if c in (1, -1):
            return str(c)
        return f"-1/{-c}" if c < 0 else f"1/{c}"

    __repr__ = __str__


def select_eval_points(q: int, mode: str = "double") -> list[EvalPoint]:
    """First ``q`` points of the order 0, inf, -1, 1, -1/2, 1/2, -2, 2, -1/4, ..."""
    if q < 1:
        raise ValueError("q must be positive")
    if mode not in ("double", "triple"):
        raise ValueError(f"unknown mode {mode!r}")
    pts = [EvalPoint.finite(0), EvalPoint.unit(0), EvalPoint.unit(-1), EvalPoint.unit(1)]
    w = 2
    while len(pts) < q:
        pts += [EvalPoint.unit(-w), EvalPoint.unit(w), EvalPoint.finite(-w), EvalPoint.finite(w)]
        w *= 2
    return pts[:q]


def eval_matrix(points: Sequence[EvalPoint], width: int) -> list[list[int]]:
    if len(set(points)) != len(points):
        raise ValueError("evaluation points must be distinct")
    return [p.row(width) for p in points]


def invert_exact(m: Sequence[Sequence]) -> list[list[Fraction]]:
    """Gauss-Jordan inverse over the rationals."""
    n = len(m)
    if any(len(r) != n for r in m):
        raise ValueError("matrix must be square")
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise SingularMatrixError("matrix is singular (duplicate evaluation points?)")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * u for v, u in zip(a[r], a[col])]
    return [row[n:] for row in a]


def _q_for(k: int, mode: str) -> int:
    if mode == "double":
        return 2 * k - 1
    if mode == "triple":
        return 3 * k - 2
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ToomPlan:
    n: int
    k: int
    mode: str
    points: tuple
    a_eval: tuple        # A', q x k, columns ordered most significant piece first
    a_inv: tuple         # (A'')^-1, q x q
    piece_widths: tuple  # little endian, low pieces first

    @property
    def q(self) -> int:
        return len(self.points)

    @property
    def w(self) -> int:
        return self.piece_widths[0]

    def coefficients(self, ell: int) -> list[int]:
        """Row ``ell`` of A' as little-endian piece coefficients."""
        return list(reversed(self.a_eval[ell]))

    def split(self, x: int, widths: Sequence[int] | None = None) -> list[int]:
        widths = self.piece_widths if widths is None else widths
        out, off = [], 0
        for i, wd in enumerate(widths):
            if i == len(widths) - 1:
                out.append(x >> off)
            else:
                out.append((x >> off) & ((1 << wd) - 1))
            off += wd
        return out


def piece_widths(n: int, k: int) -> list[int]:
    w = n // k
    return [w] * (k - 1) + [n - w * (k - 1)]


def make_plan(n: int, k: int, mode: str = "double", points: Sequence | None = None) -> ToomPlan:
    if k < 2 or n < k:
        raise ValueError("need k >= 2 and n >= k")
    q = _q_for(k, mode)
    if points is None:
        pts = select_eval_points(q, mode)
    else:
        pts = [p if isinstance(p, EvalPoint) else EvalPoint.parse(p) for p in points]
        if len(pts) != q:
            raise ValueError(f"{mode} mode with k={k} needs {q} points, got {len(pts)}")
    a1, inv = _matrices(tuple(pts), k)
    return ToomPlan(n, k, mode, tuple(pts), a1, inv, tuple(piece_widths(n, k)))


@lru_cache(maxsize=None)
def _matrices(pts: tuple, k: int):
    a1 = eval_matrix(pts, k)
    inv = invert_exact(eval_matrix(pts, len(pts)))
    return tuple(tuple(r) for r in a1), tuple(tuple(r) for r in inv)


@dataclass(frozen=True)
class PhiVector:
    entries: tuple
    base_angle: Fraction


def phi_coefficients(plan: ToomPlan, phi) -> PhiVector:
    """phi * e_b^T (A'')^-1 with b = 2^w."""
    phi = Fraction(phi)
    q, b = plan.q, 1 << plan.w
    e = [b ** (q - 1 - j) for j in range(q)]
    ent = tuple(phi * sum(e[j] * plan.a_inv[j][ell] for j in range(q)) for ell in range(q))
    return PhiVector(ent, phi)


def _evaluate(plan: ToomPlan, x: int) -> list[int]:
    pieces = plan.split(x)
    return [sum(c * p for c, p in zip(plan.coefficients(ell), pieces)) for ell in range(plan.q)]


def phase_sum_identity(plan: ToomPlan, phi, inputs: Sequence[int], phis: PhiVector | None = None) -> Fraction:
    need = 2 if plan.mode == "double" else 3
    if len(inputs) != need:
        raise ValueError(f"{plan.mode} mode takes {need} inputs")
    pv = phis if phis is not None else phi_coefficients(plan, phi)
    evals = [_evaluate(plan, v) for v in inputs]
    total = Fraction(0)
    for ell in range(plan.q):
        prod = 1
        for ev in evals:
            prod *= ev[ell]
        total += pv.entries[ell] * prod
    return total


def _interpolate(plan: ToomPlan, values: Sequence[int]) -> int:
    q, b = plan.q, 1 << plan.w
    coeffs = [sum(plan.a_inv[j][ell] * values[ell] for ell in range(q)) for j in range(q)]
    # coeffs are most-significant first
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * b + c
    if acc.denominator != 1:
        raise ArithmeticError("interpolation did not land on an integer")
    return int(acc)


def toom_multiply_oracle(x: int, y: int, plan: ToomPlan) -> int:
    ex, ey = _evaluate(plan, x), _evaluate(plan, y)
    if plan.mode == "double":
        return _interpolate(plan, [a * c for a, c in zip(ex, ey)])
    raise ValueError("double-mode plan required")


def toom_triple_oracle(x: int, y: int, z: int, plan: ToomPlan) -> int:
    if plan.mode != "triple":
        raise ValueError("triple-mode plan required")
    ex, ey, ez = _evaluate(plan, x), _evaluate(plan, y), _evaluate(plan, z)
    return _interpolate(plan, [a * c * d for a, c, d in zip(ex, ey, ez)])
