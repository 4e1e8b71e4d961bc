"""Recursive lowering of PhaseProduct / PhaseTripleProduct to gates.

A phase product node applies exp(2 pi i * turns * x * z) (or x*y*z).  Each
node either emits schoolbook rotations (base case), splits an over-long
register into chunks, or applies one level of Toom-Cook: for every
evaluation point it forms the linear combination (A'x)_l in place on one
piece of each register, recurses with angle phi_l, and undoes the additions.

Two ways of dealing with combinations that outgrow the piece they overwrite:

* ``zero_ancilla``: the piece keeps the value modulo its width.  The bits
  that are lost (the outgoing carry of each addition plus the source bits
  that do not fit) are accounted for with extra rotations: the carry is
  used while the Cuccaro adder is paused half way, and the lost source bits
  are used directly.  The adder's incoming carry is a borrowed input bit.
* ``stored_ancilla``: the combination is formed exactly in the piece
  extended by a few clean ancillas (two's complement), so no correction
  rotations are needed.  Evaluation points +-w share the partial sums.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .circuit import Builder, Circuit, CircuitBuilder, CountBuilder
from .toom import EvalPoint, PhiVector, ToomPlan, make_plan, phi_coefficients


@dataclass(frozen=True)
class CompileConfig:
    k_policy: object = "auto"              # "auto", "base" (schoolbook only) or an int k
    n_base: int | None = None              # default: 8 double, 4 triple
    overflow_mode: str = "zero_ancilla"    # zero_ancilla | stored_ancilla
    base_mode: str = "schoolbook"          # schoolbook | semi_digital (triple only)
    angle_mode: str = "exact_rotation"
    k_max: int = 11
    cost_weights: tuple = (("CRphi", 1), ("CCRphi", 1))

    def __post_init__(self):
        if self.k_policy not in ("auto", "base") and not (isinstance(self.k_policy, int) and self.k_policy >= 2):
            raise ValueError("k_policy must be 'auto', 'base' or an integer >= 2")
        if self.n_base is not None and self.n_base < 2:
            raise ValueError("n_base must be at least 2")
        if self.overflow_mode not in ("zero_ancilla", "stored_ancilla"):
            raise ValueError(f"unknown overflow mode {self.overflow_mode!r}")
        if self.base_mode not in ("schoolbook", "semi_digital"):
            raise ValueError(f"unknown base mode {self.base_mode!r}")
        if self.angle_mode != "exact_rotation":
            raise ValueError("phase products support exact rotations only; "
                             "phase gradients are available for QFTs")

    def base(self, mode: str) -> int:
        if self.n_base is not None:
            return self.n_base
        return 8 if mode == "double" else 4

    def overflow(self, mode: str) -> str:
        # the zero-ancilla lowering is only defined for two registers
        return "stored_ancilla" if mode == "triple" else self.overflow_mode

    def fingerprint(self) -> tuple:
        return (self.k_policy, self.n_base, self.overflow_mode, self.base_mode,
                self.angle_mode, self.k_max, self.cost_weights)

    def cost(self, counts: Counter, high_water: int = 0) -> int:
        """Weighted gate count; the pseudo-kind "ancilla" weights the high water."""
        return sum(w * (high_water if k == "ancilla" else counts.get(k, 0)) for k, w in self.cost_weights)


# --- adder schedules ------------------------------------------------------

@dataclass(frozen=True)
class AddStep:
    src: int
    dst: int
    coeff: int        # dst += coeff * src, coeff = +-2^e

    @property
    def sign(self) -> int:
        return 1 if self.coeff > 0 else -1

    @property
    def shift(self) -> int:
        return abs(self.coeff).bit_length() - 1


@dataclass(frozen=True)
class PointGroup:
    """How the linear combinations for one point (or a +-w pair) are formed.

    ``kind``: ``piece`` (a single piece, no additions), ``single`` or
    ``pair``.  ``steps`` lists ("add", AddStep) and ("product", ell) in
    order; the uncompute tail is included.
    """

    kind: str
    points: tuple
    target: int
    aux: int | None
    steps: tuple
    scales: tuple     # per point: sign of the normalised row

    def additions(self) -> int:
        return sum(1 for s in self.steps if s[0] == "add")


@dataclass(frozen=True)
class AdderSchedule:
    groups: tuple
    pairing: bool

    def steps(self):
        for g in self.groups:
            yield from g.steps


def _pow2_exp(c: int) -> int:
    a = abs(c)
    if a & (a - 1):
        raise ValueError(f"coefficient {c} is not a power of two")
    return a.bit_length() - 1


def _target_piece(coef: Sequence[int]) -> int:
    k = len(coef)
    if abs(coef[k - 1]) == 1:
        return k - 1
    if abs(coef[0]) == 1:
        return 0
    raise ValueError("no piece with unit coefficient")


def _pairs(points: Sequence[EvalPoint]) -> list[tuple]:
    """Group point indices: (ell,) or (ell_minus, ell_plus) for +-w pairs."""
    idx = {(p.kind, p.value): i for i, p in enumerate(points)}
    used, out = set(), []
    for i, p in enumerate(points):
        if i in used:
            continue
        j = idx.get((p.kind, -p.value)) if p.value != 0 else None
        if j is None or j in used:
            out.append((i,))
            used.add(i)
        else:
            out.append((i, j) if p.value < 0 else (j, i))
            used.update((i, j))
    return out


def schedule_linear_combinations(plan: ToomPlan, pairing: bool = True) -> AdderSchedule:
    k = plan.k
    groups = []
    for grp in (_pairs(plan.points) if pairing else [(i,) for i in range(plan.q)]):
        if len(grp) == 1:
            ell = grp[0]
            coef = plan.coefficients(ell)
            nz = [i for i, c in enumerate(coef) if c]
            if len(nz) == 1:
                i = nz[0]
                groups.append(PointGroup("piece", grp, i, None, (("product", ell),), (coef[i],)))
                continue
            t = _target_piece(coef)
            s = coef[t]
            adds = [AddStep(i, t, s * c) for i, c in enumerate(coef) if c and i != t]
            for a in adds:
                _pow2_exp(a.coeff)
            steps = [("add", a) for a in adds] + [("product", ell)] + \
                    [("add", AddStep(a.src, a.dst, -a.coeff)) for a in reversed(adds)]
            groups.append(PointGroup("single", grp, t, None, tuple(steps), (s,)))
            continue
        lm, lp = grp
        cm, cp = plan.coefficients(lm), plan.coefficients(lp)
        t = _target_piece(cp)
        sm, sp = cm[t], cp[t]
        rm = [sm * c for c in cm]
        rp = [sp * c for c in cp]
        even = [Fraction(a + b, 2) for a, b in zip(rp, rm)]
        odd = [Fraction(a - b, 2) for a, b in zip(rp, rm)]
        if any(e.denominator != 1 for e in even) or any(e and o for e, o in zip(even, odd)):
            raise ValueError("points do not split into even and odd parts")
        even = [int(e) for e in even]
        odd = [int(o) for o in odd]
        if not any(odd):
            raise ValueError("degenerate pair")
        emin = min(_pow2_exp(o) for o in odd if o)
        p = min(i for i, o in enumerate(odd) if o and _pow2_exp(o) == emin)
        sgn_p = 1 if odd[p] > 0 else -1
        p_adds = [AddStep(i, p, sgn_p * o // (1 << emin)) for i, o in enumerate(odd) if o and i != p]
        e_adds = [AddStep(i, t, e) for i, e in enumerate(even) if e and i != t]
        unit = sgn_p * (1 << emin)
        steps = [("add", a) for a in p_adds] + [("add", a) for a in e_adds]
        steps += [("add", AddStep(p, t, -unit)), ("product", lm),
                  ("add", AddStep(p, t, 2 * unit)), ("product", lp),
                  ("add", AddStep(p, t, -unit))]
        steps += [("add", AddStep(a.src, a.dst, -a.coeff)) for a in reversed(e_adds)]
        steps += [("add", AddStep(a.src, a.dst, -a.coeff)) for a in reversed(p_adds)]
        groups.append(PointGroup("pair", grp, t, p, tuple(steps), (sm, sp)))
    return AdderSchedule(tuple(groups), pairing)


def symbolic_check(plan: ToomPlan, sched: AdderSchedule) -> bool:
    """Execute a schedule on symbolic pieces; True when every product sees a
    multiple of its evaluation row and all pieces are restored."""
    k = plan.k
    regs = [[int(i == j) for j in range(k)] for i in range(k)]
    seen = []
    for g in sched.groups:
        for kind, arg in g.steps:
            if kind == "add":
                regs[arg.dst] = [a + arg.coeff * b for a, b in zip(regs[arg.dst], regs[arg.src])]
            else:
                row = plan.coefficients(arg)
                val = regs[g.target] if g.kind != "piece" else [int(i == g.target) for i in range(k)]
                ratio = {Fraction(v, r) for v, r in zip(val, row) if r}
                if len(ratio) != 1 or any(v and not r for v, r in zip(val, row)):
                    return False
                seen.append(arg)
    return sorted(seen) == list(range(plan.q)) and regs == [[int(i == j) for j in range(k)] for i in range(k)]


# --- recursion IR (for inspection) -----------------------------------------

@dataclass(frozen=True)
class OverflowDirective:
    target: int
    carry: str                      # direct_rotation | stored_bit
    source: int
    compensation: tuple = ()        # (source bit index, coefficient) of lost bits


@dataclass
class PhaseNode:
    variant: str                    # base | chunk | recurse
    widths: tuple
    signed: tuple
    k: int | None = None
    plan: ToomPlan | None = None
    phi: PhiVector | None = None
    schedule: AdderSchedule | None = None
    overflow: tuple = ()
    children: list = field(default_factory=list)


# --- plans and decisions ---------------------------------------------------

@lru_cache(maxsize=None)
def _plan(n: int, k: int, mode: str) -> ToomPlan:
    return make_plan(n, k, mode)


@lru_cache(maxsize=None)
def _sched(n: int, k: int, mode: str, pairing: bool) -> AdderSchedule:
    return schedule_linear_combinations(_plan(n, k, mode), pairing)


_DECISIONS: dict = {}
_COUNT_MEMO: dict = defaultdict(dict)


def clear_memo():
    _DECISIONS.clear()
    _COUNT_MEMO.clear()


def _mode(widths) -> str:
    return "double" if len(widths) == 2 else "triple"


def _chunking(widths) -> list | None:
    lo, hi = min(widths), max(widths)
    if hi < 2 * lo:
        return None
    i = widths.index(hi)
    c = -(-hi // lo)
    base, extra = divmod(hi, c)
    sizes = [base + (1 if j < extra else 0) for j in range(c)]
    return [i, sizes]


def chunk_sizes(widths, opt) -> tuple[int, list]:
    """(register index, chunk widths) for a "chunk" or "peel" option."""
    if opt[0] == "chunk":
        return tuple(_chunking(widths))
    i = widths.index(max(widths))
    lo = min(widths)
    return i, [lo, widths[i] - lo]


def _split_n(widths, k, cfg) -> int:
    """Width whose k-way split sets the piece size.

    The wider register is used when the narrower one still keeps a nonempty
    top piece; otherwise the excess of the wider register would pile up in
    its top piece, and in every level below.
    """
    lo, hi = min(widths), max(widths)
    if cfg.overflow(_mode(widths)) == "stored_ancilla" and lo - (k - 1) * (hi // k) >= 1:
        return hi
    return lo


def _valid_k(widths, k, mode) -> bool:
    return min(widths) // k >= 1


def _options(widths, signs, cfg: CompileConfig):
    mode = _mode(widths)
    if cfg.k_policy == "base" or max(widths) <= cfg.base(mode):
        return [("base",)]
    ch = _chunking(widths)
    if ch is not None:
        return [("chunk",)]
    if cfg.k_policy != "auto":
        k = cfg.k_policy
        if _valid_k(widths, k, mode):
            return [("split", k)]
        return [("base",)]
    opts = [("base",)]
    if min(widths) != max(widths):
        opts.append(("peel",))
    for k in range(2, cfg.k_max + 1):
        if _valid_k(widths, k, mode):
            opts.append(("split", k))
    return opts


def decide(widths: tuple, signs: tuple, cfg: CompileConfig):
    key = (cfg.fingerprint(), widths, signs)
    hit = _DECISIONS.get(key)
    if hit is not None:
        return hit
    opts = _options(widths, signs, cfg)
    if len(opts) == 1:
        best = opts[0]
    else:
        memo = _COUNT_MEMO[cfg.fingerprint()]
        best, best_cost = None, None
        for opt in opts:
            cb = CountBuilder(memo)
            _emit_option(cb, opt, [(None, w, s) for w, s in zip(widths, signs)], Fraction(0), cfg)
            cost = cfg.cost(cb.counts, cb.high_water)
            if best_cost is None or cost < best_cost:
                best, best_cost = opt, cost
    _DECISIONS[key] = best
    return best


# --- range bookkeeping -----------------------------------------------------

def _piece_widths(n: int, w: int, k: int) -> list[int]:
    return [w] * (k - 1) + [n - w * (k - 1)]


def _range(width: int, signed: bool) -> tuple[int, int]:
    if signed:
        return -(1 << (width - 1)), (1 << (width - 1)) - 1
    return 0, (1 << width) - 1


def _width_for(lo: int, hi: int) -> tuple[int, bool]:
    if lo >= 0:
        return max(hi.bit_length(), 1), False
    w = 1
    while not (-(1 << (w - 1)) <= lo and hi <= (1 << (w - 1)) - 1):
        w += 1
    return w, True


def _combo_range(coeffs: Sequence[int], ranges) -> tuple[int, int]:
    lo = hi = 0
    for c, (a, b) in zip(coeffs, ranges):
        if c > 0:
            lo += c * a
            hi += c * b
        elif c < 0:
            lo += c * b
            hi += c * a
    return lo, hi


def _reg_layout(width: int, signed: bool, w: int, k: int):
    pw = _piece_widths(width, w, k)
    psign = [False] * (k - 1) + [signed]
    ranges = [_range(a, s) for a, s in zip(pw, psign)]
    return pw, psign, ranges


def _children(widths, signs, k, cfg):
    """(widths, signs) of the child nodes of a Toom split, in point order."""
    mode = _mode(widths)
    n = _split_n(widths, k, cfg)
    plan = _plan(n, k, mode)
    layouts = [_reg_layout(wd, sg, plan.w, k) for wd, sg in zip(widths, signs)]
    stored = cfg.overflow(mode) == "stored_ancilla"
    out = []
    for ell in range(plan.q):
        coef = plan.coefficients(ell)
        nzi = [i for i, c in enumerate(coef) if c]
        cw, cs = [], []
        for pw, psign, ranges in layouts:
            if len(nzi) == 1:
                cw.append(pw[nzi[0]])
                cs.append(psign[nzi[0]])
            elif stored:
                t = _target_piece(coef)
                lo, hi = _combo_range([c * coef[t] for c in coef], ranges)
                a, b = _width_for(lo, hi)
                cw.append(a)
                cs.append(b)
            else:
                t = _target_piece(coef)
                cw.append(pw[t])
                cs.append(False)
        out.append((tuple(cw), tuple(cs)))
    return out


# --- emission --------------------------------------------------------------

def emit_phase_product(b: Builder, x: Sequence[int], z: Sequence[int], turns, cfg: CompileConfig,
                       x_signed: bool = False, z_signed: bool = False):
    """exp(2 pi i turns x z) on registers x, z (little endian)."""
    _node(b, [(list(x), len(x), x_signed), (list(z), len(z), z_signed)], Fraction(turns), cfg)


def emit_phase_triple(b: Builder, x, y, z, turns, cfg: CompileConfig, signed=(False, False, False)):
    regs = [(list(r), len(r), s) for r, s in zip((x, y, z), signed)]
    _node(b, regs, Fraction(turns), cfg)


def _node(b: Builder, regs, turns: Fraction, cfg: CompileConfig, force_base: bool = False):
    """regs: list of (qubits, width, signed).

    ``force_base`` is set for children that are not narrower than their
    parent, which guarantees that the recursion terminates.
    """
    if any(w == 0 for _, w, _ in regs):
        return
    widths = tuple(w for _, w, _ in regs)
    signs = tuple(s for _, _, s in regs)
    key = ("node", cfg.fingerprint(), widths, signs, force_base)

    def body(bb):
        opt = ("base",) if force_base else decide(widths, signs, cfg)
        _emit_option(bb, opt, regs, turns, cfg)

    if b.counting:
        b.call(key, body)
    else:
        body(b)


def _emit_option(b, opt, regs, turns, cfg):
    if opt[0] == "base":
        mode = _mode(regs)
        if mode == "triple" and cfg.base_mode == "semi_digital":
            emit_base_semidigital(b, regs, turns)
        else:
            emit_base_schoolbook(b, regs, turns)
    elif opt[0] in ("chunk", "peel"):
        _emit_chunks(b, regs, turns, cfg, opt)
    elif cfg.overflow(_mode(regs)) == "zero_ancilla":
        _emit_split_zero(b, regs, turns, opt[1], cfg)
    else:
        _emit_split_stored(b, regs, turns, opt[1], cfg)


def _bit_weights(width: int, signed: bool) -> list[int]:
    w = [1 << j for j in range(width)]
    if signed:
        w[-1] = -w[-1]
    return w


def emit_base_schoolbook(b: Builder, regs, turns):
    """One rotation per bit pair (or triple) with angle turns * 2^(i+j[+l])."""
    if b.counting:
        n = 1
        for _, w, _ in regs:
            n *= w
        b.bulk("CRphi" if len(regs) == 2 else "CCRphi", n)
        return
    ws = [_bit_weights(w, s) for _, w, s in regs]
    if len(regs) == 2:
        (x, _, _), (z, _, _) = regs
        for i, xi in enumerate(x):
            for j, zj in enumerate(z):
                b.phase((xi, zj), turns * ws[0][i] * ws[1][j])
    else:
        (x, _, _), (y, _, _), (z, _, _) = regs
        for i, xi in enumerate(x):
            for j, yj in enumerate(y):
                for l, zl in enumerate(z):
                    b.phase((xi, yj, zl), turns * ws[0][i] * ws[1][j] * ws[2][l])


def emit_base_semidigital(b: Builder, regs, turns):
    """Triple base case: P = x*y into scratch, rotations P x z, uncompute P."""
    from .arith import add_register

    (x, nx, sx), (y, ny, sy), (z, nz, sz) = regs
    np_ = nx + ny
    ps = sx or sy
    P = b.alloc(np_)

    def multiply(bb):
        S = bb.alloc(ny)
        wx = _bit_weights(nx, sx)
        for i in range(nx):
            if bb.counting:
                bb.bulk("Toffoli", 2 * ny)
            else:
                for j in range(ny):
                    bb.toffoli(x[i], y[j], S[j])
            add_register(bb, S, P[i:], subtract=wx[i] < 0, src_signed=sy)
            if not bb.counting:
                for j in range(ny):
                    bb.toffoli(x[i], y[j], S[j])
        bb.free(S)

    from .arith import inverse_of
    multiply(b)
    if b.counting:
        b.bulk("CRphi", np_ * nz)
    else:
        wp = _bit_weights(np_, ps)
        wz = _bit_weights(nz, sz)
        for i in range(np_):
            for l in range(nz):
                b.phase((P[i], z[l]), turns * wp[i] * wz[l])
    inverse_of(b, multiply)
    b.free(P)


def _emit_chunks(b, regs, turns, cfg, opt=("chunk",)):
    widths = tuple(w for _, w, _ in regs)
    i, sizes = chunk_sizes(widths, opt)
    q, _, s = regs[i]
    off = 0
    for j, sz in enumerate(sizes):
        sub = list(regs)
        qs = None if q is None else q[off:off + sz]
        sub[i] = (qs, sz, s and j == len(sizes) - 1)
        _node(b, sub, turns * (1 << off), cfg)
        off += sz


def _split_regs(regs, w, k):
    out = []
    for q, width, signed in regs:
        pw, psign, ranges = _reg_layout(width, signed, w, k)
        pieces, off = [], 0
        for a in pw:
            pieces.append(None if q is None else q[off:off + a])
            off += a
        out.append((pieces, pw, psign, ranges))
    return out


def _fake_pieces(all_widths):
    """Distinct placeholder qubit ids for counting mode."""
    out, nxt = [], 0
    for pw in all_widths:
        pieces = []
        for a in pw:
            pieces.append(list(range(nxt, nxt + a)))
            nxt += a
        out.append(pieces)
    return out


# zero-ancilla lowering ------------------------------------------------------

def lower_overflow(b: Builder, src: Sequence[int], tgt: Sequence[int], step: AddStep,
                   on_carry, lost: dict):
    """Add ``step.coeff * src`` into ``tgt`` modulo 2^len(tgt) without ancillas.

    The addition uses ``src[L]`` (a bit the adder does not otherwise touch) as
    the Cuccaro incoming carry, so the adder computes t + 2^e (A + d) with A
    the low L source bits.  ``on_carry(qubit, weight)`` is invoked while the
    adder is paused with the outgoing carry (or borrow) on ``qubit``; its
    weight is the signed value the register lost through it.  The source bits
    not covered by the adder, and the double-counted carry-in bit, are
    accumulated into ``lost`` as {qubit: weight}.
    """
    from .arith import cuccaro_add

    s, e = step.sign, step.shift
    ws, wt = len(src), len(tgt)
    L = min(ws - 1, wt - e)
    if L >= 1:
        d = src[L]
        cuccaro_add(b, src[:L], tgt[e:e + L], d, subtract=s < 0,
                    pause=None if on_carry is None else (lambda q: on_carry(q, s * (1 << (e + L)))))
        for j in range(L, ws):
            lost[src[j]] = lost.get(src[j], 0) + s * (1 << (e + j))
        lost[d] = lost.get(d, 0) - s * (1 << e)
    else:
        for j in range(ws):
            lost[src[j]] = lost.get(src[j], 0) + s * (1 << (e + j))


def _uncompute_add(b, src, tgt, step: AddStep):
    from .arith import cuccaro_add

    s, e = step.sign, step.shift
    L = min(len(src) - 1, len(tgt) - e)
    if L >= 1:
        cuccaro_add(b, src[:L], tgt[e:e + L], src[L], subtract=s > 0)


def _rotate_against(b, ctrl, weight, turns, coeffs):
    """exp(2 pi i turns weight ctrl * sum coeff_q q) as CRphi gates."""
    if b.counting:
        b.bulk("CRphi", len(coeffs))
        return
    for q, c in coeffs:
        b.phase((ctrl, q), turns * weight * c)


def _emit_split_zero(b, regs, turns, k, cfg):
    widths = tuple(w for _, w, _ in regs)
    n = _split_n(widths, k, cfg)
    plan = _plan(n, k, "double")
    sched = _sched(n, k, "double", False)
    phis = phi_coefficients(plan, turns).entries if not b.counting else [Fraction(0)] * plan.q
    (xp, xw, _, _), (zp, zw, _, _) = _split_regs(regs, plan.w, k)
    if b.counting:
        xp, zp = _fake_pieces([xw, zw])
    for g in sched.groups:
        ell = g.points[0]
        if g.kind == "piece":
            c = g.scales[0]
            _node(b, [(xp[g.target], xw[g.target], False), (zp[g.target], zw[g.target], False)],
                  phis[ell] * c * c, cfg)
            continue
        adds = [a for kind, a in g.steps if kind == "add"][: len(g.steps) // 2]
        _zero_point(b, xp, zp, g.target, adds, phis[ell], cfg)


def _meant_coeffs(pieces, t, adds):
    coeffs = {}
    for j, q in enumerate(pieces[t]):
        coeffs[q] = 1 << j
    for a in adds:
        for j, q in enumerate(pieces[a.src]):
            coeffs[q] = coeffs.get(q, 0) + a.coeff * (1 << j)
    return list(coeffs.items())


def _zero_point(b, xp, zp, t, adds, phi, cfg):
    counting = b.counting
    zmeant = _meant_coeffs(zp, t, adds)
    Tx, Tz = xp[t], zp[t]
    tx_coeffs = [(q, 1 << j) for j, q in enumerate(Tx)]
    # x side: carries and lost bits rotate against the intended z combination
    xlost: dict = {}
    for a in adds:
        lower_overflow(b, xp[a.src], Tx, a,
                       lambda q, wt: _rotate_against(b, q, wt, phi, zmeant), xlost)
    for q, wt in xlost.items():
        if wt:
            _rotate_against(b, q, wt, phi, zmeant)
    # z side: against what the x piece actually holds now
    zlost: dict = {}
    for a in adds:
        lower_overflow(b, zp[a.src], Tz, a,
                       lambda q, wt: _rotate_against(b, q, wt, phi, tx_coeffs), zlost)
    for q, wt in zlost.items():
        if wt:
            _rotate_against(b, q, wt, phi, tx_coeffs)
    _node(b, [(Tx, len(Tx), False), (Tz, len(Tz), False)], phi, cfg)
    for a in reversed(adds):
        _uncompute_add(b, zp[a.src], Tz, a)
    for a in reversed(adds):
        _uncompute_add(b, xp[a.src], Tx, a)


# stored-ancilla lowering ----------------------------------------------------

def _emit_split_stored(b, regs, turns, k, cfg):
    from .arith import add_register

    widths = tuple(w for _, w, _ in regs)
    mode = _mode(regs)
    R = len(regs)
    n = _split_n(widths, k, cfg)
    plan = _plan(n, k, mode)
    sched = _sched(n, k, mode, True)
    phis = phi_coefficients(plan, turns).entries if not b.counting else [Fraction(0)] * plan.q
    split = _split_regs(regs, plan.w, k)
    if b.counting:
        fakes = _fake_pieces([pw for _, pw, _, _ in split])
        split = [(f, pw, psign, ranges) for f, (_, pw, psign, ranges) in zip(fakes, split)]

    for g in sched.groups:
        if g.kind == "piece":
            ell = g.points[0]
            c = g.scales[0]
            sub = [(pieces[g.target], pw[g.target], psign[g.target]) for pieces, pw, psign, _ in split]
            _node(b, sub, phis[ell] * c ** R, cfg, max(w for _, w, _ in sub) >= max(widths))
            continue
        # per register: an extended copy of the target piece (and of the aux piece for pairs)
        slots = []
        for pieces, pw, psign, ranges in split:
            slots.append(_Slots(b, pieces, pw, psign, ranges, g))
        for kind, arg in g.steps:
            if kind == "product":
                ell = arg
                pos = g.points.index(ell)
                c = g.scales[pos]
                sub = [sl.child(ell, plan) for sl in slots]
                _node(b, sub, phis[ell] * c ** R, cfg, max(w for _, w, _ in sub) >= max(widths))
            else:
                for sl in slots:
                    sl.add(arg)
        for sl in slots:
            sl.release()


class _Slots:
    """Exact two's-complement working registers for one point group."""

    def __init__(self, b, pieces, pw, psign, ranges, g: PointGroup):
        self.b, self.pieces, self.pw, self.psign, self.ranges, self.g = b, pieces, pw, psign, ranges, g
        k = len(pw)
        # symbolic content of every piece slot, to derive exact ranges
        self.sym = {i: [int(i == j) for j in range(k)] for i in range(k)}
        self.ext = {}
        self.width = {}
        self.signed = {}
        for slot in [g.target] + ([g.aux] if g.aux is not None else []):
            self._extend(slot)

    def _slot_values(self, slot):
        """Combinations held by ``slot`` whenever a product is taken."""
        k = len(self.pw)
        sym = {i: [int(i == j) for j in range(k)] for i in range(k)}
        seen = []
        for kind, arg in self.g.steps:
            if kind == "add":
                sym[arg.dst] = [a + arg.coeff * c for a, c in zip(sym[arg.dst], sym[arg.src])]
            else:
                seen.append(list(sym[slot]))
        return seen

    def _extend(self, slot):
        lo = hi = 0
        first = True
        for combo in self._slot_values(slot):
            a, c = _combo_range(combo, self.ranges)
            lo, hi = (a, c) if first else (min(lo, a), max(hi, c))
            first = False
        W, signed = _width_for(lo, hi)
        W = max(W, self.pw[slot])
        base = list(self.pieces[slot])
        extra = self.b.alloc(W - len(base)) if W > len(base) else []
        if self.psign[slot]:
            if self.b.counting:
                self.b.bulk("CNOT", len(extra))
            else:
                for q in extra:
                    self.b.cnot(base[-1], q)
        self.ext[slot] = (base, extra)
        self.width[slot] = W
        self.signed[slot] = signed or self.psign[slot]

    def reg(self, slot):
        base, extra = self.ext[slot]
        return base + extra

    def add(self, a: AddStep):
        from .arith import add_register

        b = self.b
        dst = self.reg(a.dst)
        if a.src in self.ext:
            src, s_signed = self.reg(a.src), self.signed[a.src]
        else:
            src, s_signed = self.pieces[a.src], self.psign[a.src]
        e = a.shift
        if e < len(dst):
            add_register(b, src, dst[e:], subtract=a.coeff < 0, src_signed=s_signed)
        self.sym[a.dst] = [x + a.coeff * c for x, c in zip(self.sym[a.dst], self.sym[a.src])]

    def child(self, ell, plan):
        combo = self.sym[self.g.target]
        lo, hi = _combo_range(combo, self.ranges)
        W, signed = _width_for(lo, hi)
        return (self.reg(self.g.target)[:W], W, signed)

    def release(self):
        b = self.b
        for slot in reversed(list(self.ext)):
            base, extra = self.ext[slot]
            if self.psign[slot]:
                if b.counting:
                    b.bulk("CNOT", len(extra))
                else:
                    for q in extra:
                        b.cnot(base[-1], q)
            if extra:
                b.free(extra)


# --- public entry points ---------------------------------------------------

def compile_phase_product(width_x: int, width_z: int, phi, cfg: CompileConfig = CompileConfig(),
                          angle_in_turns: bool = False) -> Circuit:
    """Circuit for exp(i phi x z); ``phi`` in radians unless ``angle_in_turns``.

    Radian angles are converted to the nearest rational multiple of 2 pi with
    a 2^-60 grid; pass a Fraction with ``angle_in_turns=True`` for exactness.
    """
    if width_x < 1 or width_z < 1:
        raise ValueError("register widths must be at least 1")
    turns = _as_turns(phi, angle_in_turns)
    cb = CircuitBuilder()
    x = cb.register("x", width_x)
    z = cb.register("z", width_z)
    emit_phase_product(cb, x, z, turns, cfg)
    return cb.build()


def compile_phase_triple(width_x: int, width_y: int, width_z: int, phi, cfg: CompileConfig = CompileConfig(),
                         angle_in_turns: bool = False) -> Circuit:
    if min(width_x, width_y, width_z) < 1:
        raise ValueError("register widths must be at least 1")
    turns = _as_turns(phi, angle_in_turns)
    cb = CircuitBuilder()
    x = cb.register("x", width_x)
    y = cb.register("y", width_y)
    z = cb.register("z", width_z)
    emit_phase_triple(cb, x, y, z, turns, cfg)
    return cb.build()


def _as_turns(phi, in_turns: bool) -> Fraction:
    if in_turns:
        return Fraction(phi)
    if isinstance(phi, Fraction):
        raise TypeError("pass angle_in_turns=True for exact Fraction angles")
    return Fraction(round(phi / (2 * math.pi) * (1 << 60)), 1 << 60)


def count_phase_product(widths: Sequence[int], cfg: CompileConfig, signed: Sequence[bool] | None = None):
    """(counts, ancilla high water) without building the circuit."""
    signed = tuple(signed) if signed is not None else (False,) * len(widths)
    cb = CountBuilder(_COUNT_MEMO[cfg.fingerprint()])
    _node(cb, [(None, w, s) for w, s in zip(widths, signed)], Fraction(0), cfg)
    return cb.counts, cb.high_water


def build_tree(widths: Sequence[int], cfg: CompileConfig, signed=None, depth: int = 64,
               force_base: bool = False) -> PhaseNode:
    """Recursion tree of decisions (structure only, no gates)."""
    widths = tuple(widths)
    signs = tuple(signed) if signed is not None else (False,) * len(widths)
    opt = ("base",) if force_base else decide(widths, signs, cfg)
    mode = _mode(widths)
    if opt[0] == "base" or depth == 0:
        return PhaseNode("base", widths, signs)
    if opt[0] in ("chunk", "peel"):
        i, sizes = chunk_sizes(widths, opt)
        node = PhaseNode(opt[0], widths, signs)
        for j, sz in enumerate(sizes):
            cw = list(widths)
            cs = list(signs)
            cw[i] = sz
            cs[i] = signs[i] and j == len(sizes) - 1
            node.children.append(build_tree(cw, cfg, cs, depth - 1))
        return node
    k = opt[1]
    plan = _plan(_split_n(widths, k, cfg), k, mode)
    zero = cfg.overflow(mode) == "zero_ancilla"
    sched = _sched(_split_n(widths, k, cfg), k, mode, not zero)
    overflow = []
    for g in sched.groups:
        for kind, a in g.steps[: max(1, len(g.steps) // 2)]:
            if kind == "add":
                overflow.append(OverflowDirective(a.dst, "direct_rotation" if zero else "stored_bit", a.src))
    node = PhaseNode("recurse", widths, signs, k, plan, phi_coefficients(plan, 1), sched, tuple(overflow))
    for cw, cs in _children(widths, signs, k, cfg):
        node.children.append(build_tree(cw, cfg, cs, depth - 1, max(cw) >= max(widths)))
    return node
