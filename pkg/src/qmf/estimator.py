"""Resource estimates for phase products and multipliers.

Estimates run the same generators as synthesis, through a counting builder
with per-node memoisation, so an estimate is by construction the census of
the circuit that would be compiled.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import compiler
from .arith import QftConfig, emit_qft_rev, phase_gradient_prepare
from .circuit import CountBuilder, summarize
from .compiler import CompileConfig, count_phase_product


@dataclass(frozen=True)
class MultiplierConfig:
    """One classical-quantum multiplication: QFT, phase product, inverse QFT."""

    compile: CompileConfig = CompileConfig()
    qft: QftConfig = QftConfig(variant="standard", eta=1e-12)
    modular: bool = True
    pad: int | None = None    # extra output bits for the modular variant; default log2(1/eta)

    def pad_bits(self) -> int:
        if not self.modular:
            return 0
        if self.pad is not None:
            return self.pad
        eta = self.qft.eta if self.qft.eta is not None else 1e-12
        return math.ceil(math.log2(1 / eta))


PRESETS = {
    "standard": MultiplierConfig(),
    "phase_gradient": MultiplierConfig(qft=QftConfig(variant="phase_gradient", eta=1e-12)),
}


@dataclass
class CostReport:
    n: int
    config: dict
    counts: dict
    ancillas: int
    total_qubits: int
    k_tree: list = field(default_factory=list)
    widths: tuple = ()

    def to_json(self) -> dict:
        return {"n": self.n, "widths": list(self.widths), "config": self.config, "counts": self.counts,
                "ancillas": self.ancillas, "total_qubits": self.total_qubits, "k_tree": self.k_tree}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _config_dict(cfg) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg), default=str))


def _counts(raw: Counter) -> dict:
    s = summarize(raw)
    s["measurements"] = raw.get("measure", 0)
    return s


def k_tree(widths: Sequence[int], cfg: CompileConfig, signed=None) -> list:
    """Per recursion level, how often each decision occurs among distinct nodes."""
    signs = tuple(signed) if signed is not None else (False,) * len(widths)
    level = {(tuple(widths), signs, False)}
    out = []
    while level:
        hist, nxt = Counter(), set()
        for w, s, forced in sorted(level):
            opt = ("base",) if forced else compiler.decide(w, s, cfg)
            if opt[0] == "base":
                hist["base"] += 1
            elif opt[0] in ("chunk", "peel"):
                hist[opt[0]] += 1
                i, sizes = compiler.chunk_sizes(w, opt)
                for j, sz in enumerate(sizes):
                    cw, cs = list(w), list(s)
                    cw[i] = sz
                    cs[i] = s[i] and j == len(sizes) - 1
                    nxt.add((tuple(cw), tuple(cs), False))
            else:
                hist[f"k={opt[1]}"] += 1
                for cw, cs in compiler._children(w, s, opt[1], cfg):
                    nxt.add((tuple(cw), tuple(cs), max(cw) >= max(w)))
        out.append(dict(sorted(hist.items())))
        level = nxt
    return out


def estimate_phase_product(n, cfg: CompileConfig = CompileConfig(), mode: str = "double") -> CostReport:
    """Cost of exp(i phi x z) (or x y z) on n-bit registers; ``n`` may be a width tuple."""
    widths = tuple(n) if isinstance(n, (tuple, list)) else ((n, n) if mode == "double" else (n, n, n))
    if min(widths) < 1:
        raise ValueError("widths must be positive")
    raw, hw = count_phase_product(widths, cfg)
    return CostReport(max(widths), _config_dict(cfg), _counts(raw), hw, sum(widths) + hw,
                      k_tree(widths, cfg), widths)


def _qft_counts(nw: int, mcfg: MultiplierConfig) -> tuple[Counter, int, int]:
    """(counts, ancilla high water, gradient qubits) for QFT and inverse QFT."""
    q = mcfg.qft
    b = CountBuilder()
    grad = None
    if q.variant == "phase_gradient":
        grad = b.alloc(q.grad_bits())
        phase_gradient_prepare(b, grad)
    lanes = list(range(nw))
    emit_qft_rev(b, lanes, q, mcfg.compile, grad=grad)
    emit_qft_rev(b, lanes, q, mcfg.compile, inverse=True, grad=grad)
    g = 0
    if grad is not None:
        b.free(grad)
        g = len(grad)
    return b.counts, b.high_water - g, g


def estimate_multiplier(n: int, cfg: MultiplierConfig = MultiplierConfig()) -> CostReport:
    """Classical-quantum multiplier on an n-bit input: QFT, phase product, inverse QFT.

    In the modular variant the output register has ``pad`` extra bits; those
    are counted as ancillas, together with the phase gradient register when
    it is used.
    """
    if n < 1:
        raise ValueError("n must be positive")
    pad = cfg.pad_bits()
    nw = n + pad
    pp, pp_hw = count_phase_product((n, nw), cfg.compile)
    qc, q_hw, g = _qft_counts(nw, cfg)
    raw = pp + qc
    anc = max(pp_hw, q_hw) + pad + g
    return CostReport(n, _config_dict(cfg), _counts(raw), anc, n + nw + max(pp_hw, q_hw) + g,
                      k_tree((n, nw), cfg.compile), (n, nw))


def phase_product_cost(n: int, cfg: CompileConfig, mode: str = "double") -> int:
    widths = (n, n) if mode == "double" else (n, n, n)
    raw, _ = count_phase_product(widths, cfg)
    return raw.get("CRphi", 0) + raw.get("CCRphi", 0)


def fit_scaling_exponent(cfg: CompileConfig, sizes: Sequence[int], mode: str = "double") -> float:
    """Least-squares slope of log(CRphi count) against log(n)."""
    sizes = sorted(set(int(s) for s in sizes))
    if len(sizes) < 4 or sizes[-1] < 4 * sizes[0]:
        raise ValueError("need at least 4 sizes spanning at least two octaves")
    ys = [phase_product_cost(n, cfg, mode) for n in sizes]
    slope, _ = np.polyfit(np.log(sizes), np.log(ys), 1)
    return float(slope)


def exponent_table(k_max: int = 11) -> dict:
    """k -> (log_k(2k-1), log_k(3k-2))."""
    return {k: (math.log(2 * k - 1, k), math.log(3 * k - 2, k)) for k in range(2, k_max + 1)}


def render_table(reports: dict) -> str:
    """Plain-text table, gate counts in millions."""
    head = f"{'Config':<22}{'Toffoli':>10}{'CRphi':>10}{'H,X,CNOT':>10}{'Ancillas':>10}"
    lines = [head, "-" * len(head)]
    for name, r in reports.items():
        c = r.counts
        lines.append(f"{name:<22}{c['toffoli'] / 1e6:>10.2f}{c['crphi'] / 1e6:>10.2f}"
                     f"{c['clifford'] / 1e6:>10.2f}{r.ancillas:>10d}")
    return "\n".join(lines) + "\n"
