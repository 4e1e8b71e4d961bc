"""Command-line entry point: ``qmf <command> ...``.

Every command writes JSON (or a rendered text view with ``--format text``)
and exits with status 1 when a verification fails.  Integer flags accept
the suffixes k (x1024) and M (x2^20), so ``--n 2k`` is ``--n 2048``.
The environment variable QMF_SEED, when set, overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

from . import estimator
from .arith import QftConfig, inplace_mod_mul, qft_circuit, u_cq, u_cq_mod, u_qq
from .circuit import Circuit, summarize
from .compiler import CompileConfig, compile_phase_product, compile_phase_triple
from .depth_sequences import NAMES, compare_table, load_sequence, verify_sequence
from .simulator import DEFAULT_QUBIT_LIMIT, QubitLimitError, simulate_mod_mul, unitary, verify_against

SPECS = ("phase-product", "multiplier", "mod-multiplier", "qft")
_SUFFIX = {"k": 1 << 10, "K": 1 << 10, "m": 1 << 20, "M": 1 << 20}


class CliError(Exception):
    pass


def parse_int(text: str) -> int:
    """'2048', '2k', '0x800' -> 2048."""
    t = str(text).strip()
    try:
        if t and t[-1] in _SUFFIX:
            return int(t[:-1], 0) * _SUFFIX[t[-1]]
        return int(t, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def parse_ints(text: str) -> list[int]:
    return [parse_int(s) for s in str(text).split(",") if s.strip()]


def parse_turns(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def parse_k(text: str):
    if text in ("auto", "base"):
        return text
    k = parse_int(text)
    if k < 2:
        raise argparse.ArgumentTypeError("k must be 'auto', 'base' or an integer >= 2")
    return k


@dataclass(frozen=True)
class RunConfig:
    command: str
    compile: CompileConfig
    qft: QftConfig
    seed: int
    out: str | None
    fmt: str


def _seed(args) -> int:
    env = os.environ.get("QMF_SEED")
    if env is not None and env.strip():
        return parse_int(env)
    return args.seed


def _compile_cfg(args) -> CompileConfig:
    try:
        return CompileConfig(k_policy=args.k, n_base=args.n_base, overflow_mode=args.overflow,
                             base_mode=args.base, k_max=args.k_max)
    except ValueError as e:
        raise CliError(str(e)) from None


def _qft_cfg(args, default_eta=None) -> QftConfig:
    eta = args.eta if args.eta is not None else default_eta
    try:
        return QftConfig(variant=args.qft, eta=eta, gradient_bits=args.grad_bits)
    except ValueError as e:
        raise CliError(str(e)) from None


def _run_config(args, default_eta=None) -> RunConfig:
    return RunConfig(args.command, _compile_cfg(args), _qft_cfg(args, default_eta), _seed(args),
                     args.out, args.format)


def _emit(rc: RunConfig, payload, text: str | None = None):
    body = text if (rc.fmt == "text" and text is not None) else json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if rc.out:
        with open(rc.out, "w") as f:
            f.write(body)
    else:
        sys.stdout.write(body)


def _bits(basis: int, qubits) -> int:
    return sum(((basis >> q) & 1) << i for i, q in enumerate(qubits))


def _put(basis: int, qubits, value: int) -> int:
    for i, q in enumerate(qubits):
        basis = (basis & ~(1 << q)) | (((value >> i) & 1) << q)
    return basis


# --- synth ---------------------------------------------------------------

def cmd_synth(args) -> int:
    rc = _run_config(args)
    rng = random.Random(rc.seed)
    widths = args.widths or []
    meta = {"mode": args.mode, "seed": rc.seed}
    if args.mode in ("cq", "qq"):
        nreg = 2 if args.mode == "cq" else 3
        if not widths:
            if args.n is None:
                raise CliError("give --n or --widths")
            widths = [args.n] * nreg
        if len(widths) != nreg:
            raise CliError(f"mode {args.mode} takes {nreg} widths")
        if args.mode == "cq" and rc.compile.base_mode == "semi_digital":
            raise CliError("the semi-digital base case needs three registers (mode qq)")
        turns = args.phi if args.phi is not None else Fraction(rng.getrandbits(60), 1 << 60)
        if args.mode == "cq":
            circ = compile_phase_product(*widths, turns, rc.compile, angle_in_turns=True)
        else:
            circ = compile_phase_triple(*widths, turns, rc.compile, angle_in_turns=True)
        meta["turns"] = str(Fraction(turns))
    elif args.mode == "u_cq":
        n = args.n or (widths[0] if widths else None)
        if n is None:
            raise CliError("give --n")
        nw = args.n_w if args.n_w is not None else n
        a = args.a if args.a is not None else rng.randrange(1 << nw)
        circ = u_cq(a, n, nw, rc.compile, rc.qft)
        meta["a"] = a
    elif args.mode == "u_qq":
        n = args.n
        if n is None:
            raise CliError("give --n")
        nw = args.n_w if args.n_w is not None else 2 * n
        scale = args.a if args.a is not None else 1
        circ = u_qq(n, n, nw, rc.compile, rc.qft, scale=scale)
        meta["a"] = scale
    elif args.mode == "u_cq_mod":
        if args.N is None or args.n is None:
            raise CliError("give --N and --n")
        a = args.a if args.a is not None else rng.randrange(args.N)
        pad = args.pad if args.pad is not None else 8
        circ = u_cq_mod(a, args.N, args.n, pad, rc.compile, rc.qft)
        meta.update(a=a, N=args.N, pad=pad)
    elif args.mode == "qft":
        if args.n is None:
            raise CliError("give --n")
        if rc.qft.variant == "phase_gradient":
            raise CliError("the qft mode emits standard or fast QFTs")
        circ = qft_circuit(args.n, rc.qft, rc.compile)
    elif args.mode == "modmul":
        if args.N is None:
            raise CliError("give --N")
        eta = args.eta if args.eta is not None else 1e-3
        c = args.c if args.c is not None else _random_unit(rng, args.N)
        try:
            circ = inplace_mod_mul(c, args.N, eta, rc.compile, QftConfig(args.qft, None))
        except ValueError as e:
            raise CliError(str(e)) from None
        meta.update(c=c, N=args.N, eta=eta)
    else:
        raise CliError(f"unknown mode {args.mode!r}")
    summary = summarize(circ.census())
    summary["ancilla_high_water"] = circ.ancilla_high_water
    summary["n_qubits"] = circ.n_qubits
    if rc.fmt == "text":
        body = circ.to_text()
    else:
        doc = circ.to_json()
        doc["meta"] = meta
        body = json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n"
    if rc.out:
        with open(rc.out, "w") as f:
            f.write(body)
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    else:
        sys.stdout.write(body)
        sys.stderr.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0


def _random_unit(rng: random.Random, N: int) -> int:
    units = [c for c in range(1, N) if math.gcd(c, N) == 1]
    return rng.choice(units)


# --- verify --------------------------------------------------------------

def _load_circuit(path: str) -> tuple[Circuit, dict]:
    try:
        with open(path) as f:
            doc = json.load(f)
        return Circuit.from_json(doc), doc.get("meta", {})
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise CliError(f"cannot read circuit {path}: {e}") from None


def _param(args, meta, name, cast=int):
    v = getattr(args, name, None)
    if v is None:
        v = meta.get(name)
    if v is None:
        raise CliError(f"spec needs --{name} (not recorded in the circuit file)")
    return cast(v)


def _io_registers(circ: Circuit):
    ins = [r for r in circ.registers if r.role == "input"]
    outs = [r for r in circ.registers if r.role == "output"]
    return ins, outs


def verify_circuit(circ: Circuit, meta: dict, spec: str, args) -> dict:
    limit = args.qubit_limit
    if circ.n_qubits > limit:
        raise QubitLimitError(f"{circ.n_qubits} qubits exceeds limit {limit}")
    ins, outs = _io_registers(circ)
    report = {"spec": spec, "n_qubits": circ.n_qubits}
    if spec == "phase-product":
        turns = _param(args, meta, "turns", Fraction)
        qs = [r.qubits for r in ins]

        def expect(b):
            p = turns
            for q in qs:
                p *= _bits(b, q)
            return b, 2 * math.pi * float(p % 1)
        dev = verify_against(circ, expect, limit=limit)
    elif spec == "multiplier":
        a = _param(args, meta, "a")
        if len(outs) != 1:
            raise CliError("multiplier spec needs exactly one output register")
        w = outs[0].qubits
        qs = [r.qubits for r in ins]
        mod = 1 << len(w)

        def expect(b):
            p = a
            for q in qs:
                p *= _bits(b, q)
            return _put(b, w, (_bits(b, w) + p) % mod), 0.0
        dev = verify_against(circ, expect, limit=limit)
    elif spec == "qft":
        if len(ins) != 1 or len(circ.registers) != 1:
            raise CliError("qft spec needs a circuit with a single input register")
        x = ins[0].qubits
        n = len(x)
        u = unitary(circ)
        dev = 0.0
        norm = 1 / math.sqrt(1 << n)
        for j in range(1 << n):
            col = u[:, _put(0, x, j)]
            for k in range(1 << n):
                want = norm * cmath.exp(2j * math.pi * j * k / (1 << n))
                dev = max(dev, abs(col[_put(0, x, k)] - want))
    elif spec == "mod-multiplier":
        c, N = _param(args, meta, "c"), _param(args, meta, "N")
        eta = _param(args, meta, "eta", float)
        res = simulate_mod_mul(circ, c, N)
        fid = float(min(r.fidelity_bound for r in res))
        report.update(min_fidelity=fid, threshold=1 - 10 * eta)
        report["max_deviation"] = 1 - fid
        report["pass"] = bool(fid >= 1 - 10 * eta)
        return report
    else:
        raise CliError(f"unknown spec {spec!r}; choose from {', '.join(SPECS)}")
    report["max_deviation"] = float(dev)
    report["tolerance"] = args.tol
    report["pass"] = bool(dev <= args.tol)
    return report


def cmd_verify(args) -> int:
    rc = RunConfig("verify", CompileConfig(), QftConfig(), _seed(args), args.out, args.format)
    circ, meta = _load_circuit(args.circuit)
    report = verify_circuit(circ, meta, args.spec, args)
    report["circuit"] = os.path.basename(args.circuit)
    dev = report["max_deviation"]
    text = f"{args.spec}: {'pass' if report['pass'] else 'FAIL'} (max deviation {dev:.3e})\n"
    _emit(rc, report, text)
    return 0 if report["pass"] else 1


# --- estimate ------------------------------------------------------------

def cmd_estimate(args) -> int:
    rc = _run_config(args, default_eta=1e-12)
    t0 = time.perf_counter()
    if args.what == "multiplier":
        mcfg = estimator.MultiplierConfig(compile=rc.compile, qft=rc.qft, modular=not args.no_modular,
                                          pad=args.pad)
        rep = estimator.estimate_multiplier(args.n, mcfg)
    else:
        widths = tuple(args.widths) if args.widths else args.n
        rep = estimator.estimate_phase_product(widths, rc.compile, args.mode)
    doc = rep.to_json()
    if args.timing:
        doc["seconds"] = round(time.perf_counter() - t0, 3)
    name = f"{args.what} n={args.n} ({rc.qft.variant})"
    _emit(rc, doc, estimator.render_table({name: rep}))
    return 0


# --- sequences -----------------------------------------------------------

def cmd_sequences(args) -> int:
    rc = RunConfig("sequences", CompileConfig(), QftConfig(), _seed(args), args.out, args.format)
    names = args.name or list(NAMES)
    out, lines, passed = {}, [], 0
    for name in names:
        try:
            seq = load_sequence(name)
        except FileNotFoundError:
            raise CliError(f"unknown sequence {name!r}") from None
        res = verify_sequence(seq, args.points.split(",") if args.points else None)
        table = compare_table(seq) if not args.points else []
        ok = res.ok and not table
        passed += ok
        out[name] = {
            "pass": ok,
            "diagnostics": res.diagnostics + table,
            "coverage": {p: {"op": i, "register": r, "constant": str(c)}
                         for p, (i, r, c) in sorted(res.coverage.items())},
            "ops": len(seq.ops),
        }
        lines.append(f"{name}: {'pass' if ok else 'FAIL'}")
        lines += ["  " + d for d in res.diagnostics + table]
    summary = f"{passed}/{len(names)} pass"
    lines.append(summary)
    _emit(rc, {"sequences": out, "summary": summary}, "\n".join(lines) + "\n")
    return 0 if passed == len(names) else 1


# --- qft-check -----------------------------------------------------------

def cmd_qft_check(args) -> int:
    rc = RunConfig("qft-check", _compile_cfg(args), QftConfig(), _seed(args), args.out, args.format)
    rows, ok = [], True
    for n in range(args.n_min, args.n_max + 1):
        std = unitary(qft_circuit(n, QftConfig("standard")))
        fast = unitary(qft_circuit(n, QftConfig("fast", n_base=args.qft_base), rc.compile))
        dev = float(abs(std - fast).max())
        good = bool(dev < args.tol)
        ok &= good
        rows.append({"n": n, "max_deviation": dev, "pass": good})
    text = "".join(f"n={r['n']}: {'pass' if r['pass'] else 'FAIL'} ({r['max_deviation']:.2e})\n" for r in rows)
    _emit(rc, {"tolerance": args.tol, "results": rows, "pass": ok}, text)
    return 0 if ok else 1


# --- modmul-check --------------------------------------------------------

def cmd_modmul_check(args) -> int:
    rc = _run_config(args)
    eta = args.eta if args.eta is not None else 1e-3
    rows, ok = [], True
    for N in args.N:
        cs = args.c or [c for c in range(1, N) if math.gcd(c, N) == 1]
        for c in cs:
            try:
                circ = inplace_mod_mul(c, N, eta, rc.compile, QftConfig(args.qft, None))
            except ValueError as e:
                raise CliError(str(e)) from None
            n = N.bit_length()
            m = circ.register("w").size
            res = simulate_mod_mul(circ, c, N)
            fid = float(min(r.fidelity_bound for r in res))
            budget = n + m + 2
            good = bool(fid >= 1 - 10 * eta and circ.n_qubits == budget)
            ok &= good
            rows.append({"N": N, "c": c, "n": n, "m": m, "qubits": circ.n_qubits, "budget": budget,
                         "min_fidelity": fid, "pass": good})
    text = "".join(f"N={r['N']} c={r['c']}: {'pass' if r['pass'] else 'FAIL'} "
                   f"fidelity>={r['min_fidelity']:.6f} qubits={r['qubits']}\n" for r in rows)
    _emit(rc, {"eta": eta, "threshold": 1 - 10 * eta, "results": rows, "pass": ok}, text)
    return 0 if ok else 1


# --- parser --------------------------------------------------------------

def _common(p, compile_flags=True, qft_flags=True):
    p.add_argument("--seed", type=parse_int, default=0, help="random seed (QMF_SEED overrides)")
    p.add_argument("--out", "-o", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "text"), default="json")
    if compile_flags:
        g = p.add_argument_group("compiler")
        g.add_argument("--k", type=parse_k, default="auto", help="auto, base or a fixed Toom-Cook k")
        g.add_argument("--n-base", type=parse_int, default=None, help="schoolbook cutoff width")
        g.add_argument("--overflow", choices=("zero_ancilla", "stored_ancilla"), default="zero_ancilla")
        g.add_argument("--base", choices=("schoolbook", "semi_digital"), default="schoolbook")
        g.add_argument("--k-max", type=parse_int, default=11)
    if qft_flags:
        g = p.add_argument_group("QFT")
        g.add_argument("--qft", choices=("standard", "fast", "phase_gradient"), default="standard")
        g.add_argument("--eta", type=float, default=None, help="rotation pruning threshold / precision")
        g.add_argument("--grad-bits", type=parse_int, default=None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qmf", description="Fast quantum multiplication: synthesis, verification, estimates.",
        epilog="Integer arguments accept k and M suffixes (2k = 2048). QMF_SEED overrides --seed.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="compile a circuit to JSON")
    s.add_argument("--mode", choices=("cq", "qq", "u_cq", "u_qq", "u_cq_mod", "modmul", "qft"),
                   default="cq", help="cq: phase product x*z, qq: phase product x*y*z, u_*: multipliers, "
                   "modmul: in-place c*x mod N, qft: QFT mod 2^n")
    s.add_argument("--n", type=parse_int)
    s.add_argument("--widths", type=parse_ints, help="comma-separated register widths")
    s.add_argument("--n-w", type=parse_int, help="output register width for multipliers")
    s.add_argument("--phi", type=parse_turns, help="phase in turns (fraction of 2 pi), e.g. 3/16")
    s.add_argument("--a", type=parse_int, help="classical multiplier")
    s.add_argument("--c", type=parse_int, help="modmul multiplier")
    s.add_argument("--N", type=parse_int, help="modulus")
    s.add_argument("--pad", type=parse_int)
    _common(s)
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="simulate a circuit file against an analytic spec")
    v.add_argument("circuit")
    v.add_argument("--spec", required=True, choices=SPECS)
    v.add_argument("--turns", type=parse_turns, help="phase-product angle (overrides the file)")
    v.add_argument("--a", type=parse_int)
    v.add_argument("--c", type=parse_int)
    v.add_argument("--N", type=parse_int)
    v.add_argument("--eta", type=float)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--qubit-limit", type=parse_int, default=DEFAULT_QUBIT_LIMIT)
    _common(v, compile_flags=False, qft_flags=False)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("estimate", help="resource estimate (JSON CostReport)")
    e.add_argument("--n", type=parse_int, required=True)
    e.add_argument("--what", choices=("multiplier", "phase-product"), default="multiplier")
    e.add_argument("--mode", choices=("double", "triple"), default="double")
    e.add_argument("--widths", type=parse_ints, help="phase-product register widths")
    e.add_argument("--pad", type=parse_int, help="extra output bits (default log2(1/eta))")
    e.add_argument("--no-modular", action="store_true", help="output register of n bits, no padding")
    e.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical output)")
    _common(e)
    e.set_defaults(func=cmd_estimate)

    q = sub.add_parser("sequences", help="check the parallel addition sequences")
    q.add_argument("--name", action="append", choices=NAMES)
    q.add_argument("--points", help="comma-separated points to check against instead of the built-in ones")
    _common(q, compile_flags=False, qft_flags=False)
    q.set_defaults(func=cmd_sequences)

    f = sub.add_parser("qft-check", help="compare fast and standard QFT matrices")
    f.add_argument("--n-min", type=parse_int, default=2)
    f.add_argument("--n-max", type=parse_int, default=8)
    f.add_argument("--qft-base", type=parse_int, default=2)
    f.add_argument("--tol", type=float, default=1e-9)
    _common(f, qft_flags=False)
    f.set_defaults(func=cmd_qft_check)

    m = sub.add_parser("modmul-check", help="simulate in-place modular multiplication")
    m.add_argument("--N", type=parse_ints, default=[7, 15, 21])
    m.add_argument("--c", type=parse_ints)
    _common(m)
    m.set_defaults(func=cmd_modmul_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, QubitLimitError) as e:
        print(f"qmf {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
