"""Log-log fits of CRphi counts for fixed k, next to log_k(2k-1) / log_k(3k-2).

    python3 scripts/scaling.py [--k-max 8] [--max-n 8192]
"""

import argparse

from qmf.compiler import CompileConfig
from qmf.estimator import exponent_table, fit_scaling_exponent


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k-max", type=int, default=8)
    ap.add_argument("--max-n", type=int, default=8192)
    ap.add_argument("--triple", action="store_true", help="also fit triple products (slower)")
    args = ap.parse_args()
    sizes = [n for n in (64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384) if n <= args.max_n]
    table = exponent_table(args.k_max)
    print(f"{'k':>3}{'double fit':>12}{'log_k(2k-1)':>13}{'triple fit':>12}{'log_k(3k-2)':>13}")
    for k in range(2, args.k_max + 1):
        d = fit_scaling_exponent(CompileConfig(k_policy=k), sizes)
        t = fit_scaling_exponent(CompileConfig(k_policy=k), sizes, "triple") if args.triple else float("nan")
        print(f"{k:>3}{d:>12.3f}{table[k][0]:>13.3f}{t:>12.3f}{table[k][1]:>13.3f}")
    auto = fit_scaling_exponent(CompileConfig(), sizes)
    print(f"auto k: {auto:.3f}")


if __name__ == "__main__":
    main()
