"""In-place modular multiplication: fidelity bound against eta for several moduli.

    python3 scripts/modmul_sweep.py [--N 7,15,21] [--eta 1e-2,1e-3]
"""

import argparse
import math
import time

from qmf.arith import inplace_mod_mul
from qmf.simulator import simulate_mod_mul


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--N", default="7,15,21")
    ap.add_argument("--eta", default="1e-2,1e-3")
    args = ap.parse_args()
    print(f"{'N':>4}{'eta':>8}{'qubits':>8}{'min fidelity':>14}{'1-10eta':>10}{'sec':>7}")
    for N in (int(s) for s in args.N.split(",")):
        for eta in (float(s) for s in args.eta.split(",")):
            t0 = time.perf_counter()
            worst, nq = 1.0, 0
            for c in range(1, N):
                if math.gcd(c, N) != 1:
                    continue
                circ = inplace_mod_mul(c, N, eta)
                nq = circ.n_qubits
                worst = min(worst, min(r.fidelity_bound for r in simulate_mod_mul(circ, c, N)))
            print(f"{N:>4}{eta:>8.0e}{nq:>8}{worst:>14.6f}{1 - 10 * eta:>10.3f}{time.perf_counter() - t0:>7.1f}")


if __name__ == "__main__":
    main()
