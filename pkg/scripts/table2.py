"""Cost estimates for one 2048-bit classical-quantum multiplication.

    python3 scripts/table2.py [--n 2048] [--json out.json]
"""

import argparse
import json
import time

from qmf import estimator as E

# comparison rows for other multipliers (millions of gates, ancillas); fixed, not computed here
REFERENCE = {
    "Karatsuba (ref)": (5.6, None, 34, 12730),
    "Windowed (ref)": (1.8, None, 2.5, 4106),
    "Schoolbook (ref)": (6.4, None, 38, 1),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--json")
    args = ap.parse_args()
    reports = {}
    for name, cfg in E.PRESETS.items():
        t0 = time.perf_counter()
        reports[name] = E.estimate_multiplier(args.n, cfg)
        print(f"{name}: {time.perf_counter() - t0:.1f} s")
    print()
    print(E.render_table(reports), end="")
    for name, (tof, crp, cl, anc) in REFERENCE.items():
        print(f"{name:<22}{tof:>10.2f}{'-':>10}{cl:>10.2f}{anc:>10d}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump({k: r.to_json() for k, r in reports.items()}, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
