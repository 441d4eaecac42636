"""r_lower / ln(lam) and r_upper / ln(lam) for the free lattice at large energies.

Usage: python3 scripts/asymptotic_sweep.py [--dims 1 2] [--out sweep.csv]
"""
import argparse
import math
from pathlib import Path

from sharpdecay.dispersion import asymptotic_ratio_sweep, sweep_to_csv
from sharpdecay.lattice import PeriodicPotential


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", type=int, nargs="+", default=[1, 2])
    p.add_argument("--lambdas", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    p.add_argument("--out", type=Path)
    args = p.parse_args()
    chunks = []
    for d in args.dims:
        rows = asymptotic_ratio_sweep(PeriodicPotential.free(d), args.lambdas)
        print(f"d={d}")
        print(f"{'lambda':>10} {'r_lower/ln':>12} {'r_upper/ln':>12} {'width':>10} {'floor':>8}")
        for r in rows:
            floor = 1 - math.log(2 * d) / math.log(abs(r.lam))
            print(f"{r.lam.real:10.0f} {r.ratio_lower:12.6f} {r.ratio_upper:12.6f} "
                  f"{r.r_upper - r.r_lower:10.6f} {floor:8.4f}")
        chunks.append(f"# d={d}\n" + sweep_to_csv(rows))
    if args.out:
        args.out.write_text("".join(chunks))


if __name__ == "__main__":
    main()
