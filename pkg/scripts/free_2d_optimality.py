"""Free d=2: the multi-coordinate optimum against one-coordinate constructions.

Compares rate_upper with the axis slice (x_2 = 0 exactly, closed form
arccosh(lam/2 - 1)), the symmetric ansatz x_1 = x_2 and the d=1 value.

Usage: python3 scripts/free_2d_optimality.py [lam ...]
"""
import math
import sys

from sharpdecay.dispersion import rate_upper
from sharpdecay.lattice import PeriodicPotential


def main():
    lams = [float(a) for a in sys.argv[1:]] or [10.0, 100.0]
    V = PeriodicPotential.free(2)
    print(f"{'lambda':>8} {'rate_upper':>12} {'axis slice':>12} {'symmetric':>12} {'1-D value':>12}")
    for lam in lams:
        up = rate_upper(V, lam).value
        axis = math.acosh(lam / 2 - 1)
        # x_1 = x_2 = i t: -4 cosh(2 pi t) = lam, distance sqrt(2) t
        sym = math.sqrt(2) * math.acosh(lam / 4)
        one = math.log((lam + math.sqrt(lam * lam - 4)) / 2)
        print(f"{lam:8g} {up:12.6f} {axis:12.6f} {sym:12.6f} {one:12.6f}")


if __name__ == "__main__":
    main()
