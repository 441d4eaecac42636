"""Sharp-example reports (residual, measured slope, mu0, rate bracket) over a few problems.

Usage: python3 scripts/sharp_example_table.py
"""
import numpy as np

from sharpdecay.lattice import PeriodicPotential
from sharpdecay.sharpness import (construct_sharp_example, fraction_representation_check,
                                  verify_sharp_example)

CASES = [
    ("free_1d", PeriodicPotential.free(1), [3, 10, 100]),
    ("free_2d", PeriodicPotential.free(2), [5, 10]),
    ("dimer_1d", PeriodicPotential((2,), [0.0, 2.0]), [1.0, 5.0]),
]


def main():
    rng = np.random.default_rng(0)
    print(f"{'problem':>9} {'lambda':>7} {'residual':>9} {'-slope':>8} {'mu0':>8} "
          f"{'r_lower':>8} {'r_upper':>8} {'ratio':>7} {'fraction':>9}")
    for name, V, lams in CASES:
        for lam in lams:
            ex = construct_sharp_example(V, lam)
            rep = verify_sharp_example(ex, V)
            frac = fraction_representation_check(ex, V, rng.random((20, V.dim)) / np.asarray(V.q))
            print(f"{name:>9} {lam:7g} {rep.residual_max:9.1e} {-rep.slope:8.5f} {rep.mu0:8.4f} "
                  f"{rep.r_lower:8.4f} {rep.r_upper:8.5f} {rep.sharpness_ratio:7.4f} "
                  f"{frac.max_error:9.1e}")


if __name__ == "__main__":
    main()
