"""Sharp exponential decay of eigenfunctions of discrete periodic Schrodinger
operators with decaying impurities: band structure, the complex dispersion
rate, lattice Green's functions and an explicit sharp example."""
from .dispersion import RateResult, rate, rate_lower, rate_upper
from .errors import LatticeError
from .lattice import Box, Impurity, LatticeFunction, PeriodicPotential
from .resolvent import green, green_table, resolvent_delta_column
from .sharpness import construct_sharp_example, verify_sharp_example
from .spectrum import band_structure, classify_regime, spectrum_distance

__all__ = [
    "Box", "Impurity", "LatticeError", "LatticeFunction", "PeriodicPotential", "RateResult",
    "band_structure", "classify_regime", "construct_sharp_example", "green", "green_table",
    "rate", "rate_lower", "rate_upper", "resolvent_delta_column", "spectrum_distance",
    "verify_sharp_example",
]
