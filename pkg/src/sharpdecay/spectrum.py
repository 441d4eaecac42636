"""Band functions, spectral bands of H0 and the regime of an energy."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .floquet import dual_grid, fiber_matrices
from .lattice import PeriodicPotential


@dataclass
class BandStructure:
    q: tuple[int, ...]
    n_per_axis: int
    kgrid: np.ndarray
    bands: np.ndarray
    intervals: np.ndarray
    k_min: np.ndarray | None = None
    k_max: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.q)

    def union(self) -> list[tuple[float, float]]:
        """Bands merged into disjoint intervals, ascending."""
        merged: list[list[float]] = []
        for a, b in sorted(map(tuple, self.intervals)):
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return [(a, b) for a, b in merged]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d, Q = self.kgrid.shape[1], self.bands.shape[1]
        w.writerow([f"k_{i + 1}" for i in range(d)] + [f"lambda_{m + 1}" for m in range(Q)])
        for k, lam in zip(self.kgrid, self.bands):
            w.writerow([_fmt(v) for v in k] + [_fmt(v) for v in lam])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"bands: {len(self.intervals)}"]
        for m, (a, b) in enumerate(self.intervals):
            lines.append(f"band_{m + 1}: [{a:.5f}, {b:.5f}]")
        lines.append("spectrum: " + " U ".join(f"[{a:.5f}, {b:.5f}]" for a, b in self.union()))
        return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def band_eigenvalues(V: PeriodicPotential, ks) -> np.ndarray:
    """Sorted eigenvalues of the Hermitian fibers at real quasi-momenta ``ks``."""
    return np.linalg.eigvalsh(fiber_matrices(V, np.asarray(ks, dtype=float)))


def _polish(V, k0, m, sign, h):
    """Push the m-th band value at k0 further toward its extremum (sign=+1 for min)."""
    def f(k):
        return sign * band_eigenvalues(V, k[None, :])[0, m]

    res = minimize(f, k0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-15, "initial_simplex": _simplex(k0, h)})
    if res.fun < f(k0):
        return res.fun * sign, res.x
    return f(k0) * sign, k0


def _simplex(k0, h):
    d = len(k0)
    return np.vstack([k0] + [k0 + h * np.eye(d)[i] for i in range(d)])


def band_structure(V: PeriodicPotential, grid_per_axis: int, polish: bool = True) -> BandStructure:
    """Band functions on a uniform dual-cell grid and the bands ``[a_m, b_m]``.

    Endpoints come from grid min/max, then a local derivative-free polish
    started at the grid extremum. Polished values are attained band values, so
    intervals never overshoot the true bands.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    ks = dual_grid(V.q, grid_per_axis)
    lam = band_eigenvalues(V, ks)
    lo_idx, hi_idx = lam.argmin(axis=0), lam.argmax(axis=0)
    a, b = lam.min(axis=0), lam.max(axis=0)
    k_min, k_max = ks[lo_idx].copy(), ks[hi_idx].copy()
    if polish:
        h = 1.0 / (grid_per_axis * max(V.q))
        for m in range(V.Q):
            a[m], k_min[m] = _polish(V, ks[lo_idx[m]], m, 1.0, h)
            b[m], k_max[m] = _polish(V, ks[hi_idx[m]], m, -1.0, h)
    return BandStructure(V.q, grid_per_axis, ks, lam, np.stack([a, b], axis=1), k_min, k_max)


_BANDS_CACHE: dict = {}


def default_grid(d: int) -> int:
    return {1: 256, 2: 64}.get(d, 16)


def cached_bands(V: PeriodicPotential, grid_per_axis: int | None = None) -> BandStructure:
    n = grid_per_axis or default_grid(V.dim)
    key = (V.key, n)
    if key not in _BANDS_CACHE:
        _BANDS_CACHE[key] = band_structure(V, n)
    return _BANDS_CACHE[key]


def spectrum_distance(lam: complex, bands: BandStructure) -> float:
    """``dist(lam, sigma(H0))``; zero inside a band."""
    lam = complex(lam)
    a, b = bands.intervals[:, 0], bands.intervals[:, 1]
    nearest = np.clip(lam.real, a, b)
    return float(np.min(np.hypot(lam.real - nearest, lam.imag)))


def classify_regime(lam: complex, bands: BandStructure, tol: float = 1e-8) -> tuple[str, int | None]:
    """``('interior', m)``, ``('endpoint', m)`` or ``('outside', None)``; m is 1-based."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = complex(lam)
    if lam.imag == 0:
        for m, (a, b) in enumerate(bands.intervals, start=1):
            if a + tol < lam.real < b - tol:
                return "interior", m
    for m, (a, b) in enumerate(bands.intervals, start=1):
        if abs(lam - a) <= tol or abs(lam - b) <= tol:
            return "endpoint", m
    return "outside", None
