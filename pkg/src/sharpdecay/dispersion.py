"""The complex dispersion surface D(lam) = {x in C^d : P(x, lam) = 0} and the
rate r(lam) = 2 pi dist(R^d, D(lam)).

The upper bound eliminates one coordinate: for every choice of the remaining
d-1 complex coordinates, the points of D(lam) are the roots of a Laurent
polynomial in ``w = exp(2 pi i x_1)``. Minimising ``|Im x|^2`` over the
remaining coordinates is then an unconstrained problem whose every evaluation
is an exact point of the surface.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from ._parallel import ordered_map
from .errors import DegenerateSliceError, DomainError, SearchFailureError
from .floquet import (char_det, char_det_grad, coupling_norm, fiber_matrices,
                      laurent_coefficients)
from .lattice import PeriodicPotential
from .spectrum import (BandStructure, band_eigenvalues, cached_bands,
                       spectrum_distance)

TWO_PI = 2 * math.pi
ROOT_TOL = 1e-10
BAND_TOL = 1e-10


def companion_roots(coeffs) -> np.ndarray:
    """Roots of ``sum_k coeffs[k] w^k`` from the eigenvalues of its companion matrix.

    Leading coefficients that are negligible relative to the largest one are
    dropped first.
    """
    c = np.asarray(coeffs, dtype=complex)
    scale = np.abs(c).max()
    top = len(c) - 1
    while top > 0 and abs(c[top]) <= 1e-13 * scale:
        top -= 1
    c = c[:top + 1]
    if top == 0:
        return np.empty(0, complex)
    C = np.zeros((top, top), complex)
    C[1:, :-1] = np.eye(top - 1)
    C[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(C)


def _w_to_x(w: np.ndarray) -> np.ndarray:
    """``x = log(w) / (2 pi i)`` with ``Re x`` in [0, 1)."""
    re = np.mod(np.angle(w) / TWO_PI, 1.0)
    im = -np.log(np.abs(w)) / TWO_PI
    return re + 1j * im


def _full_x(axis, x_rest, xj):
    x_rest = np.asarray(x_rest, dtype=complex).ravel()
    return np.insert(x_rest, axis, xj)


def _newton_polish(V, lam, axis, x, steps=3):
    best, best_res = x, abs(char_det(V, x, lam))
    for _ in range(steps):
        p, g = char_det_grad(V, best, lam)
        if g[axis] == 0:
            break
        cand = best.copy()
        cand[axis] -= p / g[axis]
        res = abs(char_det(V, cand, lam))
        if not res < best_res:
            break
        best, best_res = cand, res
    return best


def slice_roots(V: PeriodicPotential, lam: complex, axis: int, x_rest=(),
                polish: bool = True) -> np.ndarray:
    """Values of coordinate ``axis`` at which ``P(x, lam) = 0``, the other
    coordinates fixed to ``x_rest`` (length d-1; real for the public slice,
    complex values are accepted).

    Returns complex ``x_axis`` with ``Re`` in [0, 1), sorted by ``|Im|``.
    """
    d = V.dim
    x_rest = np.asarray(x_rest, dtype=complex).ravel()
    if len(x_rest) != d - 1:
        raise DomainError(f"x_rest must have {d - 1} entries")
    x0 = _full_x(axis, x_rest, 0.0)
    with np.errstate(all="ignore"):
        c = laurent_coefficients(V, lam, axis, x0)
    if not np.all(np.isfinite(c)):
        # far off the real cell exp overflows; treat as no usable slice
        raise DegenerateSliceError("P is not finite on this slice")
    if np.abs(c).max() < 1e-14:
        raise DegenerateSliceError("P vanishes identically on this slice")
    # c[k] multiplies w^(k - Q); multiplying by w^Q gives an ordinary polynomial
    low = 0
    while abs(c[low]) <= 1e-13 * np.abs(c).max():
        low += 1
    w = companion_roots(c[low:])
    w = w[w != 0]
    xs = _w_to_x(w)
    if polish:
        for i, xj in enumerate(xs):
            xs[i] = _newton_polish(V, lam, axis, _full_x(axis, x_rest, xj))[axis]
        xs = np.mod(xs.real, 1.0) + 1j * xs.imag
    return xs[np.lexsort((xs.real, np.abs(xs.imag)))]


def rate_lower(lam: complex, B_norm: float, d: int) -> float:
    """Certified lower bound ``ln((|lam| - |B|) / 2d)`` on r(lam), or 0 when vacuous.

    Any point of D(lam) has a diagonal entry of ``D^x`` within ``|B|`` of lam
    and ``|D^x(n, n)| <= 2d exp(2 pi |Im x|)``.
    """
    gap = abs(lam) - B_norm
    if gap <= 2 * d:
        return 0.0
    return math.log(gap / (2 * d))


@dataclass
class UpperBound:
    value: float
    minimizer: np.ndarray
    residual: float
    method: str


@dataclass
class RateResult:
    lam: complex
    r_lower: float
    r_upper: float
    minimizer: np.ndarray
    residual: float
    lower_method: str = "gershgorin"
    upper_method: str = "multistart"
    notes: list = field(default_factory=list)

    def row(self) -> dict:
        ln = math.log(abs(self.lam))
        return {
            "lambda_re": self.lam.real, "lambda_im": self.lam.imag,
            "r_lower": self.r_lower, "r_upper": self.r_upper,
            "ratio_lower": self.r_lower / ln if ln > 0 else math.nan,
            "ratio_upper": self.r_upper / ln if ln > 0 else math.nan,
            "residual": self.residual,
        }

    def summary(self) -> str:
        mins = ", ".join(f"{z.real:.12g}{z.imag:+.12g}i" for z in self.minimizer)
        return (f"lambda: {_cfmt(self.lam)}\n"
                f"r_lower: {self.r_lower:.5f}\n"
                f"r_upper: {self.r_upper:.5f}\n"
                f"minimizer: [{mins}]\n"
                f"residual: {self.residual:.3e}\n"
                f"methods: {self.lower_method}, {self.upper_method}\n")


def _cfmt(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def residual_scale(V, x, lam) -> float:
    """Hadamard-type bound ``prod_n sum_m |M_nm|`` on the size of the determinant."""
    M = fiber_matrices(V, np.asarray(x, dtype=complex), lam)
    return float(max(1.0, np.prod(np.abs(M).sum(axis=1))))


def is_feasible(V, x, lam, root_tol=ROOT_TOL) -> bool:
    return abs(char_det(V, x, lam)) <= root_tol * residual_scale(V, x, lam)


def _canonical(V, x):
    """Real parts reduced to the dual cell, for tie-breaking."""
    x = np.asarray(x, dtype=complex)
    period = 1.0 / np.asarray(V.q)
    return np.mod(x.real, period) + 1j * x.imag


def _pick(V, candidates, tie_tol=1e-12):
    """Best (value, x): smallest value, ties by lexicographic Re x in the cell."""
    best_val = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best_val + tie_tol]
    tied = [(v, _canonical(V, x)) for v, x in tied]
    return min(tied, key=lambda c: tuple(np.round(c[1].real, 12)))


def _real_point(V: PeriodicPotential, lam: float, bands: BandStructure) -> np.ndarray:
    """A real quasi-momentum on D(lam) for lam inside a band (bisection along a
    segment joining the band's extremal points)."""
    for m, (a, b) in enumerate(bands.intervals):
        if a - BAND_TOL <= lam <= b + BAND_TOL:
            target = min(max(lam, a), b)
            ka, kb = bands.k_min[m], bands.k_max[m]

            def f(t):
                return band_eigenvalues(V, (ka + t * (kb - ka))[None, :])[0, m] - target

            fa, fb = f(0.0), f(1.0)
            if fa >= 0:
                return ka.astype(complex)
            if fb <= 0:
                return kb.astype(complex)
            t = brentq(f, 0.0, 1.0, xtol=1e-15)
            return (ka + t * (kb - ka)).astype(complex)
    raise DomainError(f"lambda={lam} is not inside any band")


def _seed_grid(V, n):
    """Real grid over the last d-1 coordinates (one dual cell)."""
    axes = [np.arange(n) / (n * V.q[j]) for j in range(1, V.dim)]
    g = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in g], axis=-1)


def rate_upper(V: PeriodicPotential, lam: complex, *, grid: int = 8, restarts: int = 8,
               seed: int = 0, root_tol: float = ROOT_TOL,
               bands: BandStructure | None = None) -> UpperBound:
    """Numerical upper bound on ``2 pi dist(R^d, D(lam))`` with a feasible minimizer.

    Exact (global) in d = 1, where D(lam) is the finite root set of one slice.
    In d >= 2 a multistart local search over the d-1 free complex coordinates,
    seeded by (a) real slices on a ``grid``-point mesh, (b) symmetric imaginary
    sign patterns and (c) ``restarts`` random perturbations.
    """
    lam = complex(lam)
    d = V.dim
    bands = bands if bands is not None else cached_bands(V)
    if lam.imag == 0 and spectrum_distance(lam, bands) <= BAND_TOL:
        x = _real_point(V, lam.real, bands)
        return UpperBound(0.0, x, abs(char_det(V, x, lam)), "in-band")

    if d == 1:
        roots = slice_roots(V, lam, 0, [])
        cands = [(TWO_PI * abs(z.imag), np.array([z])) for z in roots
                 if is_feasible(V, [z], lam, root_tol)]
        if not cands:
            raise SearchFailureError("no feasible slice root",
                                     min(abs(char_det(V, [z], lam)) for z in roots))
        val, x = _pick(V, cands)
        return UpperBound(val, x, abs(char_det(V, x, lam)), "slice-roots")

    m = d - 1

    def point(p):
        rest = p[:m] + 1j * p[m:]
        roots = slice_roots(V, lam, 0, rest, polish=False)
        if roots.size == 0:
            raise DegenerateSliceError("no roots on this slice")
        return _full_x(0, rest, roots[0])

    def objective(p):
        try:
            x = point(p)
        except DegenerateSliceError:
            return math.inf
        return float(np.sum(x.imag ** 2))

    def objective_grad(p):
        # implicit differentiation along D(lam): dx_1/dz_j = -dP/dz_j / dP/dx_1
        try:
            x = _newton_polish(V, lam, 0, point(p), steps=1)
        except DegenerateSliceError:
            return math.inf, np.zeros_like(p)
        _, g = char_det_grad(V, x, lam)
        if g[0] == 0:
            return float(np.sum(x.imag ** 2)), np.zeros_like(p)
        dz = -g[1:] / g[0]
        y1 = x[0].imag
        grad_re = 2 * y1 * dz.imag
        grad_im = 2 * x[1:].imag + 2 * y1 * dz.real
        return float(np.sum(x.imag ** 2)), np.concatenate([grad_re, grad_im])

    # (a) real slices
    starts = [np.concatenate([k, np.zeros(m)]) for k in _seed_grid(V, grid)]
    vals = ordered_map(objective, starts)
    order = np.argsort(vals, kind="stable")
    best_starts = [starts[i] for i in order[:4]]
    base = math.sqrt(vals[order[0]]) if np.isfinite(vals[order[0]]) else 0.1
    # (b) symmetric sign patterns x_j = k_j + i y s_j
    y = base / math.sqrt(d)
    for s in range(2 ** m):
        signs = np.array([1.0 if (s >> b) & 1 == 0 else -1.0 for b in range(m)])
        for k in (best_starts[0][:m], np.zeros(m)):
            best_starts.append(np.concatenate([k, y * signs]))
    # (c) random perturbations
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        best_starts.append(best_starts[0] + rng.normal(scale=0.05, size=2 * m))

    def local(p0):
        res = minimize(objective_grad, p0, jac=True, method="BFGS",
                       options={"gtol": 1e-13, "maxiter": 200})
        if not np.isfinite(res.fun):
            return p0
        # derivative-free clean-up where the nearest root switches branch
        res2 = minimize(objective, res.x, method="Nelder-Mead",
                        options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 200 * m})
        return res2.x if res2.fun < res.fun else res.x

    finals = ordered_map(local, best_starts)
    cands, worst = [], math.inf
    for p in finals:
        try:
            x = point(p)
        except DegenerateSliceError:
            continue
        x = _newton_polish(V, lam, 0, x)
        if is_feasible(V, x, lam, root_tol):
            cands.append((TWO_PI * float(np.linalg.norm(x.imag)), x))
        else:
            worst = min(worst, abs(char_det(V, x, lam)))
    if not cands:
        raise SearchFailureError("no feasible point of D(lambda) found", worst)
    val, x = _pick(V, cands)
    return UpperBound(val, x, abs(char_det(V, x, lam)), "multistart")


def rate(V: PeriodicPotential, lam: complex, **opts) -> RateResult:
    """Bracket ``r_lower <= r(lam) <= r_upper`` with a minimizer certificate."""
    lam = complex(lam)
    up = rate_upper(V, lam, **opts)
    lo = 0.0 if up.method == "in-band" else rate_lower(lam, coupling_norm(V), V.dim)
    if lo > up.value + 1e-9:
        raise AssertionError(f"bracket inverted: r_lower={lo} > r_upper={up.value}")
    return RateResult(lam, lo, up.value, up.minimizer, up.residual, "gershgorin", up.method)


@dataclass
class SweepRow:
    lam: complex
    r_lower: float
    r_upper: float
    ratio_lower: float
    ratio_upper: float
    residual: float


def asymptotic_ratio_sweep(V: PeriodicPotential, lambdas, **opts) -> list[SweepRow]:
    """``r / ln|lam|`` for both bracket ends along a list of large energies."""
    bnorm = coupling_norm(V)
    rows = []
    for lam in lambdas:
        lam = complex(lam)
        if abs(lam) <= bnorm + 2 * V.dim:
            raise DomainError(f"|lambda|={abs(lam)} must exceed |B| + 2d = {bnorm + 2 * V.dim}")
        res = rate(V, lam, **opts)
        ln = math.log(abs(lam))
        rows.append(SweepRow(lam, res.r_lower, res.r_upper, res.r_lower / ln,
                             res.r_upper / ln, res.residual))
    return rows


SWEEP_COLUMNS = ["lambda_re", "lambda_im", "r_lower", "r_upper", "ratio_lower",
                 "ratio_upper", "residual"]


def sweep_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([format(v, ".17g") for v in (r.lam.real, r.lam.imag, r.r_lower, r.r_upper,
                                                 r.ratio_lower, r.ratio_upper, r.residual)])
    return buf.getvalue()
