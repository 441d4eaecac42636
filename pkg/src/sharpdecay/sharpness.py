"""The sharp-decay eigenpair: a single-site impurity whose eigenfunction is a
resolvent column of H0.

With ``g00 = G0(0, 0; lam)`` and ``u = (H0 - lam)^{-1} delta_0`` the impurity
``v = -delta_0 / g00`` gives ``(H0 + v - lam) u = delta_0 - delta_0 = 0``. The
decay of u is then the decay of the Green's function, which the dispersion
rate brackets from both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import rate
from .errors import ExceptionalLambdaError, ResampleError
from .floquet import (adjugate, bloch_matrix, cell_index, fiber_matrices,
                      floquet_transform, restriction_matrix)
from .lattice import (Box, Impurity, LatticeFunction, PeriodicPotential,
                      decay_rate_estimate, eigen_residual)
from .resolvent import resolvent_delta_column
from .spectrum import BandStructure, cached_bands, spectrum_distance

EXCEPTIONAL_TOL = 1e-8
# fraction of the box kept for slope fitting
FIT_WINDOW = 0.8
# values this far below |u(0)| are quadrature noise, not decay
NOISE_FLOOR = 1e-13


@dataclass
class SharpExample:
    lam: complex
    g00: complex
    v: Impurity
    u: LatticeFunction
    diagnostics: dict = field(default_factory=dict)

    @property
    def v0(self) -> complex:
        return -1.0 / self.g00

    @property
    def psi(self) -> LatticeFunction:
        """``psi = -v u``, which is ``delta_0`` by construction."""
        data = np.zeros(self.u.box.shape, complex)
        origin = tuple(-np.asarray(self.u.box.lo))
        data[origin] = -self.v0 * self.u.data[origin]
        return LatticeFunction(self.u.box, data)


# box growth stops once the boundary shell is this small relative to |u(0)|
TAIL_TOL = 1e-11
BOX_START = {1: 16, 2: 8}
BOX_CAP = {1: 512, 2: 128}


def _boundary_ratio(u: LatticeFunction) -> float:
    inner = u.box.shrink(1)
    edge = ~inner.contains(u.box.sites())
    mag = np.abs(u.data.ravel())
    return float(mag[edge].max() / mag.max())


def _column(V, lam, box, grid):
    if box is not None:
        return resolvent_delta_column(V, lam, box, grid)
    L = BOX_START.get(V.dim, 4)
    cap = BOX_CAP.get(V.dim, 8)
    while True:
        u = resolvent_delta_column(V, lam, Box.centered(L, V.dim), grid)
        if _boundary_ratio(u) < TAIL_TOL or 2 * L > cap:
            return u
        L *= 2


def construct_sharp_example(V: PeriodicPotential, lam: complex, box: Box | None = None,
                            grid: int | None = None,
                            exceptional_tol: float = EXCEPTIONAL_TOL) -> SharpExample:
    """Build ``(v, u)`` with u sampled on ``box``.

    Without a box the half-width doubles until the boundary shell of u is
    below ``TAIL_TOL`` relative to ``|u(0)|``, so that Floquet transforms of
    the sample are not truncation-limited.
    """
    lam = complex(lam)
    u = _column(V, lam, box, grid)
    origin = tuple(-np.asarray(u.box.lo))
    g00 = complex(u.data[origin])
    if abs(g00) <= exceptional_tol:
        raise ExceptionalLambdaError(
            f"|G0(0,0; {lam})| = {abs(g00):.2e} is at or below {exceptional_tol:.0e}")
    v = Impurity.single_site(-1.0 / g00, (0,) * V.dim)
    res = eigen_residual(V, v, lam, u)
    return SharpExample(lam, g00, v, u, {"residual_max": float(np.abs(res.data).max())})


def fit_slope(u: LatticeFunction):
    """Shell-max decay fit over the inner 80% of the box, above the noise floor."""
    last = int(math.floor(FIT_WINDOW * u.box.inner_radius()))
    return decay_rate_estimate(u, "lmax", shells=range(0, last + 1), floor=NOISE_FLOOR)


@dataclass
class SharpReport:
    lam: complex
    g00: complex
    residual_max: float
    slope: float
    mu0: float
    mu0_abs: float
    r_lower: float
    r_upper: float
    checks: dict

    @property
    def sharpness_ratio(self) -> float:
        return -self.slope / self.r_upper if self.r_upper > 0 else math.nan

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def text(self) -> str:
        lines = [
            f"lambda: {_c(self.lam)}",
            f"g00: {_c(self.g00)}",
            f"residual_max: {self.residual_max:.17g}",
            f"slope: {self.slope:.17g}",
            f"mu0: {self.mu0:.17g}",
            f"mu0_abs_lambda: {self.mu0_abs:.17g}",
            f"r_lower: {self.r_lower:.17g}",
            f"r_upper: {self.r_upper:.17g}",
            f"sharpness_ratio: {self.sharpness_ratio:.17g}",
        ]
        lines += [f"check {name}: {'pass' if ok else 'FAIL'}" for name, ok in self.checks.items()]
        return "\n".join(lines) + "\n"


def _c(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.17g}" if z.imag == 0 else f"{z.real:.17g}{z.imag:+.17g}j"


def verify_sharp_example(ex: SharpExample, V: PeriodicPotential,
                         bands: BandStructure | None = None, slope_tol: float = 0.05,
                         rate_result=None) -> SharpReport:
    """Residual, measured decay, Combes-Thomas floor and the dispersion bracket.

    ``mu0 = ln gamma - ln 2d`` is the Combes-Thomas exponent; the same
    quantity with ``|lam|`` in place of ``gamma`` is reported alongside.
    """
    bands = bands or cached_bands(V)
    d = V.dim
    gamma = spectrum_distance(ex.lam, bands)
    mu0 = math.log(gamma) - math.log(2 * d)
    mu0_abs = math.log(abs(ex.lam)) - math.log(2 * d) if ex.lam != 0 else -math.inf
    slope = fit_slope(ex.u).slope
    rr = rate_result or rate(V, ex.lam, bands=bands)
    checks = {
        "residual": ex.diagnostics["residual_max"] < 1e-8,
        "decay_dominance": -slope >= mu0 - slope_tol,
    }
    if ex.lam.imag == 0:
        checks["realness"] = abs(ex.v0.imag) < 1e-10
    if V.is_zero() and d == 1:
        checks["free_rate"] = abs(-slope - rr.r_upper) <= 0.02 * rr.r_upper
    return SharpReport(ex.lam, ex.g00, ex.diagnostics["residual_max"], slope, mu0, mu0_abs,
                       rr.r_lower, rr.r_upper, checks)


@dataclass
class FractionReport:
    xs: np.ndarray
    skipped: int
    errors: np.ndarray
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.max_error < self.tol

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0


def fraction_representation_check(ex: SharpExample, V: PeriodicPotential, x_samples,
                                  tol: float = 1e-6, fermi_tol: float = 1e-6) -> FractionReport:
    """``P(x) u_hat(x) = adj(H0(x) - lam) psi_hat(x)`` at real quasi-momenta.

    Both sides live in the restriction basis. Samples with ``|P| <= fermi_tol``
    sit on the real Fermi set and are skipped.
    """
    xs = np.atleast_2d(np.asarray(x_samples, dtype=float).reshape(-1, V.dim))
    uhat = floquet_transform(ex.u, xs, V.q)
    psihat = floquet_transform(ex.psi, xs, V.q)
    kept, errs = [], []
    for x, uh, ph in zip(xs, uhat, psihat):
        M = restriction_matrix(V, x) - ex.lam * np.eye(V.Q)
        P = np.linalg.det(M)
        if abs(P) <= fermi_tol:
            continue
        kept.append(x)
        errs.append(np.abs(P * uh - adjugate(M) @ ph).max())
    if not kept:
        raise ResampleError("every sample lies on the real Fermi set; resample x")
    return FractionReport(np.array(kept), len(xs) - len(kept), np.array(errs), tol)


def symbol_evaluator(V: PeriodicPotential, lam: complex, j=None):
    """Analytic continuation of ``y -> u_hat(y / q, j)`` for ``u = (H0 - lam)^{-1} delta_0``.

    In the rescaled variable ``y = q x`` the symbol is 1-periodic with
    Fourier coefficients ``f_m = u(j - m q)``. Valid wherever the fiber is
    invertible, in particular for ``2 pi |Im x| < r(lam)``.
    """
    q = np.asarray(V.q, dtype=float)
    j = np.zeros(V.dim, int) if j is None else np.asarray(j, dtype=int)
    row = int(cell_index(j, V.q))
    F0 = bloch_matrix(V.q, np.zeros(V.dim))

    def f(ys):
        xs = np.asarray(ys, dtype=complex).reshape(-1, V.dim) / q
        Minv = np.linalg.inv(fiber_matrices(V, xs, lam))
        # column 0 of the restriction-basis resolvent; psi_hat = e_0
        col = np.einsum("l,klm,m->k", F0[:, row].conj(), Minv, F0[:, 0])
        return np.exp(2j * np.pi * (xs @ j)) * col

    return f
