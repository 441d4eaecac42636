"""Executable invariants of every module, run against one problem.

Each check returns ``(ok, detail)``; details are formatted with few digits so
that reruns on the same machine print identical text.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analyticity, dispersion, floquet, lattice, oracle, resolvent, sharpness, spectrum
from .errors import InvalidMuError, OutOfStripError
from .lattice import Box, Impurity, LatticeFunction, PeriodicPotential


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


def _e(x: float) -> str:
    return f"{x:.2e}"


class Suite:
    """Shared state for one verify run: the problem, derived energies and an RNG."""

    def __init__(self, V: PeriodicPotential, v: Impurity | None = None, seed: int = 0,
                 grid: int | None = None, tol: float = 1e-8):
        self.V, self.v, self.seed, self.tol = V, v, seed, tol
        self.rng = np.random.default_rng(seed)
        self.bands = spectrum.cached_bands(V, grid)
        self.top = float(self.bands.intervals[:, 1].max())
        self.bottom = float(self.bands.intervals[:, 0].min())
        d = V.dim
        # off the spectrum, with gamma = 2 so Combes-Thomas is non-vacuous in d = 1
        self.lam_out = self.top + 2.0
        # large enough for a non-vacuous lower bound
        self.lam_far = self.top + floquet.coupling_norm(V) + 2 * d + 4.0
        self.lam_cplx = 0.5 * (self.top + self.bottom) + 1.0j
        self._example = None

    def example(self):
        if self._example is None:
            self._example = sharpness.construct_sharp_example(self.V, self.lam_out)
        return self._example

    def random_x(self, k):
        return self.rng.random((k, self.V.dim)) / np.asarray(self.V.q)

    # --- lattice-core ------------------------------------------------------

    def lattice_adjacency_symmetric(self):
        box = Box.centered(4, self.V.dim)
        u = LatticeFunction(box, self.rng.normal(size=box.shape) + 1j * self.rng.normal(size=box.shape))
        w = LatticeFunction(box, self.rng.normal(size=box.shape))
        err = abs(lattice.adjacency(u).vdot(w) - u.vdot(lattice.adjacency(w)))
        return err < 1e-12, f"|<Du,w> - <u,Dw>| = {_e(err)}"

    def lattice_potential_dft_roundtrip(self):
        back = lattice.inverse_potential_dft(lattice.potential_dft(self.V))
        err = float(np.abs(back - self.V.values).max())
        return err < 1e-12, f"max error {_e(err)}"

    def lattice_periodicity(self):
        sites = self.rng.integers(-20, 20, size=(50, self.V.dim))
        shift = np.asarray(self.V.q) * self.rng.integers(-3, 4, size=self.V.dim)
        ok = np.array_equal(self.V(sites), self.V(sites + shift))
        return ok, "V(n + gamma) = V(n) on 50 sites"

    # --- floquet -----------------------------------------------------------

    def _random_function(self, L=5):
        box = Box.centered(L, self.V.dim)
        data = self.rng.normal(size=box.shape) + 1j * self.rng.normal(size=box.shape)
        return LatticeFunction(box, data)

    def floquet_plancherel(self):
        u = self._random_function()
        span = max(floquet._cells_spanned(u.box, self.V.q))
        field = floquet.floquet_field(u, self.V.q, span)
        back = floquet.inverse_floquet_box(field, u.box)
        err_rt = float(np.abs(back.data - u.data).max())
        err_pl = abs(floquet.field_inner(field, field) - u.norm() ** 2) / u.norm() ** 2
        ok = err_rt < 1e-10 and err_pl < 1e-10
        return ok, f"round trip {_e(err_rt)}, Plancherel {_e(err_pl)}"

    def floquet_fiber_equivalence(self):
        err = 0.0
        for x in self.random_x(10):
            a = np.linalg.eigvalsh(floquet.restriction_matrix(self.V, x))
            b = np.linalg.eigvalsh(floquet.fiber_matrix(self.V, x).entries)
            err = max(err, float(np.abs(a - b).max()))
        return err < 1e-10, f"max eigenvalue gap {_e(err)} over 10 x"

    def floquet_fiber_hermitian(self):
        M = floquet.fiber_matrices(self.V, self.random_x(10))
        err = float(np.abs(M - np.conj(np.swapaxes(M, -1, -2))).max())
        return err < 1e-12, f"max |M - M^*| {_e(err)}"

    def floquet_quasi_periodicity(self):
        x = self.random_x(5) + 0.1j * self.rng.normal(size=(5, self.V.dim))
        lam = self.lam_out
        base = floquet.char_det(self.V, x, lam)
        err = 0.0
        for j in range(self.V.dim):
            for step in (1.0, 1.0 / self.V.q[j]):
                shifted = x.copy()
                shifted[:, j] += step
                err = max(err, float(np.abs(floquet.char_det(self.V, shifted, lam) - base).max()
                                     / np.abs(base).max()))
        return err < 1e-10, f"relative det change under dual shifts {_e(err)}"

    def floquet_laurent_interpolation(self):
        x = self.random_x(1)[0].astype(complex)
        c = floquet.laurent_coefficients(self.V, self.lam_out, 0, x)
        Q = self.V.Q
        z = 0.3 + 0.05j
        w = np.exp(2j * np.pi * z)
        poly = sum(c[k + Q] * w ** k for k in range(-Q, Q + 1))
        xs = x.copy()
        xs[0] = z
        exact = floquet.char_det(self.V, xs, self.lam_out)
        err = abs(poly - exact) / max(1.0, abs(exact))
        return err < 1e-9, f"relative error off the unit circle {_e(err)}"

    # --- spectrum ----------------------------------------------------------

    def spectrum_band_order(self):
        a, b = self.bands.intervals[:, 0], self.bands.intervals[:, 1]
        ok = bool(np.all(np.diff(a) >= 0) and np.all(np.diff(b) >= 0) and np.all(a <= b))
        lam = self.bands.bands
        ok &= bool(np.all(lam >= a - 1e-12) and np.all(lam <= b + 1e-12))
        return ok, f"{len(a)} ordered bands containing every grid value"

    def spectrum_trace(self):
        ks = self.bands.kgrid
        trace = self.V.values.sum() + floquet.laplacian_diagonal(self.V.q, ks).real.sum(axis=1)
        err = float(np.abs(self.bands.bands.sum(axis=1) - trace).max())
        return err < 1e-10, f"sum of band values = fiber trace within {_e(err)}"

    def spectrum_enclosure(self):
        lo = self.V.values.min() - 2 * self.V.dim - 1e-12
        hi = self.V.values.max() + 2 * self.V.dim + 1e-12
        ok = self.bottom >= lo and self.top <= hi
        return ok, f"spectrum in [{self.bottom:.5f}, {self.top:.5f}] within [min V - 2d, max V + 2d]"

    def spectrum_regime(self):
        a, b = self.bands.intervals[0]
        inside = spectrum.classify_regime(0.5 * (a + b), self.bands)[0] == "interior" or a == b
        outside = spectrum.classify_regime(self.lam_out, self.bands)[0] == "outside"
        edge = spectrum.classify_regime(self.top, self.bands)[0] == "endpoint"
        return inside and outside and edge, "interior, endpoint and outside classified"

    # --- dispersion --------------------------------------------------------

    def dispersion_bracket(self):
        res = dispersion.rate(self.V, self.lam_far, bands=self.bands, seed=self.seed)
        feas = dispersion.is_feasible(self.V, res.minimizer, self.lam_far)
        ok = 0 < res.r_lower <= res.r_upper + 1e-9 and feas
        return ok, f"lambda={self.lam_far:.5f}: {res.r_lower:.5f} <= {res.r_upper:.5f}, feasible={feas}"

    def dispersion_conjugation(self):
        a = dispersion.rate_upper(self.V, self.lam_cplx, bands=self.bands, seed=self.seed).value
        b = dispersion.rate_upper(self.V, self.lam_cplx.conjugate(), bands=self.bands,
                                  seed=self.seed).value
        err = abs(a - b)
        return err < 1e-6, f"|r(lam) - r(conj lam)| = {_e(err)}"

    def dispersion_in_band_zero(self):
        a, b = self.bands.intervals[-1]
        if b - a < 1e-6:
            return True, "degenerate band, skipped"
        res = dispersion.rate_upper(self.V, 0.5 * (a + b), bands=self.bands)
        return res.value == 0.0 and res.residual < 1e-8, f"r = {res.value}, residual {_e(res.residual)}"

    # --- resolvent ---------------------------------------------------------

    def _pairs(self, k=4):
        d = self.V.dim
        return [(tuple(self.rng.integers(-3, 4, size=d)), tuple(self.rng.integers(-3, 4, size=d)))
                for _ in range(k)]

    def resolvent_herglotz(self):
        worst = math.inf
        for re in np.linspace(self.bottom - 1, self.top + 1, 4):
            g = resolvent.green(self.V, complex(re, 0.5), (0,) * self.V.dim, (0,) * self.V.dim)
            worst = min(worst, g.imag)
        return worst > 0, f"min Im G(0,0) over 4 upper-half-plane lambda = {_e(worst)}"

    def resolvent_symmetries(self):
        pairs = self._pairs()
        q1 = np.zeros(self.V.dim, int)
        q1[0] = self.V.q[0]
        trans = [(tuple(np.add(m, q1)), tuple(np.add(n, q1))) for m, n in pairs]
        swapped = [(n, m) for m, n in pairs]
        lam = self.lam_cplx
        t = resolvent.green_table(self.V, lam, pairs + trans + swapped)
        tc = resolvent.green_table(self.V, lam.conjugate(), pairs)
        e_sym = max(abs(t[p] - t[s]) for p, s in zip(pairs, swapped))
        e_tr = max(abs(t[p] - t[s]) for p, s in zip(pairs, trans))
        e_cj = max(abs(tc[p] - np.conj(t[p])) for p in pairs)
        ok = e_sym < 1e-8 and e_tr < 1e-8 and e_cj < 1e-10
        return ok, f"transpose {_e(e_sym)}, translation {_e(e_tr)}, conjugation {_e(e_cj)}"

    def resolvent_combes_thomas(self):
        lam = self.lam_out
        gamma = spectrum.spectrum_distance(lam, self.bands)
        d = self.V.dim
        box = Box.centered(4, d)
        table = resolvent.green_table(self.V, lam, [(tuple(s), (0,) * d) for s in box.sites()])
        mu_max = math.log(gamma) - math.log(2 * d)
        mus = np.arange(0.1, mu_max, 0.1) if mu_max > 0.1 else np.array([])
        ok = all(resolvent.combes_thomas_check(lam, gamma, mu, table).holds for mu in mus)
        try:
            resolvent.combes_thomas_check(lam, gamma, mu_max, table)
            ok = False
        except InvalidMuError:
            pass
        return ok, f"{len(mus)} admissible mu values, boundary mu rejected"

    def resolvent_oracle(self):
        d = self.V.dim
        if d > 2:
            return True, "d > 2, skipped"
        lam = self.lam_out
        L = 60 if d == 1 else 30
        op = oracle.truncated_matrix(self.V, None, L)
        u = oracle.truncated_resolvent_solve(op, lam, LatticeFunction.delta(op.box, (0,) * d))
        box = Box.centered(3, d)
        g = resolvent.resolvent_delta_column(self.V, lam, box)
        err = float(np.abs(u.restrict(box).data - g.data).max())
        return err < 1e-6, f"quadrature vs truncated solve {_e(err)}"

    # --- sharpness ---------------------------------------------------------

    def sharpness_construction(self):
        ex = self.example()
        rep = sharpness.verify_sharp_example(ex, self.V, self.bands)
        return rep.ok, (f"residual {_e(rep.residual_max)}, -slope {-rep.slope:.4f} "
                        f"vs mu0 {rep.mu0:.4f}, bracket [{rep.r_lower:.4f}, {rep.r_upper:.4f}]")

    def sharpness_fraction(self):
        ex = self.example()
        rep = sharpness.fraction_representation_check(ex, self.V, self.random_x(20))
        return rep.ok, f"max error {_e(rep.max_error)} at {len(rep.xs)} samples"

    # --- analyticity -------------------------------------------------------

    def analyticity_roundtrip(self):
        seq = analyticity.CoefficientSeq.geometric(0.5)
        C2 = math.log(2) / (2 * math.pi)
        ev = analyticity.strip_evaluator(seq, 0.95 * C2)
        err = max(abs(analyticity.strip_to_coeff_bound(ev, C2, n).coeff - 0.5 ** abs(n))
                  for n in (0, 1, -2, 5))
        return err < 1e-8, f"max coefficient error {_e(err)}"

    def analyticity_strip_edge(self):
        seq = analyticity.CoefficientSeq.geometric(0.5)
        edge = math.log(2) / (2 * math.pi)
        inside = analyticity.coeffs_to_strip_eval(seq, [0.99j * edge]).tail_bound < 1e-10
        try:
            analyticity.coeffs_to_strip_eval(seq, [1.01j * edge])
            rejected = False
        except OutOfStripError:
            rejected = True
        return inside and rejected, "99% of the strip converges, 101% rejected"

    def analyticity_sharp_symbol(self):
        res = dispersion.rate(self.V, self.lam_out, bands=self.bands, seed=self.seed)
        ev = sharpness.symbol_evaluator(self.V, self.lam_out)
        # strip in the rescaled variable y = q x, along the dominant (first) axis
        C2 = self.V.q[0] * res.r_lower / (2 * math.pi)
        if C2 <= 0:
            return True, "vacuous lower bound, skipped"
        worst = 0.0
        for k in range(0, 5):
            n = np.zeros(self.V.dim, int)
            n[0] = k
            worst = max(worst, analyticity.strip_to_coeff_bound(ev, C2, n).C3)
        return worst <= 1 + 1e-9, f"max measured C3 {worst:.4f}"

    # --- oracle ------------------------------------------------------------

    def oracle_hermitian(self):
        if not self._real_v():
            return True, "complex impurity, skipped"
        L = 20 if self.V.dim == 1 else 6
        w = np.linalg.eigvals(oracle.truncated_matrix(self.V, self.v, L).dense())
        err = float(np.abs(w.imag).max())
        return err < 1e-12, f"max |Im eigenvalue| {_e(err)}"

    def oracle_bracketing(self):
        L = 20 if self.V.dim == 1 else 6
        op = oracle.truncated_matrix(self.V, self.v, L)
        w = np.linalg.eigvalsh(op.dense().real) if self._real_v() else np.linalg.eigvals(op.dense()).real
        vn = self.v.sup_norm(op.box) if self.v is not None else 0.0
        ok = w.min() >= self.bottom - vn - 1e-6 and w.max() <= self.top + vn + 1e-6
        return ok, f"truncated spectrum [{w.min():.5f}, {w.max():.5f}]"

    def _real_v(self):
        if self.v is None or self.v.is_zero():
            return True
        if self.v.family is not None:
            return complex(self.v.amplitude).imag == 0
        return all(complex(val).imag == 0 for val in self.v.support.values())

    def oracle_probe(self):
        if self.v is not None and not self.v.is_zero() and not math.isinf(self.v.decay_certificate):
            return True, "impurity is not super-exponential, skipped"
        if not self._real_v():
            return True, "complex impurity, skipped"
        a, b = self.bands.union()[0]
        pad = 0.025 * (b - a)
        Ls = (20, 40, 80) if self.V.dim == 1 else (6, 10, 14)
        rep = oracle.embedded_eigenvalue_probe(self.V, self.v, (a + pad, b - pad), Ls)
        return not rep.candidates, (f"min in-band boundary mass {rep.min_ratio():.3e}, "
                                    f"{len(rep.candidates)} candidates (non-conclusive)")

    def checks(self):
        return [(name, getattr(self, name)) for name in CHECK_ORDER]


CHECK_ORDER = [
    "lattice_adjacency_symmetric", "lattice_potential_dft_roundtrip", "lattice_periodicity",
    "floquet_plancherel", "floquet_fiber_equivalence", "floquet_fiber_hermitian",
    "floquet_quasi_periodicity", "floquet_laurent_interpolation",
    "spectrum_band_order", "spectrum_trace", "spectrum_enclosure", "spectrum_regime",
    "dispersion_bracket", "dispersion_conjugation", "dispersion_in_band_zero",
    "resolvent_herglotz", "resolvent_symmetries", "resolvent_combes_thomas", "resolvent_oracle",
    "sharpness_construction", "sharpness_fraction",
    "analyticity_roundtrip", "analyticity_strip_edge", "analyticity_sharp_symbol",
    "oracle_hermitian", "oracle_bracketing", "oracle_probe",
]


def run_suite(V: PeriodicPotential, v: Impurity | None = None, seed: int = 0,
              grid: int | None = None, tol: float = 1e-8) -> list[CheckResult]:
    """Run every invariant; an exception inside a check counts as a failure."""
    suite = Suite(V, v, seed, grid, tol)
    out = []
    for name, fn in suite.checks():
        label = name.replace("_", ".", 1)
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(label, bool(ok), detail))
    return out
