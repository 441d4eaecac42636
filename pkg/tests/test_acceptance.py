"""The thirteen acceptance criteria, one test each.

Every test records a one-line verdict that the terminal summary prints as
``criterion NN: PASS/FAIL detail``.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from conftest import random_potential
from oracles import dense_green, free_1d_green, free_1d_rate
from sharpdecay.analyticity import CoefficientSeq, strip_evaluator, strip_to_coeff_bound
from sharpdecay.dispersion import rate, rate_upper
from sharpdecay.floquet import (field_inner, fiber_matrix, floquet_field, inverse_floquet_box,
                                restriction_matrix)
from sharpdecay.lattice import Box, Impurity, LatticeFunction, PeriodicPotential
from sharpdecay.oracle import embedded_eigenvalue_probe, truncated_matrix, truncated_resolvent_solve
from sharpdecay.resolvent import combes_thomas_check, green, green_table
from sharpdecay.sharpness import (construct_sharp_example, fraction_representation_check,
                                  symbol_evaluator, verify_sharp_example)
from sharpdecay.spectrum import band_structure, cached_bands, default_grid, spectrum_distance

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_criterion_01_band_structure(record):
    t0 = time.perf_counter()
    errs = []
    for d in (1, 2):
        bs = band_structure(PeriodicPotential.free(d), default_grid(d))
        errs.append(np.abs(bs.intervals - [[-2 * d, 2 * d]]).max())
    bs = band_structure(PeriodicPotential((2,), [0.0, 2.0]), default_grid(1))
    s5 = math.sqrt(5)
    errs.append(np.abs(bs.intervals - [[1 - s5, 0.0], [2.0, 1 + s5]]).max())
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-4 and dt < 5
    record(1, ok, f"max endpoint error {max(errs):.1e} (tol 1e-4), {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_fiber_equivalence(record):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 3))
        V = random_potential(rng, d, 3)
        x = rng.random(d)
        a = np.linalg.eigvalsh(restriction_matrix(V, x))
        b = np.linalg.eigvalsh(fiber_matrix(V, x).entries)
        worst = max(worst, np.abs(a - b).max())
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and dt < 10
    record(2, ok, f"100 instances, max eigenvalue gap {worst:.1e} (tol 1e-10), {dt:.2f} s (< 10 s)")
    assert ok


def test_criterion_03_plancherel(record):
    rng = np.random.default_rng(3)
    worst_rt = worst_ip = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 3))
        q = tuple(int(k) for k in rng.integers(1, 4, size=d))
        box = Box.centered(4, d)
        u, w = (LatticeFunction(box, rng.normal(size=box.shape) + 1j * rng.normal(size=box.shape))
                for _ in range(2))
        n = 9 // min(q) + 1
        fu, fw = floquet_field(u, q, n), floquet_field(w, q, n)
        worst_rt = max(worst_rt, np.abs(inverse_floquet_box(fu, box).data - u.data).max())
        worst_ip = max(worst_ip, abs(field_inner(fu, fw) - u.vdot(w)))
    ok = max(worst_rt, worst_ip) < 1e-10
    record(3, ok, f"50 vectors, round trip {worst_rt:.1e}, inner product {worst_ip:.1e} (tol 1e-10)")
    assert ok


def test_criterion_04_free_rate(record):
    t0 = time.perf_counter()
    V = PeriodicPotential.free(1)
    errs = [abs(rate_upper(V, lam).value - free_1d_rate(lam)) for lam in (3, 5, 10, 100)]
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-6 and dt < 30
    record(4, ok, f"max |r_upper - closed form| {max(errs):.1e} (tol 1e-6), {dt:.2f} s (< 30 s)")
    assert ok


def test_criterion_05_asymptotics(record):
    # width is read as the normalised bracket (r_upper - r_lower) / ln(lam); the
    # absolute width tends to ln(2d) from below and so cannot shrink
    ok, parts = True, []
    for d in (1, 2):
        V = PeriodicPotential.free(d)
        widths = []
        for lam in (1e2, 1e3, 1e4):
            res = rate(V, lam)
            ln = math.log(lam)
            lo = 1 - math.log(2 * d) / ln - 0.02
            for r in (res.r_lower / ln, res.r_upper / ln):
                ok &= lo <= r <= 1.05
            widths.append((res.r_upper - res.r_lower) / ln)
        ok &= all(a > b for a, b in zip(widths, widths[1:]))
        parts.append(f"d={d} widths " + ", ".join(f"{w:.4f}" for w in widths))
    record(5, ok, "ratios in band; normalised " + "; ".join(parts))
    assert ok


def test_criterion_06_multicoordinate(record):
    val = rate_upper(PeriodicPotential.free(2), 10.0).value
    ok = val <= 2.2158 + 1e-4 and val < 2.29243
    record(6, ok, f"free d=2 lambda=10 r_upper {val:.6f} (<= 2.2158, < 2.29243 single slice)")
    assert ok


def test_criterion_07_green(record):
    V1 = PeriodicPotential.free(1)
    closed = max(abs(green(V1, lam, n, 0) - free_1d_green(lam, n))
                 for lam in (3.0, 10.0) for n in range(0, 7))
    worst = 0.0
    rng = np.random.default_rng(7)
    for d in (1, 2):
        V = random_potential(rng, d, 2)
        lam = complex(cached_bands(V).intervals.max() + 1.0, 0.3)
        L = 40 if d == 1 else 18
        op = truncated_matrix(V, None, L)
        pairs = [((0,) * d, (0,) * d), ((3,) + (1,) * (d - 1), (0,) * d),
                 ((2,) * d, (-2,) + (0,) * (d - 1)), ((-1,) * d, (4,) + (0,) * (d - 1))]
        for m, n in pairs:
            assert sum(abs(a - b) for a, b in zip(m, n)) <= 6
            u = truncated_resolvent_solve(op, lam, LatticeFunction.delta(Box.centered(L, d), n))
            worst = max(worst, abs(u.at([m])[0] - green(V, lam, m, n)))
        # the dense reference agrees as well
        worst = max(worst, abs(dense_green(V.values, lam, L if d == 1 else 10, (1,) * d)
                               - green(V, lam, (1,) * d, (0,) * d)))
    ok = closed < 1e-7 and worst < 1e-6
    record(7, ok, f"closed forms {closed:.1e} (tol 1e-7), truncated oracle {worst:.1e} (tol 1e-6)")
    assert ok


def test_criterion_08_combes_thomas(record):
    rng = np.random.default_rng(8)
    checked = 0
    ok = True
    for _ in range(20):
        d = int(rng.integers(1, 3))
        V = random_potential(rng, d, 2)
        bands = cached_bands(V)
        # gamma > 2d + 1 so that the admissible range of mu is not empty
        target = 2 * d + 1 + 3 * rng.random()
        if rng.random() < 0.5:
            lam = bands.intervals.max() + target
        else:
            lam = complex(bands.intervals.min() + rng.random() * 2, target)
        gamma = spectrum_distance(lam, bands)
        assert gamma > 1
        sites = [tuple(s) for s in Box.centered(3, d).sites()]
        pairs = [(s, (0,) * d) for s in sites] + [(s, (1,) * d) for s in sites[::3]]
        table = green_table(V, lam, pairs)
        for mu in np.arange(0.1, math.log(gamma) - math.log(2 * d), 0.1):
            ok &= combes_thomas_check(lam, gamma, mu, table).holds
            checked += 1
    record(8, ok, f"20 random (V, lambda), {checked} (instance, mu) pairs checked")
    assert ok


def _sharp_corpus():
    rng = np.random.default_rng(9)
    corpus = [(PeriodicPotential.free(1), lam) for lam in (3.0, 10.0, 100.0)]
    corpus += [(PeriodicPotential.free(2), 10.0), (PeriodicPotential((2,), [0.0, 2.0]), 1.0),
               (PeriodicPotential((2,), [0.0, 2.0]), 1.0 + 0.5j)]
    V = random_potential(rng, 2, 2)
    corpus += [(V, cached_bands(V).intervals.max() + 1.0), (V, complex(0.3, 1.0))]
    V = random_potential(rng, 1, 3)
    corpus += [(V, cached_bands(V).intervals.min() - 0.7)]
    return corpus


def test_criterion_09_sharp_example(record):
    ok, worst_res, worst_free = True, 0.0, 0.0
    for V, lam in _sharp_corpus():
        ex = construct_sharp_example(V, lam)
        rep = verify_sharp_example(ex, V)
        worst_res = max(worst_res, rep.residual_max)
        ok &= rep.residual_max < 1e-8 and -rep.slope >= rep.mu0 - 0.05
        if complex(lam).imag == 0:
            ok &= abs(ex.v0.imag) < 1e-10
        if V.is_zero() and V.dim == 1:
            rel = abs(-rep.slope - free_1d_rate(lam)) / free_1d_rate(lam)
            worst_free = max(worst_free, rel)
            ok &= rel <= 0.02
    record(9, ok, f"{len(_sharp_corpus())} examples, residual {worst_res:.1e}, "
                  f"free d=1 slope error {100 * worst_free:.2f}% (tol 2%)")
    assert ok


def test_criterion_10_fraction(record):
    rng = np.random.default_rng(10)
    worst = 0.0
    for V, lam in _sharp_corpus():
        ex = construct_sharp_example(V, lam)
        xs = rng.random((20, V.dim)) / np.asarray(V.q)
        worst = max(worst, fraction_representation_check(ex, V, xs).max_error)
    ok = worst < 1e-6
    record(10, ok, f"20 samples per example, max componentwise error {worst:.1e} (tol 1e-6)")
    assert ok


def test_criterion_11_analyticity(record):
    rng = np.random.default_rng(11)
    worst, C3 = 0.0, []
    for d in (1, 2):
        C2 = 1.5
        ns = [tuple(int(a) for a in n) for n in rng.integers(-3, 4, size=(5, d))]
        coeffs = {n: rng.uniform(-1, 1) * math.exp(-C2 * max(map(abs, n))) for n in ns}
        R = 0.9 * C2 / (2 * math.pi)
        f = strip_evaluator(CoefficientSeq(d, 1.0, C2, coeffs=coeffs), R)
        for n in coeffs:
            out = strip_to_coeff_bound(f, R, n)
            worst = max(worst, abs(out.coeff - coeffs[n]))
            C3.append(out.C3)
    R = 0.9 * math.log(2) / (2 * math.pi)
    f = strip_evaluator(CoefficientSeq.geometric(0.5), R)
    for n in (0, 2, -5):
        out = strip_to_coeff_bound(f, R, [n])
        worst = max(worst, abs(out.coeff - 0.5 ** abs(n)))
        C3.append(out.C3)
    lam = 3.0
    f = symbol_evaluator(PeriodicPotential.free(1), lam)
    C2 = 0.9 * free_1d_rate(lam) / (2 * math.pi) / 0.95
    for n in range(-12, 13):
        out = strip_to_coeff_bound(f, C2, [n])
        worst = max(worst, abs(out.coeff - free_1d_green(lam, -n)))
        C3.append(out.C3)
    C3 = np.array(C3)
    ok = worst < 1e-8 and np.all(np.isfinite(C3)) and C3.max() <= 1.0
    record(11, ok, f"round trip {worst:.1e} (tol 1e-8), measured C3 in "
                   f"[{C3.min():.2e}, {C3.max():.3f}] over {len(C3)} coefficients")
    assert ok


def test_criterion_12_probe(record):
    V = PeriodicPotential.free(1)
    Ls = [20, 40, 80]
    band = embedded_eigenvalue_probe(
        V, Impurity(family="superexp", amplitude=5.0, rate=1.0, gamma=2.0), (-1.9, 1.9), Ls)
    gap = embedded_eigenvalue_probe(V, Impurity.single_site(5.0, (0,)), (-2.0, 2.0), Ls,
                                    window=(2.5, 10.0))
    inb = [min(r.boundary_mass_ratio for r in band.rows if r.L == L and r.in_band) for L in Ls]
    bound = [min(r.boundary_mass_ratio for r in gap.rows if r.L == L) for L in Ls]
    ok = min(inb) > 1e-3 and not band.candidates and all(
        b < math.exp(-L / 2) for b, L in zip(bound, Ls))
    record(12, ok, "in-band min ratio " + ", ".join(f"{r:.3f}" for r in inb)
           + "; gap state " + ", ".join(f"{b:.1e}" for b in bound) + " (< exp(-L/2))")
    assert ok


def test_criterion_13_determinism(record, tmp_path):
    names = ["free_1d", "dimer_1d", "superexp_1d"]
    ok, same = True, []
    for name in names:
        outs = []
        for k in range(2):
            out = tmp_path / f"{name}_{k}.txt"
            res = subprocess.run([sys.executable, "-m", "sharpdecay", "verify", "--config",
                                  str(CONFIGS / f"{name}.yaml"), "--out", str(out)],
                                 capture_output=True, text=True, timeout=600)
            ok &= res.returncode == 0
            outs.append(out.read_bytes())
        same.append(outs[0] == outs[1])
    ok &= all(same)
    record(13, ok, f"verify run twice on {', '.join(names)}: byte-identical {sum(same)}/{len(same)}")
    assert ok
