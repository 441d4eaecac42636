import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_potential
from oracles import free_1d_green, free_1d_rate
from sharpdecay.errors import ExceptionalLambdaError, ResampleError, SpectralProximityError
from sharpdecay.floquet import floquet_transform
from sharpdecay.lattice import Box, eigen_residual
from sharpdecay.sharpness import (construct_sharp_example, fraction_representation_check,
                                  symbol_evaluator, verify_sharp_example)
from sharpdecay.spectrum import cached_bands, spectrum_distance


def test_free_lambda_3(free1):
    ex = construct_sharp_example(free1, 3.0)
    assert ex.v0 == pytest.approx(math.sqrt(5), abs=1e-12)
    n = ex.u.box.sites()[:, 0]
    ref = np.array([free_1d_green(3.0, k) for k in n])
    assert np.abs(ex.u.data - ref).max() < 1e-12
    assert ex.diagnostics["residual_max"] < 1e-10
    assert np.abs(ex.psi.data).sum() == pytest.approx(1.0)


def test_free_lambda_10(free1):
    ex = construct_sharp_example(free1, 10.0)
    assert ex.v0.real == pytest.approx(math.sqrt(96), abs=1e-10)
    rep = verify_sharp_example(ex, free1)
    assert -rep.slope == pytest.approx(2.29243, abs=1e-4)
    assert rep.mu0 == pytest.approx(math.log(4), abs=1e-8)
    assert rep.ok
    assert "sharpness_ratio:" in rep.text()


def test_free_2d_lambda_10(free2):
    ex = construct_sharp_example(free2, 10.0)
    rep = verify_sharp_example(ex, free2)
    assert rep.mu0 == pytest.approx(math.log(6 / 4), abs=1e-8)
    assert -rep.slope >= rep.mu0
    assert rep.ok


def test_dimer_gap_midpoint(dimer):
    ex = construct_sharp_example(dimer, 1.0)
    rep = verify_sharp_example(ex, dimer)
    assert rep.mu0 == pytest.approx(math.log(0.5), abs=1e-8)
    assert rep.r_lower - 0.05 <= -rep.slope <= rep.r_upper + 0.05
    assert rep.ok


def test_in_band_refused(free1):
    with pytest.raises(SpectralProximityError):
        construct_sharp_example(free1, 0.0)


def test_exceptional_guard(free1):
    with pytest.raises(ExceptionalLambdaError):
        construct_sharp_example(free1, 3.0, exceptional_tol=1.0)


@settings(max_examples=6)
@given(st.integers(0, 2 ** 31))
def test_construction_identity_random(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    V = random_potential(rng, d, 3 if d == 1 else 2)
    bands = cached_bands(V)
    lam = bands.intervals.max() + 0.5 + 3 * rng.random()
    if rng.random() < 0.5:
        lam = complex(rng.uniform(-3, 3), rng.uniform(0.5, 2))
    assert spectrum_distance(lam, bands) > 0.5
    ex = construct_sharp_example(V, lam)
    assert ex.diagnostics["residual_max"] < 1e-8
    if isinstance(lam, float):
        assert abs(ex.v0.imag) < 1e-10
    rep = verify_sharp_example(ex, V, bands)
    assert rep.checks["decay_dominance"]


@pytest.mark.parametrize("lam", [1e2, 1e3])
def test_asymptotic_sharpness(free1, lam):
    ex = construct_sharp_example(free1, lam)
    ratio = -verify_sharp_example(ex, free1).slope / math.log(lam)
    assert 1 - math.log(2) / math.log(lam) - 0.02 <= ratio <= 1.02
    assert -verify_sharp_example(ex, free1).slope == pytest.approx(free_1d_rate(lam), rel=0.02)


def test_fraction_scalar_identity(free1):
    ex = construct_sharp_example(free1, 3.0)
    x = 0.13
    uh = floquet_transform(ex.u, [[x]], (1,))[0, 0]
    ph = floquet_transform(ex.psi, [[x]], (1,))[0, 0]
    assert ph == pytest.approx(1.0)
    # with psi = -v u = delta_0 the identity carries no minus sign
    assert abs((-2 * math.cos(2 * math.pi * x) - 3) * uh - ph) < 1e-8
    rep = fraction_representation_check(ex, free1, [x])
    assert rep.max_error < 1e-8


def test_fraction_dimer_random_samples(dimer):
    ex = construct_sharp_example(dimer, 1.0)
    xs = np.random.default_rng(7).random(20)
    rep = fraction_representation_check(ex, dimer, xs)
    assert rep.ok and rep.max_error < 1e-6


def test_fraction_resample_error(free1):
    # a Fermi tolerance above every |P| rejects all samples
    ex = construct_sharp_example(free1, 3.0)
    with pytest.raises(ResampleError):
        fraction_representation_check(ex, free1, [0.1, 0.2], fermi_tol=100.0)


def test_symbol_matches_floquet_transform(dimer):
    ex = construct_sharp_example(dimer, 1.0)
    f = symbol_evaluator(dimer, 1.0)
    for x in (0.05, 0.31):
        direct = floquet_transform(ex.u, [[x]], dimer.q)[0]
        # cell index 0 component, rescaled variable y = q x
        assert abs(f(np.array([[2 * x]]))[0] - direct[0]) < 1e-10


def test_residual_is_zero_everywhere_inside(free2):
    ex = construct_sharp_example(free2, 9.0, box=Box.centered(6, 2))
    res = eigen_residual(free2, ex.v, 9.0, ex.u).restrict(Box.centered(5, 2))
    assert np.abs(res.data).max() < 1e-8
