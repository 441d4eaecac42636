import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import free_1d_rate, free_2d_rate, rate_2d_bruteforce
from sharpdecay.dispersion import (asymptotic_ratio_sweep, companion_roots, is_feasible, rate,
                                   rate_lower, rate_upper, slice_roots, sweep_to_csv)
from sharpdecay.errors import DomainError
from sharpdecay.floquet import char_det, coupling_norm
from sharpdecay.lattice import PeriodicPotential


@given(st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=6))
def test_companion_roots_against_monic_expansion(roots):
    coeffs = np.poly(roots)[::-1]
    found = companion_roots(coeffs)
    assert len(found) == len(roots)
    for r in roots:
        assert np.min(np.abs(found - r)) < 1e-5 * max(1, abs(r))


@pytest.mark.parametrize("lam", [3, 5, 10, 100, -7])
def test_free_1d_closed_form(free1, lam):
    up = rate_upper(free1, lam)
    assert up.value == pytest.approx(free_1d_rate(lam), abs=1e-10)
    assert up.residual < 1e-8


def test_free_1d_slice_roots(free1):
    roots = slice_roots(free1, 3.0, 0)
    assert len(roots) == 2
    assert np.allclose(np.abs(roots.imag), free_1d_rate(3) / (2 * np.pi))


def test_dimer_in_gap(dimer):
    res = rate(dimer, 1.0)
    assert res.r_lower == 0.0
    assert res.r_upper == pytest.approx(0.48121182505960336, abs=1e-9)
    assert is_feasible(dimer, res.minimizer, 1.0)


def test_in_band_rate_is_zero(dimer):
    up = rate_upper(dimer, -0.5)
    assert up.value == 0.0 and up.method == "in-band"
    assert abs(char_det(dimer, up.minimizer, -0.5)) < 1e-10


def test_free_2d_beats_slices(free2):
    up = rate_upper(free2, 10.0)
    assert up.value == pytest.approx(free_2d_rate(10.0), abs=1e-8)
    assert up.value < 2.2158 < free_1d_rate(10.0)


@pytest.mark.parametrize("seed", [0, 1])
def test_d2_against_bruteforce_oracle(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(2, 2)).round(3)
    V = PeriodicPotential((2, 2), vals)
    lam = 7.5
    ref = rate_2d_bruteforce(vals, lam, n_re=12, n_im=12)
    up = rate_upper(V, lam)
    assert up.value <= ref + 1e-6
    assert up.value == pytest.approx(ref, abs=1e-5)


def test_lower_bound_formula():
    assert rate_lower(10.0, 0.0, 1) == pytest.approx(math.log(5))
    assert rate_lower(3.0, 2.0, 1) == 0.0


@settings(max_examples=6)
@given(st.integers(0, 2 ** 31))
def test_bracket_holds_for_random_potentials(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    q = tuple(int(k) for k in rng.integers(1, 3, size=d))
    V = PeriodicPotential(q, rng.normal(size=q))
    lam = float(coupling_norm(V) + 2 * d + 1 + 5 * rng.random()) * rng.choice([-1, 1])
    res = rate(V, lam)
    assert 0 < res.r_lower <= res.r_upper + 1e-9
    assert is_feasible(V, res.minimizer, lam)


def test_conjugate_energy_same_rate(dimer):
    a = rate_upper(dimer, 1.0 + 0.5j).value
    b = rate_upper(dimer, 1.0 - 0.5j).value
    assert a == pytest.approx(b, abs=1e-10)


def test_sweep(free1):
    rows = asymptotic_ratio_sweep(free1, [100.0, 1000.0])
    assert rows[1].ratio_upper > rows[0].ratio_upper
    csv = sweep_to_csv(rows)
    assert csv.splitlines()[0].startswith("lambda_re,lambda_im,r_lower,r_upper")
    with pytest.raises(DomainError):
        asymptotic_ratio_sweep(free1, [1.5])


def test_deterministic_with_seed():
    V = PeriodicPotential((2, 2), [[0.0, 1.0], [0.5, -1.0]])
    a = rate_upper(V, 8.0, seed=3)
    b = rate_upper(V, 8.0, seed=3)
    assert a.value == b.value and np.array_equal(a.minimizer, b.minimizer)
