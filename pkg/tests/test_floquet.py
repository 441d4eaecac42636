import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import potentials
from sharpdecay.errors import AliasingError
from sharpdecay.floquet import (adjugate, bloch_matrix, char_det, char_det_grad, coupling_matrix,
                                field_inner, fiber_matrix, floquet_field, floquet_transform,
                                inverse_floquet, inverse_floquet_box, laurent_coefficients,
                                restriction_matrix, svd_adjugate)
from sharpdecay.lattice import Box, LatticeFunction, PeriodicPotential


def _random_u(rng, d, L=4):
    box = Box.centered(L, d)
    return LatticeFunction(box, rng.normal(size=box.shape) + 1j * rng.normal(size=box.shape))


def test_transform_of_delta_is_constant():
    u = LatticeFunction.delta(Box.centered(3, 1), (0,))
    assert np.allclose(floquet_transform(u, [0.37], (1,)), [1.0])


def test_free_fiber_is_the_symbol():
    x = 0.13
    M = fiber_matrix(PeriodicPotential.free(1), [x]).entries
    assert np.isclose(M[0, 0], -2 * np.cos(2 * np.pi * x))


def test_dimer_fiber_closed_form():
    V = PeriodicPotential((2,), [0.0, 2.0])
    x = 0.1
    w = np.linalg.eigvalsh(restriction_matrix(V, [x]))
    # eigenvalues of [[0, -(1 + e^{-4 pi i x})], [.., 2]]
    off = abs(1 + np.exp(-4j * np.pi * x))
    exact = sorted([1 - np.sqrt(1 + off ** 2), 1 + np.sqrt(1 + off ** 2)])
    assert np.allclose(w, exact, atol=1e-12)


@given(st.integers(0, 2 ** 31), st.integers(1, 2), st.integers(1, 3))
def test_round_trip_and_plancherel(seed, d, q):
    rng = np.random.default_rng(seed)
    qs = (q,) * d
    u, w = _random_u(rng, d), _random_u(rng, d)
    n = 9 // q + 1
    fu, fw = floquet_field(u, qs, n), floquet_field(w, qs, n)
    back = inverse_floquet_box(fu, u.box)
    assert np.abs(back.data - u.data).max() < 1e-10
    assert abs(field_inner(fu, fw) - u.vdot(w)) < 1e-10


def test_aliasing_is_refused():
    u = LatticeFunction.delta(Box.centered(6, 1), (0,))
    f = floquet_field(u, (1,), 4)
    with pytest.raises(AliasingError):
        inverse_floquet(f, (0,))


@given(potentials(), st.integers(0, 2 ** 31))
def test_fiber_and_restriction_are_unitarily_equivalent(V, seed):
    x = np.random.default_rng(seed).random(V.dim) / np.asarray(V.q)
    F = bloch_matrix(V.q, x)
    R = restriction_matrix(V, x)
    M = fiber_matrix(V, x).entries
    assert np.abs(F @ R @ F.conj().T - M).max() < 1e-12
    assert np.allclose(np.linalg.eigvalsh(R), np.linalg.eigvalsh(M), atol=1e-10)


@given(potentials(), st.integers(0, 2 ** 31))
def test_det_invariant_under_dual_shifts(V, seed):
    rng = np.random.default_rng(seed)
    x = rng.random(V.dim) + 0.2j * rng.normal(size=V.dim)
    lam = 1.3 + 0.4j
    P = char_det(V, x, lam)
    for j in range(V.dim):
        for step in (1.0, 1.0 / V.q[j]):
            y = x.copy()
            y[j] += step
            assert abs(char_det(V, y, lam) - P) <= 1e-10 * max(1, abs(P))


def test_integer_shift_is_exact_for_the_matrix():
    V = PeriodicPotential((2, 3), np.arange(6.0).reshape(2, 3))
    x = np.array([0.1 + 0.05j, 0.3])
    a = fiber_matrix(V, x).entries
    b = fiber_matrix(V, x + np.array([1, 0])).entries
    assert np.abs(a - b).max() < 1e-12


def test_cell_shift_is_a_permutation_similarity():
    V = PeriodicPotential((3,), [0.0, 1.0, -2.0])
    x = np.array([0.05 + 0.1j])
    a = fiber_matrix(V, x).entries
    b = fiber_matrix(V, x + 1 / 3).entries
    assert not np.allclose(a, b)
    # D at x + 1/3 is D at x with the cell index advanced by one
    P = np.roll(np.eye(3), 1, axis=1)
    assert np.abs(P @ a @ P.T - b).max() < 1e-12


@given(potentials(max_dim=1, max_period=3))
def test_coupling_matrix_is_hermitian_circulant(V):
    B = coupling_matrix(V)
    assert np.allclose(B, B.conj().T)
    assert np.isclose(np.trace(B).real, V.values.sum())


def test_adjugate_routes_agree(rng):
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    adj = adjugate(A)
    assert np.allclose(A @ adj, np.linalg.det(A) * np.eye(5), atol=1e-10)
    assert np.allclose(svd_adjugate(A), adj, atol=1e-10)
    # rank-deficient: adj is still defined and nonzero
    S = A.copy()
    S[0] = S[1]
    assert np.allclose(S @ adjugate(S), 0, atol=1e-10)
    assert np.allclose(svd_adjugate(S), adjugate(S), atol=1e-9)


def test_char_det_gradient_matches_finite_differences():
    V = PeriodicPotential((2, 2), [[0.0, 1.0], [0.5, -1.0]])
    x = np.array([0.1 + 0.05j, 0.2 - 0.03j])
    P, g = char_det_grad(V, x, 5.0)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (char_det(V, x + e, 5.0) - char_det(V, x - e, 5.0)) / (2 * h)
        assert abs(fd - g[j]) < 1e-6 * max(1, abs(g[j]))


@given(potentials(), st.floats(0.0, 0.2))
def test_laurent_polynomial_reproduces_det_off_circle(V, im):
    x = np.full(V.dim, 0.2 + 0.0j)
    c = laurent_coefficients(V, 3.0, 0, x)
    Q = V.Q
    z = 0.31 + 1j * im
    w = np.exp(2j * np.pi * z)
    poly = sum(c[k + Q] * w ** k for k in range(-Q, Q + 1))
    y = x.copy()
    y[0] = z
    exact = char_det(V, y, 3.0)
    assert abs(poly - exact) <= 1e-9 * max(1, abs(exact))
