"""Floquet transform and the fiber matrices of H0 = -Delta + V.

Quasi-momenta ``x`` live in C^d; real parts are taken modulo the dual lattice
with cell ``prod [0, 1/q_j)``. Vectors indexed by the cell W use lexicographic
order, matching :meth:`PeriodicPotential.cell_sites`.

Two bases are in play. The *restriction* basis is the one in which the
Floquet transform ``u_hat(x, j)`` lives and in which H0 restricted to W with
quasi-periodic boundary conditions acts (:func:`restriction_matrix`). The
*Bloch* basis diagonalises the Laplacian part (:func:`fiber_matrix`,
``D^x + B``). They are related by :func:`bloch_matrix`:
``fiber = F restriction F^*``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AliasingError
from .lattice import Box, LatticeFunction, PeriodicPotential, potential_dft

TWO_PI = 2 * math.pi


def split_sites(sites, q):
    """Write ``n = j + m * q`` with ``j`` in W; returns ``(j, m)``."""
    sites = np.asarray(sites, dtype=int)
    j = np.mod(sites, q)
    return j, (sites - j) // np.asarray(q)


def cell_index(j, q) -> np.ndarray:
    j = np.asarray(j, dtype=int)
    return np.ravel_multi_index(tuple(np.moveaxis(j, -1, 0)), tuple(q))


def dual_grid(q, n_per_axis) -> np.ndarray:
    """Uniform grid on the dual cell: ``x_j = k / (N_j q_j)``, ``k < N_j``.

    Returns a ``(prod N, d)`` array in lexicographic order.
    """
    q = tuple(q)
    n = np.broadcast_to(np.asarray(n_per_axis, dtype=int), (len(q),))
    axes = [np.arange(nj) / (nj * qj) for nj, qj in zip(n, q)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def floquet_transform(u: LatticeFunction, x, q) -> np.ndarray:
    """``u_hat(x, j) = sum_m exp(-2 pi i <m*q, x>) u(j + m*q)`` for finitely supported u.

    ``x`` may be a single d-vector (result shape ``(Q,)``) or a ``(K, d)``
    batch (result ``(K, Q)``).
    """
    q = tuple(q)
    x = np.asarray(x)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    sites = u.box.sites()
    vals = u.data.ravel()
    keep = vals != 0
    sites, vals = sites[keep], vals[keep]
    j, m = split_sites(sites, q)
    col = cell_index(j, q)
    phase = np.exp(-2j * np.pi * (xs @ (m * np.asarray(q)).T))
    out = np.zeros((len(xs), math.prod(q)), complex)
    for c in np.unique(col):
        sel = col == c
        out[:, c] = phase[:, sel] @ vals[sel]
    return out[0] if single else out


@dataclass
class FloquetField:
    """Samples of a W-vector valued function on a uniform dual-cell grid."""

    q: tuple[int, ...]
    n_per_axis: tuple[int, ...]
    values: np.ndarray
    source_box: Box | None = None

    def __post_init__(self):
        self.q = tuple(self.q)
        self.n_per_axis = tuple(int(n) for n in self.n_per_axis)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (math.prod(self.n_per_axis), math.prod(self.q)):
            raise ValueError("field values must have shape (grid points, Q)")

    @property
    def points(self) -> np.ndarray:
        return dual_grid(self.q, self.n_per_axis)


def floquet_field(u: LatticeFunction, q, n_per_axis) -> FloquetField:
    q = tuple(q)
    n = tuple(np.broadcast_to(np.asarray(n_per_axis, dtype=int), (len(q),)))
    return FloquetField(q, n, floquet_transform(u, dual_grid(q, n), q), u.box)


def _cells_spanned(box: Box, q) -> list[int]:
    lo = np.floor_divide(box.lo, q)
    hi = np.floor_divide(box.hi, q)
    return list(hi - lo + 1)


def inverse_floquet(field: FloquetField, site) -> complex:
    """Trapezoid quadrature of ``exp(2 pi i <m*q, x>) u_hat(x, j)`` over the dual cell.

    Exact when the grid has at least as many points per axis as the source
    box spans periods; otherwise :class:`AliasingError` is raised.
    """
    return complex(inverse_floquet_sites(field, np.atleast_2d(site))[0])


def inverse_floquet_sites(field: FloquetField, sites) -> np.ndarray:
    if field.source_box is not None:
        span = _cells_spanned(field.source_box, field.q)
        if any(n < s for n, s in zip(field.n_per_axis, span)):
            raise AliasingError(
                f"grid {field.n_per_axis} too coarse for a box spanning {span} periods")
    sites = np.atleast_2d(np.asarray(sites, dtype=int))
    j, m = split_sites(sites, field.q)
    col = cell_index(j, field.q)
    pts = field.points
    phase = np.exp(2j * np.pi * (pts @ (m * np.asarray(field.q)).T))
    return np.einsum("kn,kn->n", phase, field.values[:, col]) / len(pts)


def inverse_floquet_box(field: FloquetField, box: Box) -> LatticeFunction:
    return LatticeFunction(box, inverse_floquet_sites(field, box.sites()).reshape(box.shape))


def field_inner(f1: FloquetField, f2: FloquetField) -> complex:
    """Grid approximation of ``<f1, f2>`` in L^2(dual torus, C^W; dx/|torus|)."""
    return complex(np.vdot(f1.values, f2.values) / len(f1.values))


# --- fiber matrices -------------------------------------------------------

_B_CACHE: dict = {}


def coupling_matrix(V: PeriodicPotential) -> np.ndarray:
    """``B(n, n') = Q^{-1/2} V_hat((n - n') / q)`` on W x W."""
    key = V.key
    if key not in _B_CACHE:
        vhat = potential_dft(V)
        cells = V.cell_sites()
        diff = np.mod(cells[:, None, :] - cells[None, :, :], V.q)
        B = vhat[tuple(np.moveaxis(diff, -1, 0))] / math.sqrt(V.Q)
        B.setflags(write=False)
        _B_CACHE[key] = B
    return _B_CACHE[key]


def coupling_norm(V: PeriodicPotential) -> float:
    return float(np.linalg.norm(coupling_matrix(V), 2))


def laplacian_diagonal(q, x) -> np.ndarray:
    """Diagonal of ``D^x``: ``-sum_j 2 cos(2 pi (n_j / q_j + x_j))`` for n in W.

    Broadcasts over leading axes of ``x``; returns ``(..., Q)``.
    """
    q = tuple(q)
    x = np.asarray(x, dtype=complex)
    cells = Box((0,) * len(q), tuple(k - 1 for k in q)).sites()
    phase = cells / np.asarray(q) + x[..., None, :]
    return -2 * np.cos(TWO_PI * phase).sum(axis=-1)


def laplacian_diagonal_grad(q, x) -> np.ndarray:
    """``d/dx_j`` of :func:`laplacian_diagonal`; shape ``(..., Q, d)``."""
    q = tuple(q)
    x = np.asarray(x, dtype=complex)
    cells = Box((0,) * len(q), tuple(k - 1 for k in q)).sites()
    phase = cells / np.asarray(q) + x[..., None, :]
    return 2 * TWO_PI * np.sin(TWO_PI * phase)


@dataclass
class FiberMatrix:
    """``D^x + B - lam I`` at one quasi-momentum (``lam=None`` means H0_tilde(x))."""

    entries: np.ndarray
    x: np.ndarray
    lam: complex | None = None

    @property
    def Q(self) -> int:
        return self.entries.shape[0]

    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))


def fiber_matrices(V: PeriodicPotential, xs, lam=None) -> np.ndarray:
    """Batched :func:`fiber_matrix` entries, shape ``(..., Q, Q)``."""
    diag = laplacian_diagonal(V.q, xs)
    if lam is not None:
        diag = diag - lam
    M = np.broadcast_to(coupling_matrix(V), diag.shape[:-1] + (V.Q, V.Q)).astype(complex)
    idx = np.arange(V.Q)
    M[..., idx, idx] += diag
    return M


def fiber_matrix(V: PeriodicPotential, x, lam=None) -> FiberMatrix:
    x = np.asarray(x, dtype=complex).reshape(V.dim)
    return FiberMatrix(fiber_matrices(V, x, lam), x, lam)


def bloch_matrix(q, x) -> np.ndarray:
    """``F^x(l, n) = Q^{-1/2} exp(-2 pi i sum_j (l_j / q_j + x_j) n_j)`` on W x W."""
    q = tuple(q)
    cells = Box((0,) * len(q), tuple(k - 1 for k in q)).sites()
    x = np.asarray(x, dtype=complex)
    k = cells / np.asarray(q) + x
    return np.exp(-2j * np.pi * (k @ cells.T)) / math.sqrt(len(cells))


def restriction_matrix(V: PeriodicPotential, x) -> np.ndarray:
    """H0 restricted to W under ``u(n + m*q) = exp(2 pi i <m*q, x>) u(n)``.

    Built straight from the adjacency rule, independently of
    :func:`fiber_matrix`.
    """
    x = np.asarray(x, dtype=float).reshape(V.dim)
    cells = V.cell_sites()
    Q = V.Q
    H = np.zeros((Q, Q), complex)
    H[np.arange(Q), np.arange(Q)] = V.values.ravel()
    qa = np.asarray(V.q)
    for ax in range(V.dim):
        for step in (1, -1):
            nb = cells.copy()
            nb[:, ax] += step
            j, m = split_sites(nb, V.q)
            phase = np.exp(2j * np.pi * ((m * qa) @ x))
            np.add.at(H, (np.arange(Q), cell_index(j, V.q)), -phase)
    return H


def char_det(V: PeriodicPotential, x, lam) -> complex:
    """``P(x, lam) = det(D^x + B - lam I)``; broadcasts over a batch of x."""
    return np.linalg.det(fiber_matrices(V, x, lam))


def _cofactor_adjugate(M: np.ndarray) -> np.ndarray:
    Q = M.shape[0]
    if Q == 1:
        return np.ones((1, 1), complex)
    C = np.empty((Q, Q), complex)
    for i in range(Q):
        rows = np.r_[0:i, i + 1:Q]
        for j in range(Q):
            cols = np.r_[0:j, j + 1:Q]
            C[i, j] = (-1) ** (i + j) * np.linalg.det(M[np.ix_(rows, cols)])
    return C.T


def adjugate(M) -> np.ndarray:
    """Classical adjugate, so that ``M @ adj(M) = det(M) I`` even when M is singular.

    Cofactor expansion for ``Q <= 8`` or near-singular M; ``det * inv`` otherwise.
    """
    A = M.entries if isinstance(M, FiberMatrix) else np.asarray(M, dtype=complex)
    Q = A.shape[0]
    if Q <= 8:
        return _cofactor_adjugate(A)
    # reciprocal condition number below 1e-8 counts as near-singular
    if 1.0 / np.linalg.cond(A) < 1e-8:
        return _cofactor_adjugate(A)
    return np.linalg.det(A) * np.linalg.inv(A)


def svd_adjugate(A: np.ndarray) -> np.ndarray:
    """Adjugate from one SVD, ``adj(U S W) = adj(W) adj(S) adj(U)``; stable at det = 0."""
    U, s, Wh = np.linalg.svd(A)
    Q = len(s)
    others = np.array([np.prod(np.delete(s, i)) for i in range(Q)])
    phase = np.linalg.det(U) * np.linalg.det(Wh)
    return phase * (Wh.conj().T * others) @ U.conj().T


def char_det_grad(V: PeriodicPotential, x, lam) -> tuple[complex, np.ndarray]:
    """``P(x, lam)`` and its complex gradient in x via ``dP = tr(adj(M) dM)``."""
    x = np.asarray(x, dtype=complex).reshape(V.dim)
    M = fiber_matrices(V, x, lam)
    adj = svd_adjugate(M) if V.Q > 1 else np.ones((1, 1))
    dD = laplacian_diagonal_grad(V.q, x)
    return complex(np.linalg.det(M)), np.diagonal(adj) @ dD


def laurent_coefficients(V: PeriodicPotential, lam, axis: int, x) -> np.ndarray:
    """Coefficients ``c_k``, ``k = -Q..Q``, of ``P`` as a Laurent polynomial in
    ``w = exp(2 pi i x_axis)`` with the other coordinates of ``x`` held fixed.

    Exact interpolation from ``2Q + 1`` samples on ``|w| = 1``.
    """
    Q = V.Q
    N = 2 * Q + 1
    x = np.array(x, dtype=complex).reshape(V.dim)
    xs = np.repeat(x[None, :], N, axis=0)
    xs[:, axis] = np.arange(N) / N
    vals = char_det(V, xs, lam)
    c = np.fft.fft(vals) / N
    # entries 0..Q are powers 0..Q, entries Q+1..2Q are powers -Q..-1
    return np.concatenate([c[Q + 1:], c[:Q + 1]])
