"""Brute-force ground truth on finite boxes with zero boundary conditions."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._parallel import ordered_map
from .errors import DomainError, NearEigenvalueError, SiteLimitError
from .lattice import Box, Impurity, LatticeFunction, PeriodicPotential

MAX_SITES = 10 ** 6
# dense eigensolves above this many sites are not attempted
DENSE_LIMIT = 6000


@dataclass
class TruncatedOperator:
    """``-Delta + V + v`` on ``|n|_max <= L``, sites in lexicographic order."""

    L: int
    box: Box
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def size(self) -> int:
        return self.box.size

    def index(self, site) -> int:
        return int(np.ravel_multi_index(tuple(np.subtract(site, self.box.lo)), self.box.shape))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def truncated_matrix(V: PeriodicPotential, v: Impurity | None, L: int) -> TruncatedOperator:
    if L < 1:
        raise DomainError("box half-width L must be at least 1")
    d = V.dim
    if (2 * L + 1) ** d > MAX_SITES:
        raise SiteLimitError(f"(2L+1)^d = {(2 * L + 1) ** d} sites exceeds {MAX_SITES}")
    box = Box.centered(L, d)
    sites = box.sites()
    diag = V(sites).astype(complex)
    if v is not None and not v.is_zero():
        diag = diag + v(sites)
    if np.all(diag.imag == 0):
        diag = diag.real
    N = len(sites)
    idx = np.arange(N)
    rows, cols = [], []
    stride = 1
    for ax in reversed(range(d)):
        has = sites[:, ax] < L
        rows += [idx[has], idx[has] + stride]
        cols += [idx[has] + stride, idx[has]]
        stride *= 2 * L + 1
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    off = sp.coo_matrix((-np.ones(len(r)), (r, c)), shape=(N, N))
    H = (off + sp.diags(diag)).tocsr()
    return TruncatedOperator(L, box, H)


def truncated_resolvent_solve(op: TruncatedOperator, lam: complex,
                              rhs: LatticeFunction) -> LatticeFunction:
    """Direct sparse LU solve of ``(H_L - lam) u = rhs``.

    A singular factorisation, a pivot below ``1e-12`` of the largest, or a
    solution amplified more than ``1e12`` times is a near-eigenvalue.
    """
    b = rhs.at(op.box.sites()).astype(complex)
    A = (op.matrix - complex(lam) * sp.identity(op.size, format="csr")).tocsc().astype(complex)
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise NearEigenvalueError(f"lambda={lam} is an eigenvalue of the truncated operator") from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() < 1e-12 * piv.max():
        raise NearEigenvalueError(f"lambda={lam}: pivot {piv.min():.2e} relative to {piv.max():.2e}")
    u = lu.solve(b)
    if np.linalg.norm(u) > 1e12 * max(np.linalg.norm(b), 1e-300):
        raise NearEigenvalueError(f"lambda={lam}: solution amplified beyond 1e12")
    return LatticeFunction(op.box, u.reshape(op.box.shape))


@dataclass
class ProbeRow:
    L: int
    eigenvalue: float
    boundary_mass_ratio: float
    in_band: bool


@dataclass
class ProbeReport:
    band_interval: tuple
    window: tuple
    rows: list
    threshold: float
    candidates: list = field(default_factory=list)

    HEADER = ("# non-conclusive: finite-volume evidence only; absence of embedded "
              "eigenvalues is an infinite-volume statement")

    def min_ratio(self, in_band: bool = True) -> float:
        vals = [r.boundary_mass_ratio for r in self.rows if r.in_band == in_band]
        return min(vals, default=math.inf)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.HEADER + "\n")
        buf.write(f"# band=({self.band_interval[0]:.17g}, {self.band_interval[1]:.17g}) "
                  f"threshold={self.threshold:.3g} candidates={len(self.candidates)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["L", "eigenvalue", "boundary_mass_ratio", "in_band"])
        for r in self.rows:
            w.writerow([r.L, format(r.eigenvalue, ".17g"), format(r.boundary_mass_ratio, ".17g"),
                        str(r.in_band).lower()])
        return buf.getvalue()


def _eigenpairs(op: TruncatedOperator, lo: float, hi: float):
    if op.size <= DENSE_LIMIT:
        w, U = np.linalg.eigh(op.dense().real)
    else:
        k = min(op.size - 2, 200)
        w, U = spla.eigsh(op.matrix.real, k=k, sigma=0.5 * (lo + hi), which="LM")
    keep = (w > lo) & (w < hi)
    return w[keep], U[:, keep]


# below this boundary mass the dense eigenvector tail is roundoff, so it is refined
REFINE_BELOW = 1e-8


def _refine(op, lam, vec, steps=4):
    """Shifted inverse iteration; resolves exponentially small tails componentwise."""
    mu = lam + 1e-9 * max(1.0, abs(lam))
    lu = spla.splu((op.matrix.real - mu * sp.identity(op.size)).tocsc())
    x = vec.copy()
    for _ in range(steps):
        x = lu.solve(x)
        x /= np.linalg.norm(x)
    return x


def _probe_one(V, v, L, band, window):
    op = truncated_matrix(V, v, L)
    if v is not None and np.abs(np.imag(op.matrix.diagonal())).max() > 0:
        raise DomainError("the probe needs a real impurity")
    w, U = _eigenpairs(op, *window)
    shell = np.abs(op.box.sites()).max(axis=1) == L
    rows = []
    for lam, vec in zip(w, U.T):
        ratio = np.linalg.norm(vec[shell]) / np.linalg.norm(vec)
        if ratio < REFINE_BELOW:
            vec = _refine(op, lam, vec)
            ratio = np.linalg.norm(vec[shell]) / np.linalg.norm(vec)
        rows.append(ProbeRow(L, float(lam), float(ratio), bool(band[0] < lam < band[1])))
    return rows


def embedded_eigenvalue_probe(V: PeriodicPotential, v: Impurity | None, band_interval,
                              L_list, window=None, threshold: float = 1e-3) -> ProbeReport:
    """Eigenpairs of truncated H with eigenvalue in ``window`` and their boundary mass.

    ``window`` defaults to the open band interval. An in-band eigenvector whose
    boundary-mass ratio ``|u on |n|_max = L| / |u|`` falls below ``threshold``
    at the largest L is flagged as a candidate bound state.
    """
    band = (float(band_interval[0]), float(band_interval[1]))
    window = band if window is None else (float(window[0]), float(window[1]))
    if v is not None and not v.is_zero() and not math.isinf(v.decay_certificate):
        raise DomainError("the probe expects a super-exponentially decaying impurity")
    L_list = sorted(int(L) for L in L_list)
    per_L = ordered_map(lambda L: _probe_one(V, v, L, band, window), L_list)
    rows = [r for rs in per_L for r in rs]
    Lmax = L_list[-1]
    cands = [r for r in rows if r.L == Lmax and r.in_band and r.boundary_mass_ratio < threshold]
    return ProbeReport(band, window, rows, threshold, cands)
