"""Fourier-coefficient decay versus analyticity of the symbol in a strip.

Convention: ``f_hat(z) = sum_n f_n exp(2 pi i n.z)`` with
``f_n = int_{[0,1]^d} f_hat(x) exp(-2 pi i n.x) dx``.

Forward direction: coefficients with ``|f_n| <= C1 exp(-C2 |n|_max)`` are
summed in the strip ``2 pi sum_j |Im z_j| < C2``. In one dimension this is
``|Im z| < C2 / 2 pi``; for d >= 2 a max-norm strip of the same width is too
large (take ``n = -(k, .., k)`` and ``Im z_j = t``), so the l1 condition is
used.

Backward direction: the coefficient integral is moved to the shifted contour
``Im z_j = -sign(n_j) (C2 - eps)`` in the coordinate j achieving ``|n|_max``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError, OutOfStripError

TWO_PI = 2 * math.pi
TAIL_TOL = 1e-10
TRUNC_CAP = {1: 1 << 16, 2: 512, 3: 48}


@dataclass
class CoefficientSeq:
    """Coefficients ``f_n`` on Z^d with a decay certificate ``(C1, C2)``.

    ``coeffs`` is a finite map ``n -> f_n``; alternatively ``generator`` maps
    an ``(K, d)`` integer array to the K coefficients. A generator flagged
    ``log_scale`` returns complex logarithms instead, which keeps far-out
    coefficients from underflowing.
    """

    dim: int
    C1: float
    C2: float
    coeffs: dict | None = None
    generator: Callable | None = None
    log_scale: bool = False

    def __post_init__(self):
        if (self.coeffs is None) == (self.generator is None):
            raise DomainError("give exactly one of coeffs or generator")
        if self.C1 <= 0 or self.C2 <= 0:
            raise DomainError("decay certificate needs C1 > 0 and C2 > 0")
        if self.coeffs is not None:
            self.coeffs = {tuple(int(a) for a in k): complex(v) for k, v in self.coeffs.items()}
            for n, f in self.coeffs.items():
                if abs(f) > self.C1 * math.exp(-self.C2 * max(map(abs, n))) * (1 + 1e-12):
                    raise DomainError(f"coefficient at {n} violates the decay certificate")

    @classmethod
    def geometric(cls, base: float, dim: int = 1) -> "CoefficientSeq":
        """``f_n = base^{|n|_max}``, certified with ``C1 = 1, C2 = -ln base``."""
        lb = math.log(base)
        return cls(dim, 1.0, -lb, generator=lambda n: lb * np.abs(n).max(axis=-1) + 0j,
                   log_scale=True)

    @property
    def support_radius(self) -> int | None:
        if self.coeffs is None:
            return None
        return max((max(map(abs, n)) for n in self.coeffs), default=0)

    def log_values(self, ns: np.ndarray) -> np.ndarray:
        """Complex logarithms of the coefficients; ``-inf`` where ``f_n = 0``."""
        ns = np.asarray(ns, dtype=int).reshape(-1, self.dim)
        if self.generator is not None:
            out = np.asarray(self.generator(ns), dtype=complex)
            if self.log_scale:
                return out
        else:
            out = np.array([self.coeffs.get(tuple(n), 0.0) for n in ns], dtype=complex)
        with np.errstate(divide="ignore"):
            return np.log(out)

    def values(self, ns: np.ndarray) -> np.ndarray:
        return np.exp(self.log_values(ns))


def _cube(T: int, d: int) -> np.ndarray:
    r = np.arange(-T, T + 1)
    return np.array(list(itertools.product(r, repeat=d)), dtype=int).reshape(-1, d)


def tail_bound(C1: float, C2: float, im_l1: float, T: int, d: int) -> float:
    """``C1 sum_{l > T} 2d (2l+1)^{d-1} exp(-a l)`` with ``a = C2 - 2 pi im_l1``."""
    a = C2 - TWO_PI * im_l1
    if a <= 0:
        return math.inf
    total, l = 0.0, T + 1
    while True:
        term = 2 * d * (2 * l + 1) ** (d - 1) * math.exp(-a * l)
        total += term
        # past the peak of l^{d-1} e^{-al}, the rest is below a geometric series
        if l > (d - 1) / a and term < 1e-3 * total * (1 - math.exp(-a)):
            ratio = ((2 * l + 3) / (2 * l + 1)) ** (d - 1) * math.exp(-a)
            if ratio < 1:
                return C1 * (total + term * ratio / (1 - ratio))
        l += 1


def _partial_sum(seq: CoefficientSeq, zs: np.ndarray, T: int) -> np.ndarray:
    ns = _cube(T, seq.dim)
    logf = seq.log_values(ns)
    keep = np.isfinite(logf.real)
    ns, logf = ns[keep], logf[keep]
    out = np.zeros(len(zs), complex)
    for start in range(0, len(zs), 256):
        z = zs[start:start + 256]
        # combine in log space: |f_n| and |exp(2 pi i n.z)| separately over/underflow
        out[start:start + 256] = np.exp(2j * np.pi * (z @ ns.T) + logf).sum(axis=1)
    return out


@dataclass
class StripValue:
    value: complex
    tail_bound: float
    trunc: int


def _check_strip(seq: CoefficientSeq, zs: np.ndarray) -> float:
    im_l1 = float(np.abs(zs.imag).sum(axis=-1).max())
    if TWO_PI * im_l1 >= seq.C2:
        raise OutOfStripError(
            f"2 pi sum|Im z| = {TWO_PI * im_l1:.6g} is not below C2 = {seq.C2:.6g}")
    return im_l1


def _choose_trunc(seq: CoefficientSeq, im_l1: float, trunc: int | None) -> tuple[int, float]:
    d = seq.dim
    if seq.support_radius is not None:
        # finite support: the partial sum over the support is exact
        return max(seq.support_radius, trunc or 0), 0.0
    T = trunc or 4
    cap = TRUNC_CAP.get(d, 16)
    tb = tail_bound(seq.C1, seq.C2, im_l1, T, d)
    while tb >= TAIL_TOL:
        if T >= cap:
            raise AccuracyError(f"tail bound {tb:.2e} still above {TAIL_TOL:.0e} at trunc {T}")
        T = min(2 * T, cap)
        tb = tail_bound(seq.C1, seq.C2, im_l1, T, d)
    return T, tb


def coeffs_to_strip_eval(seq: CoefficientSeq, z, trunc: int | None = None) -> StripValue:
    """``f_hat(z)`` from the coefficients, with an explicit tail bound below 1e-10.

    ``trunc`` is a starting truncation in ``|n|_max``; it is raised until the
    tail bound is met.
    """
    zs = np.asarray(z, dtype=complex).reshape(1, seq.dim)
    im_l1 = _check_strip(seq, zs)
    T, tb = _choose_trunc(seq, im_l1, trunc)
    return StripValue(complex(_partial_sum(seq, zs, T)[0]), tb, T)


def strip_evaluator(seq: CoefficientSeq, max_im_l1: float) -> Callable:
    """Vectorised ``f_hat`` valid for ``sum|Im z_j| <= max_im_l1``."""
    _check_strip(seq, np.full((1, seq.dim), 1j * max_im_l1 / seq.dim))
    T, _ = _choose_trunc(seq, max_im_l1, None)

    def f(zs):
        zs = np.asarray(zs, dtype=complex).reshape(-1, seq.dim)
        if float(np.abs(zs.imag).sum(axis=-1).max()) > max_im_l1 * (1 + 1e-12):
            raise OutOfStripError("evaluation point outside the prepared strip")
        return _partial_sum(seq, zs, T)

    return f


@dataclass
class CoeffBound:
    n: tuple
    coeff: complex
    bound: float
    sup: float
    C3: float
    grid: int
    ok: bool


GRID_CAP = {1: 1 << 14, 2: 512, 3: 64}


def dominant_axis(n) -> int:
    """Coordinate achieving ``|n|_max``; ties go to the lowest index."""
    return int(np.argmax(np.abs(n)))


def _contour(d, N, axis, shift):
    axes = [np.arange(N) / N] * d
    g = np.meshgrid(*axes, indexing="ij")
    x = np.stack([a.ravel() for a in g], axis=-1).astype(complex)
    x[:, axis] += 1j * shift
    return x


def strip_to_coeff_bound(evaluator: Callable, C2: float, n, eps: float | None = None,
                         tol: float = 1e-12) -> CoeffBound:
    """``f_n`` by trapezoid quadrature on the shifted contour, and the decay bound.

    ``evaluator`` maps ``(K, d)`` complex points to values and must be analytic
    and bounded on the strip of half-width ``C2`` (the caller's claim). The
    grid doubles until successive values differ by less than ``tol``. The
    reported ``C3`` is ``|f_n| / (sup |f_hat| exp(-2 pi |n|_max R))`` with the
    sup taken over the quadrature nodes of the real and shifted contours.
    """
    n = tuple(int(a) for a in np.atleast_1d(n))
    d = len(n)
    eps = 0.05 * C2 if eps is None else eps
    if not 0 < eps < C2:
        raise DomainError("need 0 < eps < C2")
    R = C2 - eps
    axis = dominant_axis(n)
    shift = -math.copysign(R, n[axis]) if n[axis] != 0 else 0.0
    nv = np.asarray(n, dtype=float)
    cap = GRID_CAP.get(d, 32)

    def estimate(N):
        z = _contour(d, N, axis, shift)
        vals = np.asarray(evaluator(z), dtype=complex)
        return np.mean(vals * np.exp(-2j * np.pi * (z @ nv))), float(np.abs(vals).max())

    N = 16
    prev, sup = estimate(N)
    while True:
        if 2 * N > cap:
            raise AccuracyError(f"shifted-contour quadrature for n={n} not converged at grid {N}")
        N *= 2
        cur, sup = estimate(N)
        if abs(cur - prev) < tol:
            break
        prev = cur
    if shift != 0:
        sup = max(sup, float(np.abs(evaluator(_contour(d, N, axis, 0.0))).max()))
    norm_max = max(map(abs, n))
    bound = sup * math.exp(-TWO_PI * norm_max * R)
    C3 = abs(cur) / bound if bound > 0 else math.inf
    return CoeffBound(n, complex(cur), bound, sup, C3, N, abs(cur) <= bound * (1 + 1e-9) + tol)
