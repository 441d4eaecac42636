"""Lattice geometry, periodic potentials, impurities and decay fitting on Z^d.

Sites are integer d-vectors. Functions on the lattice are sampled on
axis-aligned boxes (inclusive corners) and are zero outside them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError


@dataclass(frozen=True)
class Box:
    """Axis-aligned site range ``lo <= n <= hi`` (componentwise, inclusive)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(int(a) for a in self.lo))
        object.__setattr__(self, "hi", tuple(int(b) for b in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise DomainError("box corners must be non-empty and of equal dimension")
        if any(b < a for a, b in zip(self.lo, self.hi)):
            raise DomainError(f"empty box {self.lo}..{self.hi}")

    @classmethod
    def centered(cls, L: int, d: int) -> "Box":
        return cls((-L,) * d, (L,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def sites(self) -> np.ndarray:
        """All sites as an ``(size, d)`` integer array in lexicographic order."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def shrink(self, k: int = 1) -> "Box":
        lo = tuple(a + k for a in self.lo)
        hi = tuple(b - k for b in self.hi)
        if any(b < a for a, b in zip(lo, hi)):
            raise DomainError(f"box {self.lo}..{self.hi} has no sites {k} layer(s) inside")
        return Box(lo, hi)

    def grow(self, k: int = 1) -> "Box":
        return Box(tuple(a - k for a in self.lo), tuple(b + k for b in self.hi))

    def contains(self, sites: np.ndarray) -> np.ndarray:
        sites = np.asarray(sites)
        return np.all((sites >= self.lo) & (sites <= self.hi), axis=-1)

    def inner_radius(self) -> int:
        """Largest R with the max-norm ball of radius R around 0 inside the box."""
        return min(min(-a, b) for a, b in zip(self.lo, self.hi))


@dataclass
class LatticeFunction:
    """Complex values on a box; implicitly zero elsewhere."""

    box: Box
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != self.box.shape:
            raise DomainError(f"data shape {self.data.shape} does not match box {self.box.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("lattice function has non-finite values")

    @classmethod
    def zeros(cls, box: Box) -> "LatticeFunction":
        return cls(box, np.zeros(box.shape, complex))

    @classmethod
    def from_callable(cls, box: Box, f) -> "LatticeFunction":
        sites = box.sites()
        return cls(box, np.asarray(f(sites), dtype=complex).reshape(box.shape))

    @classmethod
    def delta(cls, box: Box, site: Sequence[int]) -> "LatticeFunction":
        u = cls.zeros(box)
        u.data[tuple(np.subtract(site, box.lo))] = 1.0
        return u

    @property
    def dim(self) -> int:
        return self.box.dim

    def at(self, sites) -> np.ndarray:
        """Values at arbitrary sites (zero outside the box)."""
        sites = np.atleast_2d(np.asarray(sites, dtype=int))
        inside = self.box.contains(sites)
        out = np.zeros(len(sites), complex)
        idx = (sites[inside] - np.asarray(self.box.lo)).T
        out[inside] = self.data[tuple(idx)]
        return out

    def restrict(self, box: Box) -> "LatticeFunction":
        return LatticeFunction(box, self.at(box.sites()).reshape(box.shape))

    def vdot(self, other: "LatticeFunction") -> complex:
        """``<self, other>``, antilinear in the first slot."""
        lo = np.minimum(self.box.lo, other.box.lo)
        hi = np.maximum(self.box.hi, other.box.hi)
        sites = Box(tuple(lo), tuple(hi)).sites()
        return complex(np.vdot(self.at(sites), other.at(sites)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(eq=False)
class PeriodicPotential:
    """Real Gamma-periodic potential given by its values on the cell W.

    ``values`` has shape ``q``; flat input is read in lexicographic W order.
    """

    q: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        self.q = tuple(int(k) for k in self.q)
        if not self.q or any(k < 1 for k in self.q):
            raise DomainError(f"periods must be positive integers, got {self.q}")
        vals = np.asarray(self.values, dtype=float)
        if vals.size != math.prod(self.q):
            raise DomainError(f"expected {math.prod(self.q)} potential values, got {vals.size}")
        self.values = vals.reshape(self.q)

    @classmethod
    def free(cls, d: int) -> "PeriodicPotential":
        return cls((1,) * d, np.zeros((1,) * d))

    @classmethod
    def constant(cls, c: float, q: Sequence[int]) -> "PeriodicPotential":
        return cls(tuple(q), np.full(tuple(q), float(c)))

    @property
    def dim(self) -> int:
        return len(self.q)

    @property
    def Q(self) -> int:
        return math.prod(self.q)

    @property
    def key(self) -> tuple:
        return (self.q, self.values.tobytes())

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def cell_sites(self) -> np.ndarray:
        """Sites of W as a ``(Q, d)`` array in lexicographic order."""
        return Box((0,) * self.dim, tuple(k - 1 for k in self.q)).sites()

    def __call__(self, sites) -> np.ndarray:
        sites = np.asarray(sites, dtype=int)
        red = np.mod(sites, self.q)
        return self.values[tuple(np.moveaxis(red, -1, 0))]

    def shifted(self, c: float) -> "PeriodicPotential":
        return PeriodicPotential(self.q, self.values + c)


IMPURITY_FAMILIES = ("exp", "superexp")


@dataclass
class Impurity:
    """Decaying complex perturbation v.

    Either a finite support ``{site: value}`` or a parametric family
    ``amplitude * exp(-rate * |n|_1 ** gamma)`` (``gamma = 1`` for ``exp``).
    """

    support: dict = field(default_factory=dict)
    family: str | None = None
    amplitude: complex = 0.0
    rate: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        self.support = {tuple(int(a) for a in k): complex(val) for k, val in self.support.items()}
        if self.family is not None:
            if self.family not in IMPURITY_FAMILIES:
                raise DomainError(f"unknown impurity family {self.family!r}")
            if self.support:
                raise DomainError("impurity is either finite-support or parametric, not both")
            if self.rate <= 0:
                raise DomainError("parametric impurity needs a positive rate")
            if self.family == "superexp" and self.gamma <= 1:
                raise DomainError("super-exponential family needs gamma > 1")
            if self.family == "exp":
                self.gamma = 1.0

    @classmethod
    def none(cls) -> "Impurity":
        return cls()

    @classmethod
    def single_site(cls, value: complex, site: Sequence[int]) -> "Impurity":
        return cls(support={tuple(site): value})

    def is_zero(self) -> bool:
        if self.family is not None:
            return self.amplitude == 0
        return all(val == 0 for val in self.support.values())

    @property
    def decay_certificate(self) -> float:
        """Claimed beta: the impurity has beta-exponential decay for beta below this."""
        if self.family == "exp":
            return self.rate
        return math.inf

    def __call__(self, sites) -> np.ndarray:
        sites = np.atleast_2d(np.asarray(sites, dtype=int))
        if self.family is not None:
            r = np.abs(sites).sum(axis=-1).astype(float)
            return self.amplitude * np.exp(-self.rate * r**self.gamma) + 0j
        out = np.zeros(len(sites), complex)
        if not self.support:
            return out
        for site, val in self.support.items():
            out[np.all(sites == site, axis=-1)] = val
        return out

    def sup_norm(self, box: Box | None = None) -> float:
        if self.family is None:
            return max((abs(v) for v in self.support.values()), default=0.0)
        return abs(self.amplitude)


def adjacency(u: LatticeFunction) -> LatticeFunction:
    """``(Delta u)(n) = sum_{|n'-n|_1 = 1} u(n')`` on the box grown by one layer."""
    box = u.box.grow(1)
    padded = np.pad(u.data, 1)
    out = np.zeros_like(padded)
    for ax in range(u.dim):
        out += np.roll(padded, 1, axis=ax) + np.roll(padded, -1, axis=ax)
    return LatticeFunction(box, out)


def eigen_residual(V: PeriodicPotential, v: Impurity | None, lam: complex,
                   u: LatticeFunction) -> LatticeFunction:
    """Residual of ``-Delta u + V u + v u = lam u`` on the interior of u's box.

    The outermost layer is dropped: neighbours there fall outside the sample.
    """
    if V.dim != u.dim:
        raise DomainError(f"potential is {V.dim}-dimensional, function is {u.dim}-dimensional")
    inner = u.box.shrink(1)
    sites = inner.sites()
    lap = adjacency(u).restrict(inner).data.ravel()
    diag = V(sites) - lam
    if v is not None and not v.is_zero():
        diag = diag + v(sites)
    res = -lap + diag * u.at(sites)
    return LatticeFunction(inner, res.reshape(inner.shape))


def potential_dft(V: PeriodicPotential) -> np.ndarray:
    """Unitary DFT of V over the cell.

    Entry ``k`` (a multi-index in W) is ``V_hat(l)`` at ``l = k / q``:
    ``V_hat(l) = Q^{-1/2} sum_{n in W} V(n) exp(-2 pi i l.n)``.
    """
    return np.fft.fftn(V.values) / math.sqrt(V.Q)


def inverse_potential_dft(vhat: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(vhat) * math.sqrt(vhat.size)


def site_norm(sites: np.ndarray, norm: str = "lmax") -> np.ndarray:
    sites = np.abs(np.asarray(sites))
    if norm == "lmax":
        return sites.max(axis=-1)
    if norm == "l1":
        return sites.sum(axis=-1)
    raise ValueError(f"unknown norm {norm!r}; use 'lmax' or 'l1'")


@dataclass
class DecayFit:
    slope: float
    intercept: float
    last_shell_slope: float
    shells: np.ndarray
    log_max: np.ndarray

    @property
    def per_shell(self) -> list[tuple[int, float]]:
        return [(int(s), float(m)) for s, m in zip(self.shells, self.log_max)]


def decay_rate_estimate(u: LatticeFunction, norm: str = "lmax",
                        shells: Iterable[int] | None = None,
                        floor: float = 0.0) -> DecayFit:
    """Least-squares slope of ``max_{|n| = s} ln|u(n)|`` against the shell radius s.

    Only shells lying entirely inside the box are used by default. Zero values
    are ignored, as are values at or below ``floor * max|u|``. The slope estimates
    ``-beta``; the slope between the last two shells is kept as a diagnostic.
    """
    sites = u.box.sites()
    radius = site_norm(sites, norm)
    mag = np.abs(u.data.ravel())
    if shells is None:
        shells = range(0, u.box.inner_radius() + 1)
    cutoff = floor * mag.max() if mag.size else 0.0
    used, logs = [], []
    for s in shells:
        sel = mag[radius == s]
        sel = sel[sel > cutoff]
        if sel.size:
            used.append(s)
            logs.append(math.log(sel.max()))
    if len(used) < 3:
        raise InsufficientDataError(f"need at least 3 usable shells, have {len(used)}")
    s_arr = np.asarray(used, dtype=float)
    l_arr = np.asarray(logs)
    slope, intercept = np.polyfit(s_arr, l_arr, 1)
    last = (l_arr[-1] - l_arr[-2]) / (s_arr[-1] - s_arr[-2])
    return DecayFit(float(slope), float(intercept), float(last), s_arr.astype(int), l_arr)
