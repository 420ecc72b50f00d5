"""Uniform 1D grids and wavefunctions stored as real/imaginary arrays.

Units throughout are hbar = m = 1. A Gaussian's ``sigma`` is the standard
deviation of its probability density |psi|^2, so the amplitude is
exp(-(x - x_c)^2 / (4 sigma^2)).  All integrals use the rectangle rule
sum(f) * dx, with hard (Dirichlet) walls at the first and last grid point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GridMismatch, PacketOutOfDomain


@dataclass(frozen=True)
class GridSpec:
    n: int
    dx: float
    x_min: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs n >= 3 points, got {self.n}")
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got {self.dx}")

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + self.dx * (self.n - 1)

    @property
    def length(self) -> float:
        return self.dx * (self.n - 1)

    def index_of(self, x: float) -> int:
        """Nearest grid index to position ``x`` (clipped to the grid)."""
        i = int(round((x - self.x_min) / self.dx))
        return min(max(i, 0), self.n - 1)


@dataclass(frozen=True)
class GaussianSpec:
    sigma: float
    k0: float
    x_center: float

    def check(self, grid: GridSpec) -> None:
        if not self.sigma > 3 * grid.dx:
            raise ValueError(
                f"sigma={self.sigma} is not resolvable on dx={grid.dx} (need sigma > 3 dx)"
            )
        if self.k0 != 0 and not 2 * np.pi / abs(self.k0) > 2 * grid.dx:
            raise ValueError(f"k0={self.k0} exceeds the grid Nyquist limit")


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Wavefunction on a grid.

    ``re`` and ``im`` are synchronized at the current time.  Once the
    propagator has been bootstrapped, ``im_half`` holds the imaginary part
    half a time step ahead (the staggered leapfrog level) and ``half_tau``
    the step it belongs to; both are ``None`` otherwise.
    """

    grid: GridSpec
    re: np.ndarray
    im: np.ndarray
    im_half: np.ndarray | None = None
    half_tau: float | None = None

    @classmethod
    def from_complex(cls, grid: GridSpec, psi) -> WaveFunction:
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (grid.n,):
            raise GridMismatch(f"expected {grid.n} samples, got shape {psi.shape}")
        re = psi.real.copy()
        im = psi.imag.copy()
        re[[0, -1]] = 0.0
        im[[0, -1]] = 0.0
        return cls(grid, re, im)

    @classmethod
    def zeros(cls, grid: GridSpec) -> WaveFunction:
        return cls(grid, np.zeros(grid.n), np.zeros(grid.n))

    @property
    def psi(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def staggered(self) -> bool:
        return self.im_half is not None

    def desynchronized(self) -> WaveFunction:
        """Copy without the staggered level (forces a fresh bootstrap)."""
        return replace(self, im_half=None, half_tau=None)

    def scaled(self, c: complex) -> WaveFunction:
        return WaveFunction.from_complex(self.grid, c * self.psi)


def norm(psi: WaveFunction) -> float:
    return float(np.sum(psi.re**2 + psi.im**2) * psi.grid.dx)


def density(psi: WaveFunction) -> np.ndarray:
    return psi.re**2 + psi.im**2


def normalize(psi: WaveFunction) -> WaveFunction:
    nrm = norm(psi)
    if nrm == 0.0:
        return psi.desynchronized()
    s = 1.0 / np.sqrt(nrm)
    return WaveFunction(psi.grid, psi.re * s, psi.im * s)


def inner(a: WaveFunction, b: WaveFunction) -> complex:
    """<a|b> with the rectangle-rule measure."""
    _same_grid(a, b)
    return complex(np.vdot(a.psi, b.psi) * a.grid.dx)


def make_gaussian(grid: GridSpec, spec: GaussianSpec) -> WaveFunction:
    """Normalized Gaussian packet exp(-(x-xc)^2/(4 sigma^2)) exp(i k0 x)."""
    spec.check(grid)
    support = 4 * spec.sigma
    if spec.x_center - support <= grid.x_min or spec.x_center + support >= grid.x_max:
        raise PacketOutOfDomain(
            f"packet at {spec.x_center} with 4*sigma={support} leaves "
            f"[{grid.x_min}, {grid.x_max}]"
        )
    x = grid.x
    psi = np.exp(-((x - spec.x_center) ** 2) / (4 * spec.sigma**2) + 1j * spec.k0 * x)
    return normalize(WaveFunction.from_complex(grid, psi))


def superpose(a: WaveFunction, ca: complex, b: WaveFunction, cb: complex) -> WaveFunction:
    """Normalized ``ca*a + cb*b``."""
    _same_grid(a, b)
    return normalize(WaveFunction.from_complex(a.grid, ca * a.psi + cb * b.psi))


def double_packet(grid: GridSpec, spec: GaussianSpec, separation: float, beta: float) -> WaveFunction:
    """sqrt(beta) psi(x - d/2) + sqrt(1 - beta) psi(x + d/2) around ``spec.x_center``.

    The first (weight beta) component sits to the right of the center.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    right = make_gaussian(grid, replace(spec, x_center=spec.x_center + separation / 2))
    left = make_gaussian(grid, replace(spec, x_center=spec.x_center - separation / 2))
    return superpose(right, np.sqrt(beta), left, np.sqrt(1.0 - beta))


def _same_grid(a: WaveFunction, b: WaveFunction) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
