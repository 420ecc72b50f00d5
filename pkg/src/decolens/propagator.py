"""Coherent time evolution with the explicit staggered real/imaginary scheme.

With psi = R + iI the Schroedinger equation splits into

    dR/dt =  H I,      dI/dt = -H R,      H = -1/2 d^2/dx^2 + V.

R lives on integer time levels and I half a step ahead (Visscher).  One step
of length tau is

    R^{n+1}   = R^n       - [alpha (I_{i+1} + I_{i-1}) - (2 alpha + V_i tau) I_i]^{n+1/2}
    I^{n+3/2} = I^{n+1/2} + [alpha (R_{i+1} + R_{i-1}) - (2 alpha + V_i tau) R_i]^{n+1}

with alpha = tau / (2 dx^2).  ``bootstrap`` creates the first half level with
a half step of the first-order update, and every ``step`` also returns I at
the integer level (the symmetric average of the two half levels), so
observables and scattering events always see a synchronized wavefunction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableParameters
from .grid import GridSpec, WaveFunction, norm

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Potential:
    """Static potential sampled on the grid.

    ``kind`` is ``"free"``, ``"barrier"`` or ``"custom"``; ``params`` holds the
    barrier's height, left edge and width.
    """

    values: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite")

    @classmethod
    def free(cls, grid: GridSpec) -> Potential:
        return cls(np.zeros(grid.n), "free")

    @classmethod
    def barrier(cls, grid: GridSpec, height: float, left: float, width: float) -> Potential:
        x = grid.x
        values = np.where((x >= left) & (x <= left + width), float(height), 0.0)
        return cls(values, "barrier", {"height": height, "left": left, "width": width})

    @property
    def right_edge(self) -> float:
        return self.params["left"] + self.params["width"]


@dataclass(frozen=True)
class StepParams:
    tau: float
    dx: float

    @classmethod
    def for_grid(cls, grid: GridSpec, tau: float | None = None) -> StepParams:
        """Default time step tau = dx^2 / 2, i.e. alpha = 1/4."""
        return cls(grid.dx**2 / 2 if tau is None else tau, grid.dx)

    @property
    def alpha(self) -> float:
        return self.tau / (2 * self.dx**2)

    def check(self, v: Potential) -> None:
        vmax = float(np.max(np.abs(v.values))) if v.values.size else 0.0
        bound = self.alpha + vmax * self.tau / 2
        if not self.tau > 0 or bound > 0.5:
            raise UnstableParameters(
                f"alpha + max|V| tau/2 = {bound:.4g} exceeds 1/2 (tau={self.tau}, dx={self.dx})"
            )


def apply_h(f: np.ndarray, v: np.ndarray, dx: float) -> np.ndarray:
    """H f with the three-point Laplacian; boundary entries stay zero."""
    out = np.zeros_like(f)
    out[1:-1] = (2 * f[1:-1] - f[2:] - f[:-2]) / (2 * dx * dx) + v[1:-1] * f[1:-1]
    return out


def bootstrap(psi: WaveFunction, v: Potential, p: StepParams) -> WaveFunction:
    p.check(v)
    im_half = psi.im - 0.5 * p.tau * apply_h(psi.re, v.values, p.dx)
    return WaveFunction(psi.grid, psi.re.copy(), psi.im.copy(), im_half, p.tau)


def step(psi: WaveFunction, v: Potential, p: StepParams) -> WaveFunction:
    """Advance by one step tau; bootstraps first if needed."""
    if psi.im_half is None or psi.half_tau != p.tau:
        psi = bootstrap(psi, v, p)
    re = psi.re + p.tau * apply_h(psi.im_half, v.values, p.dx)
    kick = p.tau * apply_h(re, v.values, p.dx)
    return WaveFunction(psi.grid, re, psi.im_half - 0.5 * kick, psi.im_half - kick, p.tau)


def n_steps(duration: float, tau: float) -> int:
    """Whole steps in ``duration``; remainders below one step are dropped."""
    ratio = duration / tau
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9 * max(1.0, ratio):
        return int(nearest)
    steps = int(math.floor(ratio))
    log.info("duration %.6g is not a multiple of tau=%.6g; using %d steps", duration, tau, steps)
    return steps


def propagate(psi: WaveFunction, v: Potential, p: StepParams, duration: float) -> WaveFunction:
    """Coherent evolution over ``duration`` (rounded down to whole steps)."""
    count = n_steps(duration, p.tau)
    if count == 0:
        return psi
    p.check(v)
    if abs(norm(psi) - 1.0) > 1e-3:
        log.warning("propagating a wavefunction with norm %.6f", norm(psi))
    # Inline loop over ``step`` without per-step object churn.
    if psi.im_half is None or psi.half_tau != p.tau:
        psi = bootstrap(psi, v, p)
    vals, dx, tau = v.values, p.dx, p.tau
    re, im_half = psi.re, psi.im_half
    im = psi.im
    for _ in range(count):
        re = re + tau * apply_h(im_half, vals, dx)
        kick = tau * apply_h(re, vals, dx)
        im = im_half - 0.5 * kick
        im_half = im_half - kick
    return WaveFunction(psi.grid, re, im, im_half, tau)
