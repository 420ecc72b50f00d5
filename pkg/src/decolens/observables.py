"""Measurements on single runs and ensembles."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDensity, GridMismatch
from .grid import GridSpec, WaveFunction, density

DEFAULT_THETA = 0.95


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    NONE = "none"


class BarrierOutcome(enum.Enum):
    TRANSMITTED = "transmitted"
    REFLECTED = "reflected"
    SPLIT = "split"


@dataclass
class RunResult:
    """Time series of one (coherent or decoherent) run.

    ``var_x`` is the density variance (length^2).  ``probes`` holds any extra
    per-sample series requested by the caller, keyed by name.  ``edge_max`` is
    the largest density seen next to either wall.
    """

    grid: GridSpec
    times: np.ndarray
    mean_x: np.ndarray
    var_x: np.ndarray
    max_pos: np.ndarray
    events: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final_psi: WaveFunction | None = None
    probes: dict = field(default_factory=dict)
    edge_max: float = 0.0
    run_index: int = 0

    @property
    def final_density(self) -> np.ndarray:
        return density(self.final_psi)

    @property
    def final_std(self) -> float:
        return float(np.sqrt(self.var_x[-1]))


@dataclass
class EnsembleResult:
    runs: list
    mean_density: np.ndarray
    centered_density: np.ndarray
    seed: int | None = None

    @property
    def grid(self) -> GridSpec:
        return self.runs[0].grid


def moments(rho: np.ndarray, grid: GridSpec) -> tuple[float, float]:
    """Mean and variance of x under the weight rho."""
    total = float(np.sum(rho))
    if not total > 0:
        raise EmptyDensity("density has no mass")
    x = grid.x
    w = rho / total
    mean = float(np.dot(w, x))
    var = float(np.dot(w, (x - mean) ** 2))
    return mean, var


def density_std(rho: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(moments(rho, grid)[1]))


def max_position(rho: np.ndarray, grid: GridSpec) -> float:
    return float(grid.x[int(np.argmax(rho))])


def mass_fraction_left(rho: np.ndarray, grid: GridSpec, split: float) -> float:
    total = float(np.sum(rho))
    if not total > 0:
        raise EmptyDensity("density has no mass")
    return float(np.sum(rho[grid.x < split]) / total)


def collapse_state(rho, grid: GridSpec, split: float, theta: float = DEFAULT_THETA):
    """Fraction of mass left of ``split`` and the side it collapsed to."""
    p_left = mass_fraction_left(rho, grid, split)
    if p_left > theta:
        side = Side.LEFT
    elif p_left < 1.0 - theta:
        side = Side.RIGHT
    else:
        side = Side.NONE
    return p_left, side


def classify_barrier(rho, grid: GridSpec, barrier_right_edge: float, theta: float = DEFAULT_THETA):
    """Transmitted mass beyond the barrier's right edge and the outcome."""
    total = float(np.sum(rho))
    if not total > 0:
        raise EmptyDensity("density has no mass")
    trans = float(np.sum(rho[grid.x > barrier_right_edge]) / total)
    if trans > theta:
        outcome = BarrierOutcome.TRANSMITTED
    elif trans < 1.0 - theta:
        outcome = BarrierOutcome.REFLECTED
    else:
        outcome = BarrierOutcome.SPLIT
    return trans, outcome


def center_on_maximum(rho: np.ndarray, target: int | None = None) -> np.ndarray:
    """Shift rho by whole cells so its (leftmost) maximum lands on ``target``."""
    n = rho.size
    target = n // 2 if target is None else target
    shift = target - int(np.argmax(rho))
    out = np.zeros_like(rho)
    if shift >= 0:
        out[shift:] = rho[: n - shift]
    else:
        out[: n + shift] = rho[-shift:]
    return out


def aggregate(runs, seed: int | None = None) -> EnsembleResult:
    """Ensemble mean density and the mean of maximum-centered densities."""
    runs = list(runs)
    if not runs:
        raise ValueError("cannot aggregate an empty ensemble")
    grid = runs[0].grid
    for r in runs[1:]:
        if r.grid != grid:
            raise GridMismatch("runs live on different grids")
    finals = [r.final_density for r in runs]
    mean = np.mean(finals, axis=0)
    centered = np.mean([center_on_maximum(f) for f in finals], axis=0)
    return EnsembleResult(runs, mean, centered, seed)


def collapse_time(times, p_left, theta: float = DEFAULT_THETA) -> float | None:
    """First sample time after which the run stays collapsed to one side."""
    p_left = np.asarray(p_left)
    side = np.where(p_left > theta, 1, np.where(p_left < 1.0 - theta, -1, 0))
    if side[-1] == 0:
        return None
    settled = side == side[-1]
    start = len(side) - int(np.argmin(settled[::-1])) if not settled.all() else 0
    return float(times[start])


@dataclass(frozen=True)
class LeftFraction:
    """Probe: mass fraction left of a split point moving with ``velocity``."""

    split0: float
    velocity: float = 0.0

    def __call__(self, rho, grid, t):
        return mass_fraction_left(rho, grid, self.split0 + self.velocity * t)


@dataclass(frozen=True)
class Transmitted:
    """Probe: mass fraction beyond a barrier's right edge."""

    edge: float

    def __call__(self, rho, grid, t):
        return classify_barrier(rho, grid, self.edge)[0]
