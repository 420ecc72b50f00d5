"""Stochastic small-momentum scattering events and the decoherent run loop.

An event at position x0 with momentum transfer kappa and relative phase phi
maps

    psi(x) -> (1 + gamma e^{i phi} e^{i kappa (x - x0)}) psi(x)

and renormalizes.  In the recoil-free regime (sigma * kappa small) the
multiplier is replaced by its linearization
1 + i g kappa / (1 + g) (x - x0) with g = gamma e^{i phi}.  A decoherent
run alternates coherent propagation over a fixed period t_c with one such
event; x0 is drawn from the current density by rejection sampling and
kappa is uniform on [-kappa0/2, kappa0/2].
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SamplingStalled, ZeroResult
from .grid import GridSpec, WaveFunction, density, norm
from .observables import RunResult, moments
from .propagator import Potential, StepParams, n_steps, propagate
from .rng import RandomStream

RECOIL_FREE_LIMIT = math.pi / 4
MAX_REJECTIONS = 10**6


class RecoilRegimeWarning(UserWarning):
    """The linearized event operator is used outside sigma*kappa < pi/4."""


@dataclass(frozen=True)
class PhaseMode:
    """How the relative phase phi of each event is chosen.

    ``kind`` is one of ``localizing`` (phi = 0), ``delocalizing`` (phi = pi),
    ``neutral`` (phi uniform on [0, 2 pi) per event) or ``fixed``.
    """

    kind: str
    phi: float | None = None

    def __post_init__(self):
        if self.kind not in ("localizing", "delocalizing", "neutral", "fixed"):
            raise ValueError(f"unknown phase mode {self.kind!r}")
        if self.kind == "fixed" and not (self.phi is not None and 0 <= self.phi < 2 * math.pi):
            raise ValueError("fixed phase must lie in [0, 2 pi)")

    @classmethod
    def parse(cls, text: str) -> PhaseMode:
        t = str(text).strip().lower()
        if t in ("localizing", "localising", "loc"):
            return LOCALIZING
        if t in ("delocalizing", "delocalising", "deloc"):
            return DELOCALIZING
        if t in ("neutral", "random"):
            return NEUTRAL
        return cls("fixed", float(t) % (2 * math.pi))

    def __str__(self):
        return self.kind if self.kind != "fixed" else f"{self.phi!r}"


LOCALIZING = PhaseMode("localizing")
DELOCALIZING = PhaseMode("delocalizing")
NEUTRAL = PhaseMode("neutral")


@dataclass(frozen=True)
class DecoherenceParams:
    t_c: float
    kappa0: float
    gamma: float
    phase_mode: PhaseMode = LOCALIZING
    form: str = "full"

    def __post_init__(self):
        if not self.t_c > 0:
            raise ValueError("event period t_c must be positive")
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if self.form not in ("full", "linearized"):
            raise ValueError(f"event form must be 'full' or 'linearized', got {self.form!r}")

    @classmethod
    def canonical(cls, t_c, kappa0, gamma, phase_mode=LOCALIZING, form="linearized"):
        """Same recoil-free dynamics expressed with gamma = 1/2."""
        phi = 0.0 if phase_mode.kind == "localizing" else math.pi
        g, k = equivalent_params(gamma, kappa0, phi)
        return cls(t_c, k, g, phase_mode, form)


@dataclass(frozen=True)
class EventRecord:
    t: float
    x0: float
    kappa: float
    phi: float


def sample_x0(rho: np.ndarray, grid: GridSpec, rng: RandomStream, batch: int = 64) -> float:
    """Draw a position with probability proportional to rho.

    Uniform points (x_p, p_r) are shot into the box [x_min, x_max] x
    [0, max rho]; the first x_p with p_r < rho(x_p) is returned.
    """
    top = float(np.max(rho))
    if not top > 0:
        raise SamplingStalled("density is identically zero")
    rejected = 0
    while rejected < MAX_REJECTIONS:
        u = rng.random((batch, 2))
        idx = np.minimum((u[:, 0] * grid.n).astype(np.int64), grid.n - 1)
        hits = np.flatnonzero(u[:, 1] * top < rho[idx])
        if hits.size:
            return float(grid.x[idx[hits[0]]])
        rejected += batch
    raise SamplingStalled(f"{MAX_REJECTIONS} consecutive rejections")


def sample_kick(params: DecoherenceParams, rng: RandomStream) -> tuple[float, float]:
    kappa = params.kappa0 * (float(rng.random()) - 0.5)
    mode = params.phase_mode
    if mode.kind == "localizing":
        phi = 0.0
    elif mode.kind == "delocalizing":
        phi = math.pi
    elif mode.kind == "neutral":
        phi = 2 * math.pi * float(rng.random())
    else:
        phi = mode.phi
    return kappa, phi


def _renormalized(psi: WaveFunction, factor: np.ndarray) -> WaveFunction:
    out = factor * psi.psi
    nrm = float(np.sum(np.abs(out) ** 2) * psi.grid.dx)
    if nrm < 1e-12:
        raise ZeroResult(f"event annihilated the wavefunction (norm {nrm:.3g})")
    out /= math.sqrt(nrm)
    return WaveFunction.from_complex(psi.grid, out)


def apply_event_full(psi: WaveFunction, kappa: float, phi: float, gamma: float, x0: float) -> WaveFunction:
    if gamma == 0:
        return psi
    x = psi.grid.x
    factor = 1.0 + gamma * np.exp(1j * (phi + kappa * (x - x0)))
    return _renormalized(psi, factor)


def apply_event_linearized(psi: WaveFunction, kappa: float, phi: float, gamma: float, x0: float) -> WaveFunction:
    if gamma == 0 or kappa == 0:
        return psi
    g = gamma * complex(math.cos(phi), math.sin(phi))
    if abs(1 + g) < 1e-15:
        raise ZeroResult("linearized event is singular for gamma = 1, phi = pi")
    rho = density(psi)
    if rho.any():
        sigma = math.sqrt(moments(rho, psi.grid)[1])
        if sigma * abs(kappa) >= RECOIL_FREE_LIMIT:
            warnings.warn(
                f"sigma*kappa = {sigma * abs(kappa):.3f} is outside the recoil-free regime",
                RecoilRegimeWarning,
                stacklevel=2,
            )
    factor = 1.0 + 1j * g * kappa / (1 + g) * (psi.grid.x - x0)
    return _renormalized(psi, factor)


def equivalent_params(gamma: float, kappa: float, phi: float) -> tuple[float, float]:
    """Map (gamma, kappa) to the equivalent (1/2, kappa~) of the linearized event.

    For phi = 0, kappa~ = 3 gamma kappa / (1 + gamma); for phi = pi,
    kappa~ = gamma kappa / (1 - gamma).
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    if math.isclose(phi, 0.0, abs_tol=1e-12) or math.isclose(phi, 2 * math.pi, abs_tol=1e-12):
        return 0.5, 3 * gamma * kappa / (1 + gamma)
    if math.isclose(phi, math.pi, abs_tol=1e-12):
        if gamma >= 1:
            raise DomainError(f"no equivalent parameters for gamma={gamma} >= 1 at phi = pi")
        return 0.5, gamma * kappa / (1 - gamma)
    raise DomainError(f"equivalence holds only for phi in {{0, pi}}, got {phi}")


def _edge_density(rho: np.ndarray) -> float:
    return float(max(rho[1], rho[-2]))


def run_decoherent(
    psi0: WaveFunction,
    v: Potential,
    p: StepParams,
    d: DecoherenceParams,
    duration: float,
    rng: RandomStream | None,
    snapshot_every: float | None = None,
    probes: dict | None = None,
    run_index: int = 0,
) -> RunResult:
    """Alternate coherent propagation over t_c with single scattering events.

    Observables are sampled at t = 0 and after every event.  ``probes`` maps
    names to callables ``f(rho, grid, t) -> float`` evaluated at the same
    instants.  With ``gamma == 0`` no events are drawn and the result is
    bit-identical to plain coherent propagation.
    """
    grid = psi0.grid
    per_event = n_steps(d.t_c, p.tau)
    if per_event < 1 or not math.isclose(per_event * p.tau, d.t_c, rel_tol=1e-9):
        raise ValueError(f"t_c={d.t_c} must be a positive multiple of tau={p.tau}")
    total = n_steps(duration, p.tau)
    n_events, tail = divmod(total, per_event)
    event_fn = apply_event_full if d.form == "full" else apply_event_linearized
    probes = probes or {}

    times, means, variances, maxima = [], [], [], []
    probe_vals = {name: [] for name in probes}
    snapshots, events = [], []
    edge = 0.0
    next_snap = 0.0

    def record(psi, t, force_snapshot=False):
        nonlocal edge, next_snap
        rho = density(psi)
        mean, var = moments(rho, grid)
        times.append(t)
        means.append(mean)
        variances.append(var)
        maxima.append(float(grid.x[int(np.argmax(rho))]))
        for name, fn in probes.items():
            probe_vals[name].append(float(fn(rho, grid, t)))
        edge = max(edge, _edge_density(rho))
        if snapshot_every and t >= next_snap - 1e-12 * max(1.0, t):
            snapshots.append((t, rho.copy()))
            while next_snap <= t + 1e-12 * max(1.0, t):
                next_snap += snapshot_every
        elif force_snapshot and (not snapshots or snapshots[-1][0] != t):
            snapshots.append((t, rho.copy()))

    psi = psi0
    record(psi, 0.0, force_snapshot=True)
    for j in range(1, n_events + 1):
        psi = propagate(psi, v, p, d.t_c)
        t = j * per_event * p.tau
        if d.gamma > 0:
            x0 = sample_x0(density(psi), grid, rng)
            kappa, phi = sample_kick(d, rng)
            psi = event_fn(psi, kappa, phi, d.gamma, x0)
            events.append(EventRecord(t, x0, kappa, phi))
        record(psi, t, force_snapshot=(j == n_events and tail == 0))
    if tail:
        psi = propagate(psi, v, p, tail * p.tau)
        record(psi, total * p.tau, force_snapshot=True)
    if abs(norm(psi) - 1.0) > 1e-6:
        psi = WaveFunction.from_complex(grid, psi.psi / math.sqrt(norm(psi)))

    return RunResult(
        grid=grid,
        times=np.asarray(times),
        mean_x=np.asarray(means),
        var_x=np.asarray(variances),
        max_pos=np.asarray(maxima),
        events=events,
        snapshots=snapshots,
        final_psi=psi,
        probes={k: np.asarray(vals) for k, vals in probe_vals.items()},
        edge_max=edge,
        run_index=run_index,
    )


def _run_one(args):
    psi0, v, p, d, duration, seed, index, kwargs = args
    return run_decoherent(psi0, v, p, d, duration, RandomStream(seed, index), run_index=index, **kwargs)


def run_ensemble(psi0, v, p, d, duration, seed: int, runs: int, workers: int = 1, **kwargs) -> list:
    """``runs`` independent decoherent runs, returned in run-index order.

    Run ``r`` always uses ``RandomStream(seed, r)``, so serial and parallel
    execution give identical results.
    """
    jobs = [(psi0, v, p, d, duration, seed, r, kwargs) for r in range(runs)]
    if workers <= 1 or runs == 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
