"""Experiment presets and the objects they expand into.

Each preset is a parameter block.  Entries left as ``None`` are derived
from the others when the block is resolved: tau = dx^2/2, t_c = 2 tau,
kappa0 = k0/30, gamma = kappa0/4, barrier height k0^2 placed 3 sigma ahead
of the packet, and two-particle kappa with exp(-2 i kappa d) = i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .decoherence import DecoherenceParams, PhaseMode
from .grid import GaussianSpec, GridSpec, WaveFunction, double_packet, make_gaussian
from .propagator import Potential, StepParams
from .two_particle import ScatterGeometry

SINGLE = {
    "n": 750,
    "dx": 0.02,
    "tau": None,
    "k0": 2.5 * math.pi,
    "sigma": 1.5,
    "x_ini": 7.5,
    "kappa0": None,
    "gamma": None,
    "t_c": None,
    "phase_mode": "localizing",
    "form": "full",
    "duration": 0.4,
    "theta_collapse": 0.95,
}

DOUBLE = {"beta": 0.5, "d_sep": 12.0}
BARRIER = {"barrier_height": None, "barrier_width": 0.5, "barrier_left": None}

PAIR = {
    "d": 1.0,
    "sigma": 1.0,
    "k": 16 * math.pi,
    "k_bar": 16 * math.pi,
    "kappa": None,
    "s": 0.0,
    "s_t": 0.0,
    "mass_a": 1.0,
    "mass_b": 1.0,
    "grid_n": 512,
}


@dataclass(frozen=True)
class Preset:
    name: str
    title: str
    kind: str
    runs: int
    defaults: dict


PRESETS = {
    p.name: p
    for p in (
        Preset("fig1", "free packet, localizing ensemble", "single", 12, dict(SINGLE)),
        Preset("fig2", "maximum and variance tracks of one run", "single", 1, dict(SINGLE)),
        Preset(
            "fig34",
            "double packet collapse",
            "double",
            24,
            {**SINGLE, **DOUBLE, "n": 1500, "x_ini": 13.0},
        ),
        Preset(
            "fig5",
            "barrier transmission and reflection",
            "barrier",
            24,
            {**SINGLE, **BARRIER, "n": 2000, "x_ini": 12.0, "duration": 1.0},
        ),
        Preset("fig6", "localizing, delocalizing and neutral runs", "modes", 24, dict(SINGLE)),
        Preset("fig7", "ensemble and centered densities per phase mode", "modes", 24, dict(SINGLE)),
        Preset("zeno", "two-particle scattering without displacement", "pair", 1, dict(PAIR)),
        Preset("lensing", "two-particle state where trajectories cross", "pair", 1, dict(PAIR)),
        Preset(
            "custom",
            "single ensemble, every parameter from the config",
            "custom",
            12,
            {**SINGLE, **DOUBLE, **BARRIER, "d_sep": 0.0, "barrier_height": 0.0},
        ),
    )
}

ALIASES = {
    "fig1free": "fig1",
    "fig2tracks": "fig2",
    "fig34doublepacket": "fig34",
    "fig5barrier": "fig5",
    "fig6phasemodes": "fig6",
    "fig7centered": "fig7",
    "twoparticlezeno": "zeno",
    "twoparticlelensing": "lensing",
}


def lookup(name: str) -> Preset:
    key = name.strip().lower().replace("_", "")
    key = ALIASES.get(key, key)
    if key not in PRESETS:
        raise KeyError(name)
    return PRESETS[key]


def resolve(params: dict) -> dict:
    """Fill in derived entries of a parameter block."""
    p = dict(params)
    if "dx" in p:
        if p.get("tau") is None:
            p["tau"] = p["dx"] ** 2 / 2
        if p.get("t_c") is None:
            p["t_c"] = 2 * p["tau"]
        if p.get("kappa0") is None:
            p["kappa0"] = p["k0"] / 30
        if p.get("gamma") is None:
            p["gamma"] = p["kappa0"] / 4
    if "barrier_height" in p:
        if p["barrier_height"] is None:
            p["barrier_height"] = p["k0"] ** 2
        if p.get("barrier_left") is None:
            p["barrier_left"] = p["x_ini"] + 3 * p["sigma"]
    if "grid_n" in p and p.get("kappa") is None:
        p["kappa"] = 3 * math.pi / (4 * p["d"])
    return p


@dataclass
class Setup:
    """Everything a single-particle experiment needs."""

    params: dict
    grid: GridSpec
    step: StepParams
    psi0: WaveFunction
    potential: Potential
    decoherence: DecoherenceParams
    duration: float
    theta: float
    split0: float | None = None


def build_setup(params: dict, kind: str = "single") -> Setup:
    p = resolve(params)
    grid = GridSpec(int(p["n"]), float(p["dx"]))
    spec = GaussianSpec(p["sigma"], p["k0"], p["x_ini"])
    split0 = None
    if kind == "double" or (kind == "custom" and p.get("d_sep")):
        psi0 = double_packet(grid, spec, p["d_sep"], p["beta"])
        split0 = p["x_ini"]
    else:
        psi0 = make_gaussian(grid, spec)
    if kind == "barrier" or (kind == "custom" and p.get("barrier_height")):
        pot = Potential.barrier(grid, p["barrier_height"], p["barrier_left"], p["barrier_width"])
    else:
        pot = Potential.free(grid)
    step = StepParams.for_grid(grid, p["tau"])
    step.check(pot)
    mode = p["phase_mode"]
    deco = DecoherenceParams(
        p["t_c"],
        p["kappa0"],
        p["gamma"],
        mode if isinstance(mode, PhaseMode) else PhaseMode.parse(mode),
        p["form"],
    )
    return Setup(p, grid, step, psi0, pot, deco, p["duration"], p["theta_collapse"], split0)


def build_geometry(params: dict) -> ScatterGeometry:
    p = resolve(params)
    return ScatterGeometry(
        d=p["d"],
        s=p["s"],
        s_t=p["s_t"],
        k=p["k"],
        k_bar=p["k_bar"],
        kappa=p["kappa"],
        mass_a=p["mass_a"],
        mass_b=p["mass_b"],
        sigma=p["sigma"],
    )


def preset_setup(name: str, **overrides) -> Setup:
    """Setup of a single-particle preset with optional parameter overrides."""
    preset = lookup(name)
    return build_setup({**preset.defaults, **overrides}, preset.kind)
