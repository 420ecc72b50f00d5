"""Decoherent wavepacket propagation and two-particle Schmidt analysis."""

from .decoherence import (
    DELOCALIZING,
    LOCALIZING,
    NEUTRAL,
    DecoherenceParams,
    EventRecord,
    PhaseMode,
    apply_event_full,
    apply_event_linearized,
    equivalent_params,
    run_decoherent,
    run_ensemble,
    sample_kick,
    sample_x0,
)
from .grid import GaussianSpec, GridSpec, WaveFunction, double_packet, make_gaussian
from .observables import aggregate, classify_barrier, collapse_state, moments
from .harness import ExperimentConfig, parse_config, run_experiment
from .presets import PRESETS, preset_setup
from .propagator import Potential, StepParams, propagate, step
from .rng import RandomStream
from .two_particle import (
    ScatterGeometry,
    TwoParticleState,
    build_initial,
    discretize,
    displace,
    ld_basis_check,
    lensing_analysis,
    schmidt_analytic_2x2,
    schmidt_numeric,
    scatter_zeno,
)

__version__ = "0.1.0"
