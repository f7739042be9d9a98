"""Quantum trajectories of ultracold lattice atoms measured by counting cavity photons.

The conditional state is reduced to a distribution over the scalar ``z`` that
fixes the scattered light amplitude; a brute-force Fock-space oracle checks
the reduction on small lattices.
"""

from __future__ import annotations

from .config import ConfigError, RunConfig, dump_config, parse_config
from .ensemble import EnsembleSummary, child_seed, ensemble_run
from .geometry import (
    BranchSet,
    GeometryPreset,
    OpticalGeometry,
    Scenario,
    UnsupportedScenarioError,
    branch_rates,
    reduction_weights,
    steady_alpha,
    tau_rate,
)
from .lattice import (
    InitialState,
    LatticeSpec,
    SizeError,
    StateKind,
    ZDistribution,
    brute_force_z_distribution,
    enumerate_configurations,
    initial_z_distribution,
)
from .oracle import (
    FullConditionalState,
    PhaseAmbiguityError,
    fixed_dt_sampler,
    oracle_at,
    oracle_check,
    oracle_evolve,
    oracle_initial,
    superposition_phase,
    z_marginal,
)
from .trajectory import (
    ConditionalState,
    ImpossibleJumpError,
    Outcome,
    OutcomeKind,
    StopRule,
    TrajectoryRecord,
    advance_no_count,
    apply_jump,
    classify_outcome,
    conditioned_photon_number,
    fwhm,
    initial_conditional_state,
    run_trajectory,
    sample_waiting_time,
    simulate_batch,
    state_at,
)

__version__ = "0.1.0"

__all__ = [
    "BranchSet",
    "ConditionalState",
    "FullConditionalState",
    "GeometryPreset",
    "ImpossibleJumpError",
    "InitialState",
    "LatticeSpec",
    "OpticalGeometry",
    "Outcome",
    "OutcomeKind",
    "PhaseAmbiguityError",
    "Scenario",
    "SizeError",
    "StateKind",
    "StopRule",
    "TrajectoryRecord",
    "UnsupportedScenarioError",
    "ZDistribution",
    "advance_no_count",
    "apply_jump",
    "branch_rates",
    "brute_force_z_distribution",
    "classify_outcome",
    "conditioned_photon_number",
    "enumerate_configurations",
    "fixed_dt_sampler",
    "fwhm",
    "initial_conditional_state",
    "initial_z_distribution",
    "oracle_at",
    "oracle_check",
    "oracle_evolve",
    "oracle_initial",
    "reduction_weights",
    "run_trajectory",
    "sample_waiting_time",
    "simulate_batch",
    "state_at",
    "steady_alpha",
    "superposition_phase",
    "tau_rate",
    "z_marginal",
]
