"""Simulation and tail bounds for stochastic bounded confidence dynamics.

Two agents (or the agents on a graph) meet; with probability G(|x_u - x_v|)
they move to the midpoint of their opinions, and every agent adds its own
noise each slot.  The package simulates these dynamics, evaluates explicit
Chernoff-type bounds on the tail of the two-agent opinion difference, and
checks the bounds and their ingredients by Monte Carlo.
"""

from .bounds import (
    BoundedRegime,
    BoundEvaluation,
    BoundParams,
    ChernoffParams,
    RegimeClass,
    Stability,
    SubGaussianRegime,
    TailQuery,
    baseline_walk_tail,
    bound_sweep,
    bounded_noise_bound,
    choose_chernoff_bounded,
    choose_chernoff_subgaussian,
    classify_regime,
    envelope_excess_window,
    envelope_union_bound,
    subgaussian_bound,
    tail_bound,
)
from .config import ExperimentConfig
from .dynamics import (
    DiffTrajectory,
    OpinionTrajectory,
    simulate_diff_batch,
    simulate_diff_trajectory,
    simulate_multi_agent,
    simulate_random_walk,
    simulate_two_agent_batch,
    simulate_two_agent_opinions,
    step_multi_agent,
    step_two_agent_diff,
    zero_influence,
)
from .errors import (
    BudgetExceededError,
    ConditioningError,
    ConfigurationError,
    InsufficientSamplesError,
    RegimeError,
    SBCError,
)
from .experiments import compare, run_preset
from .model import (
    Constant,
    Gaussian,
    HardThreshold,
    MultiAgentConfig,
    NoiseLevel,
    NoiseSpec,
    PairingPolicy,
    PowerLaw,
    Rademacher,
    TruncatedGaussian,
    TwoAgentConfig,
    UniformBounded,
    eval_influence,
    sample_diff_noise,
    subgaussian_parameter,
)
from .montecarlo import (
    ConditionalMGFResult,
    EnvelopeEstimate,
    MGFCheck,
    OrderingReport,
    TailEstimate,
    check_conditional_mgf,
    check_mgf_envelope,
    check_stochastic_ordering,
    clopper_pearson,
    estimate_envelope_exceedance,
    estimate_query_tail,
    estimate_tail,
    estimate_tail_curve,
    estimate_tail_with_walk,
    run_ensemble,
)
from .rng import RngStream, SeedPolicy

__version__ = "0.1.0"
