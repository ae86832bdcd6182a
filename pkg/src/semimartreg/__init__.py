"""Adaptive robust nonparametric estimation of a 1-periodic signal observed
in continuous time through semimartingale noise with jumps.

Submodules
----------
signal   periodic signals in the trigonometric basis, smoothness balls
noise    Levy, Ornstein-Uhlenbeck and semi-Markov noise simulators
observe  observation paths, coefficient and variance-proxy estimators
select   Pinsker weight grids, penalized selection, shrinkage
risk     Monte Carlo risk reports: oracle, improvement, efficiency
cli      configuration-driven experiment runner
"""

__version__ = "0.1.0"

from .signal import Signal, SobolevBallSpec, trig_basis, synthesize, fourier_coeffs, sample_sobolev, sobolev_norm
from .noise import (
    LevySpec,
    OuSpec,
    SemiMarkovSpec,
    TauDist,
    NoisePath,
    RobustFamily,
    derive_rng,
    simulate,
    simulate_levy,
    simulate_ou,
    simulate_semimarkov,
    nominal_sigma,
)
from .observe import ObservationPath, FourierEstimates, simulate_observations, estimate_fourier, estimate_variance_proxy
from .select import (
    WeightVector,
    WeightGrid,
    SelectionConfig,
    ShrinkageConfig,
    SelectionResult,
    minimax_rate_vn,
    tau_beta,
    build_weight_grid,
    penalty,
    cost,
    model_select,
    l_star,
    ou_min_dimension,
    make_shrinkage_config,
    shrink,
    improved_cost,
    improved_select,
)
from .risk import (
    RiskReport,
    EfficiencyReport,
    ProjectionPipeline,
    FixedWeightPipeline,
    SelectionPipeline,
    l2_risk_exact,
    monte_carlo_risk,
    robust_risk,
    oracle_report,
    improvement_report,
    pinsker_constant,
    efficiency_sweep,
)
