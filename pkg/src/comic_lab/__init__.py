"""Lagrangian particle-tracking transport with computational information criteria."""

__version__ = "0.1.0"

from .fitness import (
    DegenerateFitError,
    FitnessReport,
    aic,
    aicc,
    comic_integral,
    comic_uniform,
    comic_weighted,
    comicc_uniform,
    entropy_integral,
    fitness_report_iid,
    fitness_report_weighted,
    log_fitness_iid,
    pointwise_variance_mle,
    weighted_mse,
)
from .model import (
    AdeParams,
    Domain,
    NoiseSpec,
    ObservationSet,
    analytic_concentration,
    synthesize_observations,
)
from .mtpt import (
    MtptResult,
    PlacementSpec,
    TransferKernel,
    build_transfer_weights,
    init_ensemble,
    local_volumes,
    mtpt_step,
    simulate_mtpt,
)
from .rwpt import (
    BinGrid,
    ParticleEnsemble,
    bin_concentrations,
    default_grid,
    simulate_rwpt,
)
from .estimation import (
    EstimationResult,
    SweepConfig,
    SweepCurve,
    estimate_parameters,
    nelder_mead,
    sweep_particle_numbers,
)
