"""Sparse system identification with p-norm penalised (leaky) LMS filters."""
from .exceptions import ConfigError, DimensionError, DivergenceError, ParameterError
from .filters import (
    FilterParams,
    LeakSign,
    UpdateResult,
    llms_update,
    lms_update,
    lp_llms_update,
    lp_lms_update,
    lp_norm,
    lp_penalty_gradient,
    predict,
    sgn,
)
from .signals import (
    Ar1Config,
    NoiseConfig,
    NormalizeMode,
    PhaseSchedule,
    PhaseSpec,
    RngStream,
    SparseSystemSpec,
    build_default_schedule,
    gen_ar1_input,
    gen_noise,
    gen_sparse_system,
    synthesize_desired,
)
from .experiment import (
    AlgorithmSpec,
    ExperimentConfig,
    estimate_lambda_max,
    msd,
    default_algorithms,
    run_experiment,
    run_trial,
    steady_state,
)
from .estimators import (
    LMSFilter,
    LeakyLMSFilter,
    LpLMSFilter,
    LpLeakyLMSFilter,
    TappedDelayLine,
)

__version__ = "0.1.0"
