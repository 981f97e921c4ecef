"""Calibrated prediction intervals from conditional-CDF grids.

Estimate the conditional CDF of a response at fixed grid points (by
neural-network indicator regression or kernel smoothing), repair the
estimates for monotonicity, and search grid indices for intervals whose
estimated mass meets the confidence level.  A simulation benchmark and a
CSV evaluation runner reproduce coverage-rate studies end to end.
"""

from .calibrate import (
    BenchmarkUndefinedError,
    CalibrationRequest,
    adjust_pi,
    benchmark_pi,
    build_interval,
    pi_asymmetric,
    pi_minimal,
    pi_symmetric,
    quantile_pi,
)
from .core import (
    CdfProfile,
    Dataset,
    Grid,
    PredictionInterval,
    Standardizer,
    build_grid,
    eval_profile,
)
from .kernel import (
    BandwidthSelection,
    BandwidthStrategy,
    KernelFit,
    KernelModel,
    conditional_cdf,
    conditional_mean,
    fit_kernel,
    gauss_kernel,
    kernel_profile,
    lscv_objective,
    marginal_density,
    mlcv_objective,
    select_bandwidth,
)
from .monotone import correct_avg, correct_ltor, correct_profile, correct_rtol
from .neuralnet import (
    CdfEnsemble,
    MlpConfig,
    MlpModel,
    TrainingDivergedError,
    ensemble_profile,
    ensemble_profiles,
    fit_cdf_ensemble,
    forward,
    init_network,
    load_model,
    make_indicators,
    optimizer_step,
    predict,
    save_model,
    train_mse,
)
from .simbench import (
    EvalConfig,
    EvalReport,
    SimModelSpec,
    evaluate_methods,
    mc_coverage,
    seed_stream,
    simulate,
    true_conditional_cdf,
)

__version__ = "0.1.0"
