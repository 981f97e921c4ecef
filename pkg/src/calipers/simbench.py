"""Simulation study harness: data generators, coverage scoring, aggregation.

Six nonlinear regression models (three homoscedastic, three
heteroscedastic) with normal, Student-t and skew-normal errors drive a
replicated protocol: per replication, fit the requested estimators on a
fresh training sample, build every requested interval at a fixed set of
test predictors, and score conditional coverage by Monte Carlo draws
from the known model.  Replications and the test set own disjoint seeded
streams, so every number in a report is reproducible.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from .calibrate import BenchmarkUndefinedError
from .core import Dataset, PredictionInterval, build_grid
from .kernel import BandwidthStrategy, KernelEstimationError
from .neuralnet import MlpConfig, TrainingDivergedError
from .pipeline import build_point_intervals, validate_methods

__all__ = [
    "SimModelSpec",
    "EvalConfig",
    "EvalReport",
    "MODEL_IDS",
    "PREDICTOR_DIM",
    "TEST_STREAM_INDEX",
    "seed_stream",
    "child_seed",
    "regression_mean",
    "noise_scale",
    "draw_noise",
    "simulate",
    "conditional_draws",
    "true_conditional_cdf",
    "closed_form_conditional_cdf",
    "mc_coverage",
    "evaluate_methods",
    "REPORT_COLUMNS",
    "report_row",
]

log = logging.getLogger(__name__)

MODEL_IDS = (1, 2, 3, 4, 5, 6)
PREDICTOR_DIM = 5

# Stream index 0 is reserved for the shared test set; training
# replications use indices 1..S.
TEST_STREAM_INDEX = 0

# Skew-normal(0, 1, 10) via the two-normal representation.
_SKEW_SHAPE = 10.0
_SKEW_DELTA = _SKEW_SHAPE / math.sqrt(1.0 + _SKEW_SHAPE**2)
_SKEW_SD = math.sqrt(1.0 - 2.0 * _SKEW_DELTA**2 / math.pi)


@dataclass(frozen=True)
class SimModelSpec:
    """Which generator, how many rows, and the seed of the draw."""

    model_id: int
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.model_id not in MODEL_IDS:
            raise ValueError(f"model_id must be in {MODEL_IDS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def seed_stream(base: int, index: int) -> np.random.Generator:
    """Independent deterministic stream for one replication index."""
    return np.random.default_rng(np.random.SeedSequence(base, spawn_key=(index,)))


def child_seed(base: int, *key: int) -> int:
    """Deterministic integer seed derived from a base seed and a key path."""
    ss = np.random.SeedSequence(base, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def regression_mean(model_id: int, x: np.ndarray) -> np.ndarray:
    """Noise-free regression surface of the chosen model."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model_id in (1, 2, 3):
        return x[:, 0] ** 2 + np.sin(x[:, 1] + x[:, 2])
    return x[:, 0] ** 2 + np.exp(x[:, 1] + x[:, 2] / 3.0) + x[:, 3] - x[:, 4]


def noise_scale(model_id: int, x: np.ndarray) -> np.ndarray:
    """Multiplier on the error term; constant one for models 1-3."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model_id in (1, 2, 3):
        return np.ones(x.shape[0])
    return 0.5 + x[:, 1] ** 2 / 2.0 + x[:, 4] ** 2 / 2.0


def draw_noise(
    model_id: int,
    rng: np.random.Generator,
    size: int,
    empirical_normalize: bool = False,
) -> np.ndarray:
    """Error draws: standard normal, t(5), or unit-variance skew-normal.

    The skew-normal sample is scaled by its theoretical standard
    deviation so the noise law is identical across replications;
    ``empirical_normalize`` switches to per-sample standardization.
    The t(5) errors keep their natural variance 5/3.
    """
    kind = (model_id - 1) % 3
    if kind == 0:
        return rng.standard_normal(size)
    if kind == 1:
        return rng.standard_t(5, size)
    u0 = rng.standard_normal(size)
    u1 = rng.standard_normal(size)
    z = _SKEW_DELTA * np.abs(u0) + math.sqrt(1.0 - _SKEW_DELTA**2) * u1
    if empirical_normalize:
        sd = z.std()
        return z / (sd if sd > 0 else 1.0)
    return z / _SKEW_SD


def simulate(spec: SimModelSpec, empirical_normalize: bool = False) -> Dataset:
    """Draw one training sample: X ~ N(0, I_5) rows, then the noise vector."""
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal((spec.n, PREDICTOR_DIM))
    eps = draw_noise(spec.model_id, rng, spec.n, empirical_normalize)
    y = regression_mean(spec.model_id, x) + noise_scale(spec.model_id, x) * eps
    return Dataset(x, y)


def conditional_draws(
    model_id: int, x, v: int, rng: np.random.Generator
) -> np.ndarray:
    """``v`` pseudo responses at a fixed predictor."""
    x = np.asarray(x, dtype=np.float64)
    mu = float(regression_mean(model_id, x)[0])
    sc = float(noise_scale(model_id, x)[0])
    return mu + sc * draw_noise(model_id, rng, v)


def true_conditional_cdf(
    model_id: int, x, q: float, v: int = 5000, rng: np.random.Generator | None = None
) -> float:
    """Monte Carlo conditional CDF at ``q``: the coverage oracle."""
    if v < 1:
        raise ValueError("v must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    return float(np.mean(conditional_draws(model_id, x, v, rng) <= q))


def closed_form_conditional_cdf(model_id: int, x, q) -> float | np.ndarray:
    """Exact conditional CDF for the normal-error models (1 and 4)."""
    if model_id not in (1, 4):
        raise ValueError("closed form available only for models 1 and 4")
    x = np.asarray(x, dtype=np.float64)
    mu = float(regression_mean(model_id, x)[0])
    sc = float(noise_scale(model_id, x)[0])
    out = ndtr((np.asarray(q, dtype=np.float64) - mu) / sc)
    return float(out) if out.ndim == 0 else out


def mc_coverage(
    model_id: int,
    x,
    pi: PredictionInterval,
    v: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Fraction of fresh conditional draws the interval covers."""
    if rng is None:
        rng = np.random.default_rng(0)
    draws = conditional_draws(model_id, x, v, rng)
    return float(np.mean((draws >= pi.lo) & (draws <= pi.hi)))


# ---------------------------------------------------------------------------
# Replicated evaluation protocol.


@dataclass(frozen=True)
class EvalConfig:
    """Scale and estimator settings of one evaluation run."""

    s: int = 20
    t: int = 200
    v: int = 1000
    alpha: float = 0.05
    grid_points: int = 200
    mlp: MlpConfig = field(default_factory=MlpConfig)
    kernel_strategy: BandwidthStrategy = field(
        default_factory=lambda: BandwidthStrategy("mlcv", budget=150)
    )
    standardize: bool = True

    def __post_init__(self):
        if min(self.s, self.t, self.v) < 1:
            raise ValueError("s, t and v must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")


@dataclass(frozen=True)
class EvalReport:
    """Aggregated coverage rate and length for one method."""

    method: str
    cr: float
    al: float
    replications: int
    test_points_used: float
    skipped_benchmark_points: int
    failed_replications: int = 0


def evaluate_methods(
    train_spec: SimModelSpec, methods, cfg: EvalConfig, on_replication=None
) -> list[EvalReport]:
    """Run the replicated protocol and aggregate coverage rate and length.

    The test predictors come from the reserved stream index and are shared
    by all replications, as are the per-point Monte Carlo scoring draws
    (common draws make containment-implied coverage orderings exact).
    Test points whose benchmark interval is undefined (negative variance
    estimate) are excluded from every method's averages in that
    replication so all columns share one denominator; the counts are
    reported.  A replication whose fit fails is dropped and counted.

    ``on_replication(index, intervals, valid)`` is called after each
    successful replication with the per-point intervals by method; useful
    for streaming checks that would be too big to keep in memory.
    """
    methods = validate_methods(methods)
    test_rng = seed_stream(train_spec.seed, TEST_STREAM_INDEX)
    x_test = test_rng.standard_normal((cfg.t, PREDICTOR_DIM))
    draws = np.empty((cfg.t, cfg.v))
    for j in range(cfg.t):
        rng_j = np.random.default_rng(
            np.random.SeedSequence(train_spec.seed, spawn_key=(TEST_STREAM_INDEX, j))
        )
        draws[j] = conditional_draws(train_spec.model_id, x_test[j], cfg.v, rng_j)

    per_rep_cr = []
    per_rep_al = []
    per_rep_used = []
    skipped_total = 0
    failures = 0
    for i in range(1, cfg.s + 1):
        spec_i = replace(train_spec, seed=child_seed(train_spec.seed, i))
        mlp_i = replace(cfg.mlp, seed=child_seed(cfg.mlp.seed, i))
        t0 = time.perf_counter()
        try:
            data = simulate(spec_i)
            grid = build_grid(data.y, cfg.grid_points)
            intervals, valid = build_point_intervals(
                methods, data, grid, x_test, cfg.alpha, mlp_i,
                standardize=cfg.standardize, kernel_strategy=cfg.kernel_strategy,
            )
        except (TrainingDivergedError, KernelEstimationError, BenchmarkUndefinedError) as err:
            log.warning("replication %d failed: %s", i, err)
            failures += 1
            continue
        used = int(valid.sum())
        skipped_total += cfg.t - used
        if used == 0:
            log.warning("replication %d had no usable test points", i)
            failures += 1
            continue
        if on_replication is not None:
            on_replication(i, intervals, valid)
        cr_row = np.empty(len(methods))
        al_row = np.empty(len(methods))
        for m_idx, method in enumerate(methods):
            covs = [
                np.mean((draws[t] >= pi.lo) & (draws[t] <= pi.hi))
                for t, pi in enumerate(intervals[method])
                if valid[t]
            ]
            lens = [pi.length for t, pi in enumerate(intervals[method]) if valid[t]]
            cr_row[m_idx] = np.mean(covs)
            al_row[m_idx] = np.mean(lens)
        per_rep_cr.append(cr_row)
        per_rep_al.append(al_row)
        per_rep_used.append(used)
        log.info(
            "replication %d/%d done in %.1fs (%d/%d test points)",
            i, cfg.s, time.perf_counter() - t0, used, cfg.t,
        )
    if not per_rep_cr:
        raise RuntimeError("all replications failed")
    cr = np.mean(np.vstack(per_rep_cr), axis=0)
    al = np.mean(np.vstack(per_rep_al), axis=0)
    used_mean = float(np.mean(per_rep_used))
    done = len(per_rep_cr)
    return [
        EvalReport(
            method=m,
            cr=float(cr[i]),
            al=float(al[i]),
            replications=done,
            test_points_used=used_mean,
            skipped_benchmark_points=skipped_total,
            failed_replications=failures,
        )
        for i, m in enumerate(methods)
    ]


# ---------------------------------------------------------------------------
# Delimited report rows.

REPORT_COLUMNS = (
    "model", "estimator", "method", "width", "n", "g",
    "cr", "al", "s", "t_used", "skipped", "wall_seconds",
)


def report_row(
    report: EvalReport,
    model: str,
    estimator: str,
    width: str,
    n: int,
    g: int,
    wall_seconds: float,
) -> list[str]:
    """One delimited report line; numeric formatting is fixed so identical
    runs produce byte-identical rows (timing column excluded)."""
    return [
        model,
        estimator,
        report.method,
        width,
        str(n),
        str(g),
        f"{report.cr:.6f}",
        f"{report.al:.6f}",
        str(report.replications),
        f"{report.test_points_used:.1f}",
        str(report.skipped_benchmark_points),
        f"{wall_seconds:.3f}",
    ]
