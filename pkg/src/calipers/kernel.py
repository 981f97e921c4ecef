"""Product-Gaussian kernel estimation of conditional densities and CDFs.

With Gaussian kernels on both the predictors and the response, the
smoothed conditional CDF and the cross-validation convolution term have
closed forms, so nothing in the evaluation path needs numerical
integration.  The test suite checks those closed forms against Simpson
quadrature.

Bandwidths are selected jointly in log-space by a Nelder-Mead search
over a leave-one-out likelihood (ML-CV) or an integrated-squared-error
surrogate (LS-CV), started from Silverman's rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import CdfProfile, Dataset, Grid, Standardizer

__all__ = [
    "KernelModel",
    "BandwidthStrategy",
    "BandwidthSelection",
    "KernelFit",
    "KernelEstimationError",
    "DegenerateDensityError",
    "LscvUnstableError",
    "gauss_kernel",
    "marginal_density",
    "conditional_cdf",
    "conditional_mean",
    "mlcv_objective",
    "lscv_objective",
    "silverman_bandwidths",
    "select_bandwidth",
    "kernel_profile",
    "fit_kernel",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Leave-one-out density floors before the objectives give up.
MLCV_DENSITY_FLOOR = 1e-300
LSCV_DENSITY_FLOOR = 1e-150


class KernelEstimationError(RuntimeError):
    """Kernel objective could not be evaluated at these bandwidths."""


class DegenerateDensityError(KernelEstimationError):
    """A leave-one-out marginal density underflowed to (near) zero."""


class LscvUnstableError(KernelEstimationError):
    """LS-CV denominator too small; the squared term is numerically zero."""


@dataclass(frozen=True)
class KernelModel:
    """Retained training sample with predictor and response bandwidths."""

    data: Dataset
    h: float
    h0: float

    def __post_init__(self):
        if self.h <= 0 or self.h0 <= 0:
            raise ValueError("bandwidths must be positive")


@dataclass(frozen=True)
class BandwidthStrategy:
    """How to pick (h, h0): fixed values or a cross-validation search."""

    tag: str = "mlcv"
    h: float | None = None
    h0: float | None = None
    budget: int = 200

    def __post_init__(self):
        if self.tag not in ("fixed", "mlcv", "lscv"):
            raise ValueError("strategy tag must be fixed, mlcv or lscv")
        if self.tag == "fixed":
            if self.h is None or self.h0 is None or self.h <= 0 or self.h0 <= 0:
                raise ValueError("fixed strategy needs positive h and h0")
        elif self.budget < 1:
            raise ValueError("cross-validation budget must be >= 1")


@dataclass(frozen=True)
class BandwidthSelection:
    """Selected bandwidths; ``fallback`` marks a failed search that
    returned Silverman's initialization instead."""

    h: float
    h0: float
    fallback: bool = False


def gauss_kernel(v):
    """Standard normal density; nonnegative, symmetric, integrates to one."""
    v = np.asarray(v, dtype=np.float64)
    out = np.exp(-0.5 * v * v) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def _log_weights(model: KernelModel, x: np.ndarray) -> np.ndarray:
    """Log product-kernel values log K((x - X_i)/h) for every sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.data.d,):
        raise ValueError(f"query has shape {x.shape}, expected ({model.data.d},)")
    diff = (model.data.x - x) / model.h
    return -0.5 * np.einsum("ij,ij->i", diff, diff) - model.data.d * _LOG_SQRT_2PI


def _weights(model: KernelModel, x: np.ndarray) -> np.ndarray:
    """Normalized Nadaraya-Watson weights; always sum to one."""
    lw = _log_weights(model, x)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def marginal_density(model: KernelModel, x) -> float:
    """Kernel density of the predictors at ``x``."""
    lw = _log_weights(model, np.asarray(x, dtype=np.float64))
    n, d = model.data.n, model.data.d
    return float(np.exp(lw).sum() / (n * model.h**d))


def conditional_cdf(model: KernelModel, x, q):
    """Smoothed conditional CDF: sum of weights times Phi((q - Y_i)/h0).

    Exactly the integral of the kernel conditional density up to ``q``;
    accepts a scalar or a vector of thresholds.
    """
    w = _weights(model, np.asarray(x, dtype=np.float64))
    q = np.asarray(q, dtype=np.float64)
    z = (q[..., None] - model.data.y) / model.h0
    out = ndtr(z) @ w
    return float(out) if out.ndim == 0 else out


def conditional_mean(model: KernelModel, x) -> float:
    """Weighted response mean; the response smoothing adds no bias term."""
    w = _weights(model, np.asarray(x, dtype=np.float64))
    return float(w @ model.data.y)


def _pairwise_logk(data: Dataset, h: float) -> np.ndarray:
    """Log product-kernel matrix over all sample pairs, diagonal excluded later."""
    xs = data.x / h
    sq = np.einsum("ij,ij->i", xs, xs)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (xs @ xs.T)
    np.maximum(d2, 0.0, out=d2)
    return -0.5 * d2 - data.d * _LOG_SQRT_2PI


def _loo_sums(data: Dataset, h: float):
    """Kernel matrix with a zeroed diagonal and its row sums."""
    K = np.exp(_pairwise_logk(data, h))
    np.fill_diagonal(K, 0.0)
    return K, K.sum(axis=1)


def mlcv_objective(data: Dataset, h: float, h0: float) -> float:
    """Leave-one-out conditional log-likelihood of the sample."""
    if data.n < 2:
        raise ValueError("mlcv needs at least two samples")
    if h <= 0 or h0 <= 0:
        raise ValueError("bandwidths must be positive")
    K, S = _loo_sums(data, h)
    marg = S / ((data.n - 1) * h**data.d)
    if np.any(marg < MLCV_DENSITY_FLOOR):
        raise DegenerateDensityError("degenerate leave-one-out density")
    dy = (data.y[:, None] - data.y[None, :]) / h0
    Ky = np.exp(-0.5 * dy * dy) / _SQRT_2PI
    np.fill_diagonal(Ky, 0.0)
    cond = (K * Ky).sum(axis=1) / (h0 * S)
    with np.errstate(divide="ignore"):
        return float(np.log(cond).sum())


def lscv_objective(data: Dataset, h: float, h0: float) -> float:
    """Integrated-squared-error surrogate I1 - 2*I2 from leave-one-out sums.

    The response-kernel convolution integral has the closed form
    (h0/sqrt(2)) * phi(dy / (sqrt(2) h0)); the h0 and sample-count factors
    cancel against the squared marginal in the ratio below.
    """
    if data.n < 3:
        raise ValueError("lscv needs at least three samples")
    if h <= 0 or h0 <= 0:
        raise ValueError("bandwidths must be positive")
    K, S = _loo_sums(data, h)
    marg = S / ((data.n - 1) * h**data.d)
    if np.any(marg < LSCV_DENSITY_FLOOR):
        raise LscvUnstableError("lscv unstable")
    dy = (data.y[:, None] - data.y[None, :]) / h0
    Ky = np.exp(-0.5 * dy * dy) / _SQRT_2PI
    np.fill_diagonal(Ky, 0.0)
    i2 = float(((K * Ky).sum(axis=1) / (h0 * S)).mean())
    conv = np.exp(-0.25 * dy * dy) / _SQRT_2PI  # phi(dy/sqrt(2))
    num = ((K @ conv) * K).sum(axis=1)
    i1 = float((num / (math.sqrt(2.0) * h0 * S * S)).mean())
    return i1 - 2.0 * i2


def silverman_bandwidths(data: Dataset) -> tuple[float, float]:
    """Rule-of-thumb start: 1.06 * sd * n^(-1/(4+d)) per axis."""
    factor = 1.06 * data.n ** (-1.0 / (4.0 + data.d))
    sx = float(np.mean(np.std(data.x, axis=0, ddof=1))) if data.n > 1 else 1.0
    sy = float(np.std(data.y, ddof=1)) if data.n > 1 else 1.0
    sx = sx if sx > 0 else 1.0
    sy = sy if sy > 0 else 1.0
    return factor * sx, factor * sy


def _nelder_mead(fn, x0, step=0.3, budget=200, xtol=1e-4, ftol=1e-9):
    """Simplex minimizer with a hard cap on objective evaluations."""
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    x0 = np.asarray(x0, dtype=np.float64)
    dim = x0.size
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        return fn(x)

    simplex = [x0.copy()]
    for i in range(dim):
        v = x0.copy()
        v[i] += step
        simplex.append(v)
    fvals = [call(v) for v in simplex]
    while evals < budget:
        order = np.argsort(fvals)
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        spread = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if spread < xtol and abs(fvals[-1] - fvals[0]) < ftol:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = call(xr)
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[0]:
            if evals >= budget:
                simplex[-1], fvals[-1] = xr, fr
                break
            xe = centroid + gamma * (centroid - simplex[-1])
            fe = call(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        else:
            if evals >= budget:
                break
            xc = centroid + rho * (simplex[-1] - centroid)
            fc = call(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, dim + 1):
                    if evals >= budget:
                        break
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    fvals[i] = call(simplex[i])
    best = int(np.argmin(fvals))
    return simplex[best], fvals[best], evals


def select_bandwidth(data: Dataset, strategy: BandwidthStrategy) -> BandwidthSelection:
    """Fixed passthrough, or a log-space Nelder-Mead search from Silverman.

    A budget too small for even one simplex move returns the Silverman
    point unchanged; objective failures on the initial simplex fall back
    to Silverman with the ``fallback`` flag raised.
    """
    if strategy.tag == "fixed":
        return BandwidthSelection(float(strategy.h), float(strategy.h0))
    if data.n < 4:
        raise ValueError("cross-validation needs at least four samples")
    hs, h0s = silverman_bandwidths(data)
    x0 = np.log([hs, h0s])
    if strategy.budget < 4:
        return BandwidthSelection(hs, h0s)
    objective = mlcv_objective if strategy.tag == "mlcv" else lscv_objective
    sign = -1.0 if strategy.tag == "mlcv" else 1.0
    n_initial = x0.size + 1
    seen = {"count": 0}

    def fn(u):
        seen["count"] += 1
        try:
            val = sign * objective(data, float(np.exp(u[0])), float(np.exp(u[1])))
        except KernelEstimationError:
            if seen["count"] <= n_initial:
                raise
            return np.inf
        return val if np.isfinite(val) else np.inf

    try:
        best, _, _ = _nelder_mead(fn, x0, budget=strategy.budget)
    except KernelEstimationError:
        return BandwidthSelection(hs, h0s, fallback=True)
    return BandwidthSelection(float(np.exp(best[0])), float(np.exp(best[1])))


def kernel_profile(model: KernelModel, x_f, grid: Grid) -> CdfProfile:
    """Conditional CDF at every grid point; monotone by construction.

    The running maximum only irons out sub-ulp rounding noise in the
    otherwise increasing sums.
    """
    values = conditional_cdf(model, x_f, grid.points)
    return CdfProfile(
        grid=grid, values=np.maximum.accumulate(values), corrected=True
    )


@dataclass(frozen=True)
class KernelFit:
    """Kernel model bound to the predictor standardizer it was fit under."""

    model: KernelModel
    scaler: Standardizer
    selection: BandwidthSelection

    def profile(self, x_f, grid: Grid) -> CdfProfile:
        return kernel_profile(self.model, self.scaler.transform(x_f), grid)

    def mean(self, x_f) -> float:
        return conditional_mean(self.model, self.scaler.transform(x_f))


def fit_kernel(
    data: Dataset, strategy: BandwidthStrategy, standardize: bool = True
) -> KernelFit:
    """Standardize predictors, choose bandwidths, and wrap the model.

    A common predictor bandwidth is only meaningful on comparable scales,
    so standardization defaults on; the response axis is left untouched
    to keep intervals in response units.
    """
    scaler = Standardizer.fit(data.x) if standardize else Standardizer.identity(data.d)
    scaled = Dataset(scaler.transform(data.x), data.y)
    selection = select_bandwidth(scaled, strategy)
    model = KernelModel(scaled, selection.h, selection.h0)
    return KernelFit(model=model, scaler=scaler, selection=selection)
