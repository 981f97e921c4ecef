"""Shared fitting and interval-construction plumbing.

Both evaluation layers (the simulation benchmark and the CSV runner) fit
the same estimators and build the same per-point intervals; only the
scoring differs.  This module owns the common middle: one stacked
network fit per grid, one kernel fit per sample, and the per-point
request assembly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibrate import (
    KERNEL_METHODS,
    NETWORK_METHODS,
    CalibrationRequest,
    benchmark_pi,
    build_interval,
)
from .core import CdfProfile, Dataset, Grid, PredictionInterval, Standardizer
from .kernel import BandwidthStrategy, KernelFit, fit_kernel
from .monotone import correct_avg, correct_ltor, correct_rtol
from .neuralnet import (
    CdfEnsemble,
    MlpConfig,
    ensemble_profiles,
    make_indicators,
    predict,
    train_models,
)

__all__ = [
    "Needs",
    "NetworkFits",
    "method_needs",
    "validate_methods",
    "fit_networks",
    "build_point_intervals",
]

_PROFILE_METHODS = frozenset({"quantile", "m", "sa", "st", "aa", "at", "aaa"})
_MEAN_METHODS = frozenset({"b", "sa", "st"})


@dataclass(frozen=True)
class Needs:
    profiles: bool
    mean: bool
    square: bool
    kernel: bool

    @property
    def networks(self) -> bool:
        return self.profiles or self.mean or self.square


def validate_methods(methods) -> list[str]:
    methods = list(methods)
    if not methods:
        raise ValueError("methods list is empty")
    known = set(NETWORK_METHODS) | set(KERNEL_METHODS)
    for m in methods:
        if m not in known:
            raise ValueError(f"unknown method {m!r}")
    if len(set(methods)) != len(methods):
        raise ValueError("duplicate method in list")
    return methods


def method_needs(methods) -> Needs:
    return Needs(
        profiles=any(m in _PROFILE_METHODS for m in methods),
        mean=any(m in _MEAN_METHODS for m in methods),
        square="b" in methods,
        kernel=any(m in KERNEL_METHODS for m in methods),
    )


@dataclass(frozen=True)
class NetworkFits:
    scaler: Standardizer
    mean_model: object | None
    square_model: object | None
    ensemble: CdfEnsemble | None


def fit_networks(
    data: Dataset, grid: Grid, mlp: MlpConfig, standardize: bool, needs: Needs
) -> NetworkFits:
    """Train mean, second-moment and indicator networks in one stacked run."""
    scaler = Standardizer.fit(data.x) if standardize else Standardizer.identity(data.d)
    xs = scaler.transform(data.x)
    g = len(grid)
    rows, seeds, roles = [], [], []
    if needs.mean:
        rows.append(np.asarray(data.y))
        seeds.append(mlp.seed)
        roles.append("mean")
    if needs.square:
        rows.append(np.asarray(data.y) ** 2)
        seeds.append(mlp.seed)
        roles.append("square")
    if needs.profiles:
        for j in range(g):
            rows.append(make_indicators(data.y, float(grid.points[j])))
            seeds.append(mlp.seed)
            roles.append("grid")
    models = train_models(xs, np.stack(rows), mlp, seeds)
    by_role = {"mean": None, "square": None}
    grid_models = []
    for role, model in zip(roles, models):
        if role == "grid":
            grid_models.append(model)
        else:
            by_role[role] = model
    ensemble = None
    if grid_models:
        ensemble = CdfEnsemble(
            models=tuple(grid_models),
            grid=grid,
            mean_model=by_role["mean"],
            scaler=scaler,
        )
    return NetworkFits(
        scaler=scaler,
        mean_model=by_role["mean"],
        square_model=by_role["square"],
        ensemble=ensemble,
    )


def build_point_intervals(
    methods: list[str],
    data: Dataset,
    grid: Grid,
    x_eval: np.ndarray,
    alpha: float,
    mlp: MlpConfig,
    standardize: bool = True,
    kernel_strategy: BandwidthStrategy | None = None,
    kernel_fit: KernelFit | None = None,
):
    """Fit estimators on ``data`` and build every method's interval at each row.

    Returns (intervals, valid) where ``intervals[method]`` is a list of
    per-row PredictionIntervals (None where invalid) and ``valid`` masks
    rows whose benchmark variance estimate was nonnegative; when the
    benchmark method is absent every row is valid.  A prefit
    ``kernel_fit`` skips the bandwidth search (it only depends on the
    training sample, not the grid).
    """
    needs = method_needs(methods)
    x_eval = np.asarray(x_eval, dtype=np.float64)
    t_count = x_eval.shape[0]
    fits = (
        fit_networks(data, grid, mlp, standardize, needs)
        if needs.networks
        else NetworkFits(Standardizer.identity(data.d), None, None, None)
    )
    mu = kp = None
    if needs.mean:
        mu = predict(fits.mean_model, fits.scaler.transform(x_eval))
    if needs.square:
        kp = predict(fits.square_model, fits.scaler.transform(x_eval))
    valid = np.ones(t_count, dtype=bool)
    if needs.square:
        valid = (kp - mu**2) >= 0.0

    raw = ensemble_profiles(fits.ensemble, x_eval) if needs.profiles else None
    if needs.kernel and kernel_fit is None:
        if kernel_strategy is None:
            raise ValueError("kernel methods need a bandwidth strategy or a prefit")
        kernel_fit = fit_kernel(data, kernel_strategy, standardize)

    intervals: dict[str, list[PredictionInterval | None]] = {
        m: [None] * t_count for m in methods
    }
    for idx in range(t_count):
        if not valid[idx]:
            continue
        net_req = None
        if needs.profiles:
            row = raw[idx]
            net_req = CalibrationRequest(
                alpha=alpha,
                grid=grid,
                profile_avg=CdfProfile(grid, correct_avg(row), corrected=True),
                profile_ltor=CdfProfile(grid, correct_ltor(row), corrected=True),
                profile_rtol=CdfProfile(grid, correct_rtol(row), corrected=True),
                mean_estimate=float(mu[idx]) if mu is not None else None,
            )
        ker_req = None
        if needs.kernel:
            ker_req = CalibrationRequest(
                alpha=alpha,
                grid=grid,
                profile_avg=kernel_fit.profile(x_eval[idx], grid),
            )
        for method in methods:
            if method == "b":
                pi = benchmark_pi(float(mu[idx]), float(kp[idx]), alpha)
            elif method in KERNEL_METHODS:
                pi = build_interval(method, ker_req)
            else:
                pi = build_interval(method, net_req)
            intervals[method][idx] = pi
    return intervals, valid
