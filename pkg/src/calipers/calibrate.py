"""Interval constructions over corrected CDF profiles.

Every construction is independent of which estimator produced the
profile.  Grid-search constructions return endpoints on grid points and
record their indices so the one-step widening (`adjust_pi`) can be
applied afterwards; only `quantile_pi` interpolates between grid points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import CdfProfile, Grid, PredictionInterval

__all__ = [
    "BenchmarkUndefinedError",
    "CalibrationRequest",
    "benchmark_pi",
    "quantile_pi",
    "pi_minimal",
    "pi_symmetric",
    "pi_asymmetric",
    "adjust_pi",
    "build_interval",
]

NETWORK_METHODS = ("b", "quantile", "m", "sa", "st", "aa", "at", "aaa")
KERNEL_METHODS = ("aak", "aaak")

_ADJUSTED_TAG = {"aa": "aaa", "aak": "aaak"}


class BenchmarkUndefinedError(ValueError):
    """Second-moment estimate fell below the squared mean estimate."""


@dataclass(frozen=True)
class CalibrationRequest:
    """Everything one query point needs to build calibrated intervals.

    ``profile_avg`` is always required; the twosided variants additionally
    need ``profile_ltor``/``profile_rtol`` and the symmetric ones need
    ``mean_estimate``.
    """

    alpha: float
    grid: Grid
    profile_avg: CdfProfile
    profile_ltor: CdfProfile | None = None
    profile_rtol: CdfProfile | None = None
    mean_estimate: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        for p in (self.profile_avg, self.profile_ltor, self.profile_rtol):
            if p is None:
                continue
            if not p.corrected:
                raise ValueError("calibration requires corrected profiles")
            if not np.array_equal(p.grid.points, self.grid.points):
                raise ValueError("all profiles must share the request grid")

    @property
    def level(self) -> float:
        return 1.0 - self.alpha


def benchmark_pi(mu: float, kappa: float, alpha: float) -> PredictionInterval:
    """Normal-theory interval mean +/- z * sd from estimated first two moments.

    Undefined when the variance estimate kappa - mu^2 is negative;
    evaluation layers skip such query points.
    """
    var = kappa - mu * mu
    if var < 0.0:
        raise BenchmarkUndefinedError(
            f"benchmark PI undefined: kappa - mu^2 = {var:.6g} < 0"
        )
    z = float(ndtri(1.0 - alpha / 2.0))
    s = np.sqrt(var)
    return PredictionInterval(mu - z * s, mu + z * s, method="b", level=1.0 - alpha)


def _invert(points: np.ndarray, values: np.ndarray, level: float) -> float:
    """inf{t : interpolant(t) >= level}, exact on the piecewise-linear CDF.

    Falls back to the nearer grid endpoint when the level is reached
    already at the first point or never at all.
    """
    j = int(np.searchsorted(values, level, side="left"))
    if j >= values.size:
        return float(points[-1])
    if j == 0:
        return float(points[0])
    v0, v1 = values[j - 1], values[j]
    return float(points[j - 1] + (level - v0) * (points[j] - points[j - 1]) / (v1 - v0))


def quantile_pi(p: CdfProfile, alpha: float) -> PredictionInterval:
    """Equal-tailed interval from inverting the interpolated profile."""
    if not p.corrected:
        raise ValueError("quantile_pi needs a corrected profile")
    pts = p.grid.points
    lo = _invert(pts, p.values, alpha / 2.0)
    hi = _invert(pts, p.values, 1.0 - alpha / 2.0)
    return PredictionInterval(lo, hi, method="quantile", level=1.0 - alpha)


def pi_minimal(req: CalibrationRequest) -> PredictionInterval:
    """Shortest grid interval whose averaged-profile mass reaches the level.

    Among equal-length feasible pairs the one covering more mass wins,
    then the smaller left index.  With no feasible pair the full grid
    range is returned and flagged infeasible.
    """
    v = req.profile_avg.values
    q = req.grid.points
    g = v.size
    need = 1.0 - req.alpha
    # First feasible right index for each left index; g where none exists.
    r_idx = np.searchsorted(v, v + need, side="left")
    feasible = r_idx < g
    if not np.any(feasible):
        return PredictionInterval(
            float(q[0]), float(q[-1]), method="m", level=req.level,
            l_index=0, r_index=g - 1, feasible=False,
        )
    l_all = np.nonzero(feasible)[0]
    r_all = r_idx[feasible]
    spans = r_all - l_all
    best = spans == spans.min()
    masses = v[r_all[best]] - v[l_all[best]]
    top = masses == masses.max()
    pick = int(np.argmax(top))  # first (smallest l) among top-mass candidates
    l = int(l_all[best][pick])
    r = int(r_all[best][pick])
    return PredictionInterval(
        float(q[l]), float(q[r]), method="m", level=req.level,
        l_index=l, r_index=r,
    )


def _center_index(points: np.ndarray, mean: float) -> int:
    # argmin of |q_c - mean|; np.argmin takes the first, i.e. smaller index.
    return int(np.argmin(np.abs(points - mean)))


def pi_symmetric(req: CalibrationRequest, mode: str = "avg") -> PredictionInterval:
    """Expand symmetrically around the grid point nearest the mean estimate.

    The smallest half-width k whose clamped window carries mass >= 1 - alpha
    wins.  Mode "avg" measures mass on the averaged profile; "twosided"
    uses the right-to-left correction at the right end and left-to-right
    at the left, which can only widen the interval.
    """
    if req.mean_estimate is None:
        raise ValueError("symmetric calibration needs a mean estimate")
    if mode == "avg":
        f_left = f_right = req.profile_avg.values
        tag = "sa"
    elif mode == "twosided":
        if req.profile_ltor is None or req.profile_rtol is None:
            raise ValueError("twosided calibration needs ltor and rtol profiles")
        f_left = req.profile_ltor.values
        f_right = req.profile_rtol.values
        tag = "st"
    else:
        raise ValueError(f"unknown symmetric mode {mode!r}")
    q = req.grid.points
    g = q.size
    c = _center_index(q, req.mean_estimate)
    need = 1.0 - req.alpha
    for k in range(g):
        l = max(c - k, 0)
        r = min(c + k, g - 1)
        if f_right[r] - f_left[l] >= need:
            return PredictionInterval(
                float(q[l]), float(q[r]), method=tag, level=req.level,
                l_index=l, r_index=r,
            )
    return PredictionInterval(
        float(q[0]), float(q[-1]), method=tag, level=req.level,
        l_index=0, r_index=g - 1, feasible=False,
    )


def pi_asymmetric(
    req: CalibrationRequest, mode: str = "avg", tag: str | None = None
) -> PredictionInterval:
    """Deepest left index under alpha/2 and earliest right index above 1 - alpha/2.

    When no index qualifies on a side, that endpoint falls back to the
    grid boundary.  Mode "twosided" reads the left tail off the
    left-to-right correction and the right tail off the right-to-left one.
    """
    if mode == "avg":
        f_left = f_right = req.profile_avg.values
        tag = tag or "aa"
    elif mode == "twosided":
        if req.profile_ltor is None or req.profile_rtol is None:
            raise ValueError("twosided calibration needs ltor and rtol profiles")
        f_left = req.profile_ltor.values
        f_right = req.profile_rtol.values
        tag = tag or "at"
    else:
        raise ValueError(f"unknown asymmetric mode {mode!r}")
    q = req.grid.points
    g = q.size
    a2 = req.alpha / 2.0
    l = int(np.searchsorted(f_left, a2, side="right")) - 1
    if l < 0:
        l = 0
    r = int(np.searchsorted(f_right, 1.0 - a2, side="left"))
    if r >= g:
        r = g - 1
    if r < l:  # degenerate profile mass concentrated on one point
        l = r = min(l, r)
    return PredictionInterval(
        float(q[l]), float(q[r]), method=tag, level=req.level,
        l_index=l, r_index=r,
    )


def adjust_pi(pi: PredictionInterval, grid: Grid) -> PredictionInterval:
    """Widen a grid-index interval by one grid step on each side, clamped."""
    if pi.l_index is None or pi.r_index is None:
        raise ValueError("adjust_pi needs an interval built from grid indices")
    g = len(grid)
    l = max(0, pi.l_index - 1)
    r = min(g - 1, pi.r_index + 1)
    tag = _ADJUSTED_TAG.get(pi.method, pi.method + "a")
    return PredictionInterval(
        float(grid.points[l]), float(grid.points[r]), method=tag, level=pi.level,
        l_index=l, r_index=r, feasible=pi.feasible,
    )


def build_interval(
    method: str,
    req: CalibrationRequest,
    mu: float | None = None,
    kappa: float | None = None,
) -> PredictionInterval:
    """Construct the interval named by ``method`` from one request.

    ``mu``/``kappa`` are only consulted by the benchmark method.
    Kernel-profile requests use the "aak"/"aaak" tags; the searches are
    identical, only the averaged profile comes from a kernel estimator.
    """
    if method == "b":
        if mu is None or kappa is None:
            raise ValueError("benchmark interval needs mu and kappa estimates")
        return benchmark_pi(mu, kappa, req.alpha)
    if method == "quantile":
        return quantile_pi(req.profile_avg, req.alpha)
    if method == "m":
        return pi_minimal(req)
    if method == "sa":
        return pi_symmetric(req, "avg")
    if method == "st":
        return pi_symmetric(req, "twosided")
    if method == "aa":
        return pi_asymmetric(req, "avg")
    if method == "at":
        return pi_asymmetric(req, "twosided")
    if method == "aaa":
        return adjust_pi(pi_asymmetric(req, "avg"), req.grid)
    if method == "aak":
        return pi_asymmetric(req, "avg", tag="aak")
    if method == "aaak":
        return adjust_pi(pi_asymmetric(req, "avg", tag="aak"), req.grid)
    raise ValueError(f"unknown interval method {method!r}")
