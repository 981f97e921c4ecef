"""Shared domain types: datasets, response grids, CDF profiles, intervals.

Everything here is a plain immutable value object.  Estimators
(`calipers.neuralnet`, `calipers.kernel`) produce `CdfProfile`s on a
common `Grid`; the interval constructions in `calipers.calibrate`
consume them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "Grid",
    "CdfProfile",
    "PredictionInterval",
    "Standardizer",
    "build_grid",
    "eval_profile",
]

# Relative tolerance for the equal-spacing check on grids.
GRID_SPACING_RTOL = 1e-9


def _frozen_array(a, dtype=np.float64, ndim=None):
    arr = np.array(a, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got {arr.ndim}-d")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Paired predictor matrix ``x`` (n rows, d columns) and response ``y``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x, ndim=2))
        object.__setattr__(self, "y", _frozen_array(self.y, ndim=1))
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]} entries"
            )
        if self.n < 1 or self.d < 1:
            raise ValueError("dataset needs at least one row and one predictor")
        if not np.all(np.isfinite(self.x)) or not np.all(np.isfinite(self.y)):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class Grid:
    """Equally spaced points on the response axis."""

    points: np.ndarray
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen_array(self.points, ndim=1))
        pts = self.points
        if pts.size < 2:
            raise ValueError("grid needs at least two points")
        gaps = np.diff(pts)
        if np.any(gaps <= 0):
            raise ValueError("grid points must be strictly increasing")
        scale = max(abs(self.spacing), 1e-30)
        if np.any(np.abs(gaps - self.spacing) > GRID_SPACING_RTOL * scale):
            raise ValueError("grid points are not equally spaced")

    def __len__(self) -> int:
        return self.points.size


@dataclass(frozen=True)
class CdfProfile:
    """Conditional-CDF values at the grid points for one query predictor.

    ``corrected`` marks profiles that are valid CDFs on the grid
    (nondecreasing, inside [0, 1]).  Raw network outputs are stored
    uncorrected; `calipers.monotone` produces the corrected form.
    """

    grid: Grid
    values: np.ndarray
    corrected: bool

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=1))
        if self.values.size != len(self.grid):
            raise ValueError(
                f"profile has {self.values.size} values for a "
                f"{len(self.grid)}-point grid"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("profile values must be finite")
        if self.corrected:
            if np.any(np.diff(self.values) < 0):
                raise ValueError("corrected profile must be nondecreasing")
            if self.values[0] < 0.0 or self.values[-1] > 1.0:
                raise ValueError("corrected profile must lie within [0, 1]")


@dataclass(frozen=True)
class PredictionInterval:
    """Closed interval [lo, hi] with its construction tag and nominal level.

    ``l_index``/``r_index`` hold the 0-based grid indices of the endpoints
    when the interval was built by a grid-index search; ``feasible`` is
    False when no index pair satisfied the mass constraint and the full
    grid range was returned instead.
    """

    lo: float
    hi: float
    method: str
    level: float
    l_index: int | None = None
    r_index: int | None = None
    feasible: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if self.lo > self.hi:
            raise ValueError(f"interval has lo={self.lo} > hi={self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, y) -> bool | np.ndarray:
        return (y >= self.lo) & (y <= self.hi)


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-score transform fit on training predictors.

    Zero-variance columns keep scale 1 so the transform stays defined.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        return cls(_frozen_array(mean), _frozen_array(scale))

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale


def build_grid(y, g: int) -> Grid:
    """Split [min(y), max(y)] into ``g`` equally spaced points, endpoints included.

    Spacing is (max - min) / (g - 1).  A constant response has no range to
    split and is rejected.
    """
    y = np.asarray(y, dtype=np.float64)
    if g < 2:
        raise ValueError("grid needs at least two points")
    if y.size == 0:
        raise ValueError("empty response vector")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    lo, hi = float(y.min()), float(y.max())
    if hi <= lo:
        raise ValueError("degenerate response range")
    return Grid(np.linspace(lo, hi, g), (hi - lo) / (g - 1))


def eval_profile(p: CdfProfile, t) -> float | np.ndarray:
    """Piecewise-linear interpolation of a corrected profile, clamped outside the grid.

    Values below the first grid point return the first profile value and
    symmetrically above; linear extrapolation could leave [0, 1].
    """
    if not p.corrected:
        raise ValueError("eval_profile needs a corrected profile")
    out = np.interp(t, p.grid.points, p.values)
    return float(out) if np.isscalar(t) or np.ndim(t) == 0 else out
