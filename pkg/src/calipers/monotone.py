"""Monotonicity corrections for raw CDF estimates at grid points.

Indicator-regression estimates of F(q_1) .. F(q_g) can cross and leave
[0, 1].  Three corrections repair them: a running maximum from the left,
a running minimum from the right, and their average.  The left-to-right
result dominates the right-to-left one pointwise, so the average always
lies between the two; the widened interval constructions rely on that
ordering.
"""

from __future__ import annotations

import numpy as np

from .core import CdfProfile

__all__ = [
    "CORRECTION_METHODS",
    "correct_ltor",
    "correct_rtol",
    "correct_avg",
    "correct_profile",
]

CORRECTION_METHODS = ("ltor", "rtol", "avg")


def correct_ltor(values) -> np.ndarray:
    """Running maximum from the left, clamped into [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 1:
        raise ValueError("empty value vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite value in profile")
    return np.clip(np.maximum.accumulate(v), 0.0, 1.0)


def correct_rtol(values) -> np.ndarray:
    """Running minimum from the right, clamped into [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 1:
        raise ValueError("empty value vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite value in profile")
    return np.clip(np.minimum.accumulate(v[::-1])[::-1], 0.0, 1.0)


def correct_avg(values) -> np.ndarray:
    """Elementwise mean of the left-to-right and right-to-left corrections."""
    return 0.5 * (correct_ltor(values) + correct_rtol(values))


_CORRECTIONS = {"ltor": correct_ltor, "rtol": correct_rtol, "avg": correct_avg}


def correct_profile(p: CdfProfile, method: str) -> CdfProfile:
    """Apply one correction to a profile's grid values and mark it corrected.

    Interpolation between grid points stays in `calipers.core`; corrections
    act on the grid values only, before any interpolation.
    """
    try:
        fn = _CORRECTIONS[method]
    except KeyError:
        raise ValueError(f"unknown correction method {method!r}") from None
    return CdfProfile(grid=p.grid, values=fn(p.values), corrected=True)
