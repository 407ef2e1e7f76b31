"""Least-squares slope fitting for log-log convergence data."""

from __future__ import annotations

import numpy as np


def loglog_slope(s_values, errors) -> float:
    """Fit log(errors) = slope * log(s_values) + c and return the slope.

    Both arrays must be strictly positive and of equal length >= 2.
    """
    s = np.asarray(s_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if s.shape != e.shape or s.ndim != 1 or s.size < 2:
        raise ValueError("need two or more (s, error) pairs")
    if np.any(s <= 0.0) or np.any(e <= 0.0):
        raise ValueError("slope fit requires positive values")
    return float(np.polyfit(np.log(s), np.log(e), 1)[0])


def effectively_zero(errors, scale: float = 1.0, floor: float = 1e-12) -> bool:
    """True when every error sits at roundoff level for the given scale."""
    e = np.asarray(errors, dtype=float)
    return bool(np.all(np.abs(e) <= floor * max(scale, 1.0)))
