"""Centered finite-difference stencils on uniform grids.

Interior points use fourth-order stencils. ``d1`` and ``d2`` fall back to
second-order formulas near the array ends; ``d3`` leaves its three-point
margins as NaN.
"""

from __future__ import annotations

import numpy as np


def d1(y: np.ndarray, h: float) -> np.ndarray:
    """First derivative: 5-point interior, second-order at the edges."""
    y = np.asarray(y, dtype=float)
    d = np.gradient(y, h, edge_order=2)
    d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    return d


def d2(y: np.ndarray, h: float) -> np.ndarray:
    """Second derivative: 5-point interior, 3-point and one-sided at the edges."""
    y = np.asarray(y, dtype=float)
    d = np.empty_like(y)
    d[2:-2] = (-y[:-4] + 16.0 * y[1:-3] - 30.0 * y[2:-2] + 16.0 * y[3:-1] - y[4:]) / (12.0 * h * h)
    d[1] = (y[0] - 2.0 * y[1] + y[2]) / (h * h)
    d[-2] = (y[-3] - 2.0 * y[-2] + y[-1]) / (h * h)
    d[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / (h * h)
    d[-1] = (2.0 * y[-1] - 5.0 * y[-2] + 4.0 * y[-3] - y[-4]) / (h * h)
    return d


def d3(y: np.ndarray, h: float) -> np.ndarray:
    """Third derivative, 7-point fourth-order stencil; NaN within 3 points of the ends."""
    y = np.asarray(y, dtype=float)
    d = np.full_like(y, np.nan)
    d[3:-3] = (
        y[:-6] / 8.0
        - y[1:-5]
        + 13.0 * y[2:-4] / 8.0
        - 13.0 * y[4:-2] / 8.0
        + y[5:-1]
        - y[6:] / 8.0
    ) / h**3
    return d
