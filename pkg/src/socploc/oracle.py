"""Brute-force reference minimizer of the weighted range cost (2-D only).

Independent of the conic machinery: exhaustive grid scan, then a bounded
quasi-Newton polish inside the best cell's neighbourhood.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

_CHUNK = 1 << 20


def _cost_and_grad(x, anchors, distances, w2):
    diff = x - anchors
    norm = np.linalg.norm(diff, axis=1)
    resid = norm - distances
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(norm[:, None] > 0, diff / norm[:, None], 0.0)
    return float(np.sum(w2 * resid**2)), 2.0 * (w2 * resid) @ unit


def grid_scan(anchors, distances, weights, bounds, resolution) -> tuple[np.ndarray, float]:
    """Best grid point; ties go to the first in scan order (x outer, y inner)."""
    (x0, x1), (y0, y1) = bounds
    xs = np.arange(x0, x1 + 0.5 * resolution, resolution)
    ys = np.arange(y0, y1 + 0.5 * resolution, resolution)
    w2 = np.asarray(weights, dtype=float) ** 2
    best, best_val = None, np.inf
    rows = max(1, _CHUNK // ys.size)
    for i in range(0, xs.size, rows):
        X, Y = np.meshgrid(xs[i : i + rows], ys, indexing="ij")
        cost = np.zeros(X.shape)
        for a, d, w in zip(anchors, distances, w2):
            cost += w * (np.hypot(X - a[0], Y - a[1]) - d) ** 2
        k = int(np.argmin(cost))  # first occurrence in row-major order
        if cost.flat[k] < best_val:  # strict: earlier chunks win ties
            best_val = float(cost.flat[k])
            best = np.array([X.flat[k], Y.flat[k]])
    return best, best_val


def oracle_localize(anchors, measurements, weights, bounds, resolution: float) -> np.ndarray:
    """Minimizer of ``sum_k w_k^2 (||x - a_k|| - d_k)^2`` over the box ``bounds``.

    ``bounds`` is ``((xmin, xmax), (ymin, ymax))``. The scan is exhaustive at
    ``resolution``; the polish is confined to one cell around the scan
    winner, so the answer lies within ``resolution`` of a grid point.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    distances = np.asarray(measurements, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if anchors.shape[1] != 2:
        raise ValueError("the oracle is two-dimensional")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (2, 2) or not np.all(np.isfinite(bounds)) or np.any(bounds[:, 1] < bounds[:, 0]):
        raise ValueError("bounds must be finite ((xmin, xmax), (ymin, ymax))")

    start, start_val = grid_scan(anchors, distances, weights, bounds, resolution)
    box = [(max(lo, c - resolution), min(hi, c + resolution)) for c, (lo, hi) in zip(start, bounds)]
    res = minimize(_cost_and_grad, start, args=(anchors, distances, weights**2), jac=True,
                   method="L-BFGS-B", bounds=box)
    if res.fun < start_val:
        return res.x
    return start

