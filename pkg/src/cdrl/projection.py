"""Cramér projection onto a categorical support grid.

Two independent routes are provided.  :func:`project` splits every atom
between its two bracketing grid points; :func:`project_via_hats` takes the
expectation of each grid point's hat function.  They must agree.
"""

from __future__ import annotations

import numpy as np

from .measures import (
    CategoricalDistribution,
    Distribution,
    ParameterError,
    ReturnDistributionFunction,
    SupportGrid,
)

__all__ = [
    "project_dirac",
    "project",
    "projection_matrix",
    "hat_function",
    "project_via_hats",
    "project_rdf",
]


def _split(z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower index and the two split weights for each location in ``y``.

    A location in ``(z_i, z_{i+1}]`` gets weight ``(z_{i+1} - y) / gap`` at
    ``i`` and ``(y - z_i) / gap`` at ``i + 1``.  Locations outside the grid
    are clamped to the nearest end point.
    """
    y = np.asarray(y, dtype=np.float64)
    k = z.size
    i = np.clip(np.searchsorted(z, y, side="left") - 1, 0, k - 2)
    lo, hi = z[i], z[i + 1]
    gap = hi - lo
    w_lo = (hi - y) / gap
    w_hi = (y - lo) / gap
    below = y <= z[0]
    above = y > z[-1]
    w_lo = np.where(below, 1.0, np.where(above, 0.0, w_lo))
    w_hi = np.where(below, 0.0, np.where(above, 1.0, w_hi))
    return i, w_lo, w_hi


def _project_arrays(z: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    i, w_lo, w_hi = _split(z, y)
    p = np.zeros(z.size)
    np.add.at(p, i, m * w_lo)
    np.add.at(p, i + 1, m * w_hi)
    return p


def project_dirac(grid: SupportGrid, y: float) -> CategoricalDistribution:
    return CategoricalDistribution(grid, _project_arrays(grid.locations, np.array([y]), np.ones(1)))


def project(grid: SupportGrid, d: Distribution) -> CategoricalDistribution:
    """Project a finite mixture of Diracs atom by atom."""
    if isinstance(d, CategoricalDistribution) and d.grid == grid:
        return d
    p = _project_arrays(grid.locations, d.locations, d.masses)
    return CategoricalDistribution(grid, p)


def projection_matrix(grid: SupportGrid, r: float, gamma: float) -> np.ndarray:
    """``K x K`` matrix whose row ``j`` is the projection of ``delta_{r + gamma z_j}``.

    Row-vector probabilities times this matrix give the projected pushforward.
    """
    z = grid.locations
    i, w_lo, w_hi = _split(z, r + gamma * z)
    mat = np.zeros((z.size, z.size))
    rows = np.arange(z.size)
    np.add.at(mat, (rows, i), w_lo)
    np.add.at(mat, (rows, i + 1), w_hi)
    return mat


def hat_function(grid: SupportGrid, i: int, x):
    """Piecewise-linear hat centred on grid point ``i`` (0-based).

    The first and last hats stay at 1 beyond the ends of the grid.
    """
    z = grid.locations
    k = z.size
    if not 0 <= i < k:
        raise ParameterError(f"hat index {i} outside 0..{k - 1}")
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    if i < k - 1:
        right = (x >= z[i]) & (x <= z[i + 1])
        out = np.where(right, (z[i + 1] - x) / (z[i + 1] - z[i]), out)
    if i > 0:
        left = (x >= z[i - 1]) & (x <= z[i])
        out = np.where(left, (x - z[i - 1]) / (z[i] - z[i - 1]), out)
    if i == 0:
        out = np.where(x <= z[0], 1.0, out)
    if i == k - 1:
        out = np.where(x >= z[-1], 1.0, out)
    return float(out) if out.ndim == 0 else out


def project_via_hats(grid: SupportGrid, d: Distribution) -> CategoricalDistribution:
    """Probability at each grid point is the expectation of its hat under ``d``."""
    y = np.asarray(d.locations)
    m = np.asarray(d.masses)
    p = np.array([np.dot(m, hat_function(grid, i, y)) for i in range(grid.k)])
    return CategoricalDistribution(grid, p)


def project_rdf(grid: SupportGrid, eta: ReturnDistributionFunction) -> ReturnDistributionFunction:
    return eta.map(lambda d: project(grid, d))
