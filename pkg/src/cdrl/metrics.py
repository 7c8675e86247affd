"""One-dimensional probability metrics and the stochastic-dominance order.

All distances are exact for finitely supported measures: the integrands are
step functions, so integrals reduce to sums over merged breakpoints.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .measures import (
    CategoricalDistribution,
    Distribution,
    ParameterError,
    ReturnDistributionFunction,
    SupportGrid,
)

__all__ = [
    "wasserstein_p",
    "cramer_l2",
    "cramer_l2_sq",
    "grid_cramer_sq",
    "sup_metric",
    "kl_divergence",
    "stochastically_dominates",
    "rdf_dominates",
    "DOMINANCE_TOL",
]

log = logging.getLogger(__name__)

DOMINANCE_TOL = 1e-12


def _cum(m: np.ndarray) -> np.ndarray:
    return np.concatenate(([0.0], np.cumsum(m)))


def wasserstein_p(a: Distribution, b: Distribution, p: float = 1.0) -> float:
    """p-Wasserstein distance through the quantile functions.

    Both quantile functions are constant between consecutive cumulative
    masses of either measure, so the integral over ``u`` is a finite sum.
    """
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    ca, cb = np.cumsum(a.masses), np.cumsum(b.masses)
    u = np.unique(np.concatenate(([0.0, 1.0], ca[:-1], cb[:-1])))
    u = u[(u >= 0) & (u <= 1)]
    du = np.diff(u)
    mid = 0.5 * (u[:-1] + u[1:])
    ia = np.minimum(np.searchsorted(ca, mid, side="left"), ca.size - 1)
    ib = np.minimum(np.searchsorted(cb, mid, side="left"), cb.size - 1)
    gap = np.abs(np.asarray(a.locations)[ia] - np.asarray(b.locations)[ib])
    return float(np.dot(du, gap**p) ** (1.0 / p))


def cramer_l2_sq(a, b) -> float:
    """Squared Cramér distance, the integral of the squared CDF difference."""
    xs = np.union1d(a.locations, b.locations)
    if xs.size < 2:
        return 0.0
    fa = _cum(a.masses)[np.searchsorted(a.locations, xs[:-1], side="right")]
    fb = _cum(b.masses)[np.searchsorted(b.locations, xs[:-1], side="right")]
    return float(np.dot((fa - fb) ** 2, np.diff(xs)))


def cramer_l2(a, b) -> float:
    return math.sqrt(cramer_l2_sq(a, b))


def grid_cramer_sq(grid: SupportGrid, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared Cramér distances between probability arrays sharing ``grid``.

    Works along the last axis, so ``(S, A, K)`` inputs give an ``(S, A)`` result.
    """
    df = np.cumsum(np.asarray(p) - np.asarray(q), axis=-1)[..., :-1]
    return np.sum(df**2 * grid.gaps, axis=-1)


def sup_metric(
    eta: ReturnDistributionFunction,
    mu: ReturnDistributionFunction,
    base: str = "cramer",
    p: float = 2.0,
) -> float:
    """Supremum over state-action pairs of ``base`` ("cramer" or "wasserstein")."""
    if eta.shape != mu.shape:
        raise ParameterError(f"index sets differ: {eta.shape} vs {mu.shape}")
    if base == "cramer":
        grid = eta.grid
        if grid is not None and mu.grid == grid:
            return float(np.sqrt(grid_cramer_sq(grid, eta.probs_array(), mu.probs_array()).max()))
        return max(cramer_l2(eta[k], mu[k]) for k in eta.pairs())
    if base == "wasserstein":
        return max(wasserstein_p(eta[k], mu[k], p) for k in eta.pairs())
    raise ParameterError(f"unknown base metric {base!r}")


def kl_divergence(target: CategoricalDistribution, model: CategoricalDistribution) -> float:
    """KL(target || model) in nats; ``inf`` when target is not dominated by model."""
    if target.grid != model.grid:
        raise ParameterError("KL needs both distributions on the same grid")
    t, m = target.probs, model.probs
    support = t > 0
    if np.any(m[support] <= 0):
        bad = np.flatnonzero(support & (m <= 0)).tolist()
        log.warning("KL undefined: model has zero mass at target support indices %s", bad)
        return math.inf
    return float(np.sum(t[support] * np.log(t[support] / m[support])))


def stochastically_dominates(hi, lo, tol: float = DOMINANCE_TOL) -> bool:
    """True when ``hi`` dominates ``lo``: ``F_lo >= F_hi - tol`` everywhere."""
    xs = np.union1d(hi.locations, lo.locations)
    f_hi = _cum(hi.masses)[np.searchsorted(hi.locations, xs, side="right")]
    f_lo = _cum(lo.masses)[np.searchsorted(lo.locations, xs, side="right")]
    return bool(np.all(f_lo >= f_hi - tol))


def rdf_dominates(
    hi: ReturnDistributionFunction, lo: ReturnDistributionFunction, tol: float = DOMINANCE_TOL
) -> bool:
    """Element-wise dominance of return distribution functions."""
    if hi.shape != lo.shape:
        raise ParameterError(f"index sets differ: {hi.shape} vs {lo.shape}")
    return all(stochastically_dominates(hi[k], lo[k], tol) for k in hi.pairs())
