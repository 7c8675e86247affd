"""Distributional Bellman operators, their projected forms, and fixed points.

The exact operators work on finite-atom distributions and never sample.
:class:`CategoricalBellman` is the projected evaluation operator written as a
linear map on probability arrays; it is what the iterative solvers use, and
it is checked against the composition ``project_rdf(bellman_eval(...))``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp import Mdp, Policy, Transition, greedy_policy, require_valid, transition_outcomes
from .measures import (
    COALESCE_TOL,
    FiniteDistribution,
    ParameterError,
    ReturnDistributionFunction,
    SignedGridMeasure,
    SupportGrid,
    dirac,
    pushforward_affine,
)
from .metrics import grid_cramer_sq
from .projection import project, project_rdf, projection_matrix

__all__ = [
    "ReturnDistributionFunction",
    "OracleInfeasible",
    "bellman_eval",
    "bellman_control",
    "projected_bellman_eval",
    "CategoricalBellman",
    "stochastic_target",
    "FixedPointResult",
    "fixed_point",
    "OracleResult",
    "true_return_oracle",
    "sandwich_sequences",
    "noise_expectation",
    "noise_samples",
    "approximation_error_bound",
    "outside_mass",
]

log = logging.getLogger(__name__)

ATOM_CAP = 10**6


class OracleInfeasible(RuntimeError):
    """The unprojected iteration outgrew its atom budget."""


def _bellman_row(
    mdp: Mdp, policy: Policy, eta: ReturnDistributionFunction, x: int, a: int
) -> FiniteDistribution:
    xs, ms = [], []
    for w, t in transition_outcomes(mdp, policy, x, a):
        d = eta[t.x_next, t.a_next]
        xs.append(t.r + mdp.gamma * d.locations)
        ms.append(w * d.masses)
    return FiniteDistribution.from_atoms(np.concatenate(xs), np.concatenate(ms))


def bellman_eval(mdp: Mdp, policy: Policy, eta: ReturnDistributionFunction) -> ReturnDistributionFunction:
    """Exact evaluation operator: mixture of reward-shifted, discounted next-pair laws."""
    require_valid(mdp, policy)
    if eta.shape != (mdp.n_states, mdp.n_actions):
        raise ParameterError(f"eta has shape {eta.shape}, MDP has {(mdp.n_states, mdp.n_actions)}")
    return ReturnDistributionFunction.build(
        mdp.n_states, mdp.n_actions, lambda x, a: _bellman_row(mdp, policy, eta, x, a)
    )


def bellman_control(mdp: Mdp, eta: ReturnDistributionFunction) -> ReturnDistributionFunction:
    return bellman_eval(mdp, greedy_policy(eta), eta)


def projected_bellman_eval(
    mdp: Mdp, policy: Policy, grid: SupportGrid, eta: ReturnDistributionFunction
) -> ReturnDistributionFunction:
    return project_rdf(grid, bellman_eval(mdp, policy, eta))


class CategoricalBellman:
    """Projected evaluation operator as a linear map on ``(S, A, K)`` arrays.

    ``tensor[x, a, y, j, k]`` is the probability that mass on grid point ``j``
    of a distribution at next state ``y`` lands on grid point ``k`` of the
    projected target for ``(x, a)``.
    """

    def __init__(self, mdp: Mdp, grid: SupportGrid):
        require_valid(mdp)
        self.mdp = mdp
        self.grid = grid
        s, a_n, k = mdp.n_states, mdp.n_actions, grid.k
        self.tensor = np.zeros((s, a_n, s, k, k))
        self._matrices: dict[float, np.ndarray] = {}
        for x, a in mdp.pairs():
            for e in mdp.kernel[x][a]:
                self.tensor[x, a, e.next] += e.p * self.matrix(e.r)

    def matrix(self, r: float) -> np.ndarray:
        """Cached projection matrix of the pushforward by ``r + gamma z``."""
        m = self._matrices.get(r)
        if m is None:
            m = projection_matrix(self.grid, r, self.mdp.gamma)
            self._matrices[r] = m
        return m

    def apply(self, probs: np.ndarray, policy: np.ndarray) -> np.ndarray:
        """One application under the policy matrix ``policy[x, a]``."""
        next_mix = np.einsum("yb,ybj->yj", policy, probs)
        return np.einsum("xayjk,yj->xak", self.tensor, next_mix)

    def greedy(self, probs: np.ndarray) -> np.ndarray:
        means = probs @ self.grid.locations
        pol = np.zeros(means.shape)
        pol[np.arange(means.shape[0]), np.argmax(means, axis=1)] = 1.0
        return pol

    def apply_control(self, probs: np.ndarray) -> np.ndarray:
        return self.apply(probs, self.greedy(probs))


def stochastic_target(transition: Transition, eta: ReturnDistributionFunction, gamma: float) -> FiniteDistribution:
    """Unprojected sample target: the next pair's law pushed through ``r + gamma z``."""
    if transition.a_next is None:
        raise ParameterError("the transition needs a next action")
    return pushforward_affine(eta[transition.x_next, transition.a_next], transition.r, gamma)


@dataclass
class FixedPointResult:
    eta: ReturnDistributionFunction
    iterations: int
    residual: float
    converged: bool
    residuals: list[float] = field(default_factory=list)


def fixed_point(
    op: str,
    mdp: Mdp,
    policy: Policy | None,
    grid: SupportGrid,
    eta0: ReturnDistributionFunction | None = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> FixedPointResult:
    """Iterate the projected operator until consecutive iterates are ``tol``-close.

    ``op`` is ``"evaluation"`` (needs ``policy``) or ``"control"``.  The
    residual is the supremum-Cramér distance between consecutive iterates.
    Running out of iterations is reported through ``converged=False``.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    if op not in ("evaluation", "control"):
        raise ParameterError(f"unknown operator {op!r}")
    if op == "evaluation" and policy is None:
        raise ParameterError("policy evaluation needs a policy")
    require_valid(mdp, policy)
    cb = CategoricalBellman(mdp, grid)
    step = cb.apply_control if op == "control" else (lambda p: cb.apply(p, policy.probs))

    if eta0 is None:
        probs = np.zeros((mdp.n_states, mdp.n_actions, grid.k))
        probs[..., 0] = 1.0
        iterations = 0
    elif eta0.grid == grid:
        probs = eta0.probs_array()
        iterations = 0
    else:
        # off-grid start: one exact projected step lands on the grid
        pol = greedy_policy(eta0) if op == "control" else policy
        probs = projected_bellman_eval(mdp, pol, grid, eta0).probs_array()
        iterations = 1

    residuals = []
    residual = math.inf
    while iterations < max_iter:
        new = step(probs)
        residual = float(np.sqrt(grid_cramer_sq(grid, new, probs).max()))
        probs = new
        iterations += 1
        residuals.append(residual)
        if residual <= tol:
            break
    converged = residual <= tol
    if not converged:
        log.warning("fixed point not reached after %d iterations (residual %.3g)", iterations, residual)
    eta = ReturnDistributionFunction.from_probs(grid, probs)
    return FixedPointResult(eta, iterations, residual, converged, residuals)


@dataclass
class OracleResult:
    eta: ReturnDistributionFunction
    horizon: int
    error_bound: float
    max_atoms: int


def _oracle_horizon(mdp: Mdp, tol: float) -> int:
    scale = mdp.max_abs_reward / (1 - mdp.gamma)
    if scale == 0 or mdp.gamma == 0:
        return 1
    return max(1, math.ceil(math.log(tol / scale) / math.log(mdp.gamma)))


def true_return_oracle(
    mdp: Mdp,
    policy: Policy,
    tol: float = 1e-8,
    atom_cap: int = ATOM_CAP,
    horizon: int | None = None,
) -> OracleResult:
    """Return distributions by unprojected iteration from ``delta_0``.

    After ``m`` steps the iterate is the law of the first ``m`` discounted
    rewards; the rest of the return moves it by at most
    ``gamma**m * max|r| / (1 - gamma)`` in 1-Wasserstein distance.  ``m`` is the
    smallest horizon bringing that below ``tol`` unless ``horizon`` is given.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    require_valid(mdp, policy)
    m = _oracle_horizon(mdp, tol) if horizon is None else int(horizon)
    eta = ReturnDistributionFunction.constant(mdp.n_states, mdp.n_actions, dirac(0.0))
    max_atoms = 1
    for step in range(m):
        eta = bellman_eval(mdp, policy, eta)
        max_atoms = max(len(d) for _, d in eta.items())
        if max_atoms > atom_cap:
            raise OracleInfeasible(
                f"step {step + 1} of {m}: {max_atoms} atoms exceeds the cap of {atom_cap}; "
                "reduce the horizon or the MDP size"
            )
    tail = mdp.gamma**m * mdp.max_abs_reward / (1 - mdp.gamma)
    # each coalescing pass moves mass by at most its tolerance
    return OracleResult(eta, m, tail + m * COALESCE_TOL, max_atoms)


def sandwich_sequences(
    mdp: Mdp, policy: Policy, grid: SupportGrid, k_max: int
) -> tuple[list[ReturnDistributionFunction], list[ReturnDistributionFunction]]:
    """Upper and lower averaged iterates started from the grid's end points.

    ``U_{k+1} = U_k / 2 + (projected T U_k) / 2`` from ``U_0 = delta_{z_K}``,
    and the same for ``L`` from ``L_0 = delta_{z_1}``.
    """
    if k_max < 0:
        raise ParameterError("k_max must be nonnegative")
    require_valid(mdp, policy)
    cb = CategoricalBellman(mdp, grid)
    shape = (mdp.n_states, mdp.n_actions, grid.k)
    upper = np.zeros(shape)
    upper[..., -1] = 1.0
    lower = np.zeros(shape)
    lower[..., 0] = 1.0
    us, ls = [upper], [lower]
    for _ in range(k_max):
        upper = 0.5 * upper + 0.5 * cb.apply(upper, policy.probs)
        lower = 0.5 * lower + 0.5 * cb.apply(lower, policy.probs)
        us.append(upper)
        ls.append(lower)
    return (
        [ReturnDistributionFunction.from_probs(grid, u) for u in us],
        [ReturnDistributionFunction.from_probs(grid, lo) for lo in ls],
    )


def noise_samples(
    mdp: Mdp, policy: Policy, grid: SupportGrid, eta: ReturnDistributionFunction, x: int, a: int
) -> list[tuple[float, Transition, SignedGridMeasure]]:
    """Each possible sample-noise measure at ``(x, a)`` with its probability.

    The noise for one outcome is its projected sample target minus the
    projected exact target.
    """
    mean_target = project(grid, _bellman_row(mdp, policy, eta, x, a))
    out = []
    for w, t in transition_outcomes(mdp, policy, x, a):
        sample = project(grid, stochastic_target(t, eta, mdp.gamma))
        out.append((w, t, SignedGridMeasure.difference(sample, mean_target)))
    return out


def noise_expectation(
    mdp: Mdp, policy: Policy, grid: SupportGrid, eta: ReturnDistributionFunction, x: int, a: int
) -> SignedGridMeasure:
    """Kernel-weighted average of the sample-noise measures at ``(x, a)``."""
    require_valid(mdp, policy)
    total = np.zeros(grid.k)
    for w, _, noise in noise_samples(mdp, policy, grid, eta, x, a):
        total += w * noise.weights
    return SignedGridMeasure(grid, total)


def approximation_error_bound(gamma: float, grid: SupportGrid, q: float = 0.0, delta: float = 0.0) -> float:
    """Bound on the squared supremum-Cramér gap between the categorical fixed
    point and the true return distributions.

    ``q`` bounds the mass outside ``[z_1, z_K]`` and ``delta`` how far beyond
    the grid that mass may sit; both are zero when the returns fit the grid.
    """
    return (grid.max_gap + 2 * q**2 * delta) / (1 - gamma)


def outside_mass(eta: ReturnDistributionFunction, grid: SupportGrid) -> tuple[float, float]:
    """``(q, delta)`` measured from ``eta``.

    ``q`` is the largest mass any entry places on ``(-inf, z_1] U [z_K, inf)``
    and ``delta`` the furthest distance of an atom beyond the grid.
    """
    q = 0.0
    delta = 0.0
    for _, d in eta.items():
        x, m = d.locations, d.masses
        q = max(q, float(m[(x <= grid.lo) | (x >= grid.hi)].sum()))
        delta = max(delta, grid.lo - float(x[0]), float(x[-1]) - grid.hi)
    return q, delta
