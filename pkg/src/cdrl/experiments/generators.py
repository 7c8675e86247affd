"""Seeded random instances and the small named MDPs used by the experiments."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..mdp import KernelEntry, Mdp, Policy, make_rng, require_valid
from ..measures import (
    CategoricalDistribution,
    FiniteDistribution,
    ParameterError,
    ReturnDistributionFunction,
    SupportGrid,
)

__all__ = [
    "generate_random_mdp",
    "random_policy",
    "random_grid",
    "random_categorical",
    "random_probs",
    "random_rdf",
    "random_finite",
    "shift_right",
    "dominated_pair",
    "chain_mdp",
    "bandit_mdp",
    "three_state_mdp",
    "BUILTIN_MDPS",
]


def generate_random_mdp(
    n_states: int,
    n_actions: int,
    reward_support: Sequence[float],
    branching: int,
    seed: int,
    gamma: float = 0.5,
) -> Mdp:
    """Each pair gets ``branching`` outcomes ``(r, x')`` with Dirichlet weights.

    Rewards are drawn from ``reward_support`` and next states uniformly.
    """
    if n_states < 1 or n_actions < 1:
        raise ParameterError("n_states and n_actions must be at least 1")
    if branching < 1:
        raise ParameterError("branching must be at least 1")
    rewards = np.asarray(list(reward_support), dtype=np.float64)
    if rewards.size == 0:
        raise ParameterError("reward_support must not be empty")
    rng = make_rng(seed, "mdp")
    kernel = []
    for _ in range(n_states):
        row = []
        for _ in range(n_actions):
            r = rng.choice(rewards, size=branching)
            nxt = rng.integers(n_states, size=branching)
            p = rng.dirichlet(np.ones(branching))
            # put the rounding residue on the largest weight so the row sums to 1
            p[np.argmax(p)] += 1.0 - p.sum()
            row.append(tuple(KernelEntry(float(pi), float(ri), int(xi)) for pi, ri, xi in zip(p, r, nxt)))
        kernel.append(tuple(row))
    mdp = Mdp(n_states, n_actions, tuple(kernel), gamma)
    require_valid(mdp)
    return mdp


def random_policy(n_states: int, n_actions: int, rng: np.random.Generator) -> Policy:
    """Stochastic rows, except that about a third of the states act deterministically."""
    p = rng.dirichlet(np.ones(n_actions), size=n_states)
    for x in range(n_states):
        if rng.random() < 1 / 3:
            p[x] = 0.0
            p[x, rng.integers(n_actions)] = 1.0
    p /= p.sum(axis=1, keepdims=True)
    return Policy(p)


def random_grid(rng: np.random.Generator, k: int, lo: float = 0.0, span: float | None = None) -> SupportGrid:
    """Unevenly spaced grid of ``k`` points starting at ``lo``, optionally rescaled to ``span``."""
    gaps = rng.uniform(0.2, 1.0, size=k - 1)
    if span is not None:
        gaps *= span / gaps.sum()
    return SupportGrid(lo + np.concatenate(([0.0], np.cumsum(gaps))))


def random_probs(rng: np.random.Generator, k: int, size: tuple[int, ...] = ()) -> np.ndarray:
    """Dirichlet draws along the last axis with some entries zeroed out."""
    p = rng.dirichlet(np.ones(k), size=size if size else None)
    keep = rng.random(p.shape) < 0.7
    keep[..., 0] |= ~keep.any(axis=-1)
    p = np.where(keep, p, 0.0)
    p /= p.sum(axis=-1, keepdims=True)
    return p


def random_categorical(grid: SupportGrid, rng: np.random.Generator) -> CategoricalDistribution:
    return CategoricalDistribution(grid, random_probs(rng, grid.k))


def random_rdf(grid: SupportGrid, n_states: int, n_actions: int, rng: np.random.Generator) -> ReturnDistributionFunction:
    return ReturnDistributionFunction.from_probs(grid, random_probs(rng, grid.k, (n_states, n_actions)))


def random_finite(rng: np.random.Generator, n_atoms: int, lo: float, hi: float) -> FiniteDistribution:
    locs = rng.uniform(lo, hi, size=n_atoms)
    return FiniteDistribution.from_atoms(locs, rng.dirichlet(np.ones(n_atoms)))


def shift_right(probs: np.ndarray, rng: np.random.Generator, n_moves: int = 3) -> np.ndarray:
    """Move random fractions of mass to higher indices, giving a dominating vector."""
    q = np.array(probs, dtype=np.float64, copy=True)
    k = q.size
    for _ in range(n_moves):
        i = int(rng.integers(k))
        if i == k - 1 or q[i] == 0:
            continue
        j = int(rng.integers(i + 1, k))
        moved = q[i] * rng.uniform(0.0, 1.0)
        q[i] -= moved
        q[j] += moved
    return q


def dominated_pair(
    grid: SupportGrid, n_states: int, n_actions: int, rng: np.random.Generator
) -> tuple[ReturnDistributionFunction, ReturnDistributionFunction]:
    """``(eta, mu)`` with ``mu`` dominating ``eta`` at every pair."""
    lo = random_probs(rng, grid.k, (n_states, n_actions))
    hi = np.empty_like(lo)
    for x in range(n_states):
        for a in range(n_actions):
            hi[x, a] = shift_right(lo[x, a], rng)
    return ReturnDistributionFunction.from_probs(grid, lo), ReturnDistributionFunction.from_probs(grid, hi)


def chain_mdp(gamma: float = 0.5) -> Mdp:
    """``s0 -> s1`` with reward 0, then ``s1`` loops forever with reward 1.

    With ``gamma = 0.5`` the returns are exactly 1 from ``s0`` and 2 from ``s1``.
    """
    return Mdp(2, 1, (((KernelEntry(1.0, 0.0, 1),),), ((KernelEntry(1.0, 1.0, 1),),)), gamma)


def bandit_mdp(gamma: float = 0.5) -> Mdp:
    """One self-looping state; action 0 pays 0 and action 1 pays 1."""
    return Mdp(1, 2, (((KernelEntry(1.0, 0.0, 0),), (KernelEntry(1.0, 1.0, 0),)),), gamma)


def three_state_mdp(gamma: float = 0.5) -> Mdp:
    """Three states, two actions, rewards in [0, 1] and a unique optimal policy.

    The optimal policy takes action 1 in state 0, action 0 in state 1 and
    action 1 in state 2, with action-value gaps above 0.3 in every state.
    """
    e = KernelEntry
    kernel = (
        (
            (e(1.0, 0.0, 1),),
            (e(0.5, 0.2, 2), e(0.5, 0.6, 1)),
        ),
        (
            (e(0.7, 1.0, 1), e(0.3, 0.5, 0)),
            (e(1.0, 0.0, 0),),
        ),
        (
            (e(1.0, 0.0, 2),),
            (e(0.6, 0.8, 1), e(0.4, 0.3, 2)),
        ),
    )
    return Mdp(3, 2, kernel, gamma)


BUILTIN_MDPS = {
    "chain": chain_mdp,
    "bandit": bandit_mdp,
    "three_state": three_state_mdp,
}
