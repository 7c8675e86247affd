"""Sample-based categorical learning: the mixture update and the KL-gradient update.

The mixture update is the one with a convergence guarantee.  The KL update
is here for empirical comparison only; nothing is claimed about its limit.

Each step picks the updated state-action pair uniformly at random, samples a
transition from it, and picks the next action either from the evaluated
policy or greedily by expected return.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .mdp import Mdp, Policy, Transition, greedy_policy, make_rng, require_valid, sample_transition
from .measures import ParameterError, ReturnDistributionFunction, SupportGrid
from .metrics import grid_cramer_sq
from .projection import projection_matrix

__all__ = [
    "StepSchedule",
    "DEFAULT_SCHEDULE",
    "LearnerState",
    "KlLearnerState",
    "KL_CONVERGENCE_GUARANTEED",
    "softmax",
    "kl_gradient",
    "projected_target",
    "apply_mixture_update",
    "mixture_update_step",
    "apply_kl_update",
    "kl_update_step",
    "log_stride",
    "RunResult",
    "QLearningResult",
    "run_policy_evaluation",
    "run_q_learning",
    "run_kl_policy_evaluation",
]

# No convergence result is known for the KL-gradient update.
KL_CONVERGENCE_GUARANTEED = False


@dataclass(frozen=True)
class StepSchedule:
    """Per-pair step sizes ``c / (n0 + n) ** omega`` where ``n`` is the visit count.

    ``omega`` in (0.5, 1] gives a divergent sum with a convergent sum of
    squares.  ``c <= n0 ** omega`` keeps every step size at most one, so the
    mixture stays a probability distribution.
    """

    c: float = 1.0
    n0: float = 1.0
    omega: float = 0.7

    def __post_init__(self):
        if self.c <= 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if self.n0 < 1:
            raise ParameterError(f"n0 must be at least 1, got {self.n0}")
        if not 0.5 < self.omega <= 1.0:
            raise ParameterError(f"omega must lie in (0.5, 1], got {self.omega}")
        if self.c > self.n0**self.omega:
            raise ParameterError("c / n0**omega exceeds 1; the first step would leave the simplex")

    def __call__(self, n: int) -> float:
        return self.c / (self.n0 + n) ** self.omega

    def robbins_monro(self) -> bool:
        # sum of n^-omega diverges iff omega <= 1; sum of n^-2omega converges iff omega > 1/2
        return 0.5 < self.omega <= 1.0


DEFAULT_SCHEDULE = StepSchedule()


@dataclass(frozen=True, eq=False)
class LearnerState:
    """Categorical estimates ``probs[x, a, k]`` plus per-pair visit counts.

    ``policy`` is the evaluated policy, or ``None`` for control.
    """

    probs: np.ndarray
    visits: np.ndarray
    t: int = 0
    policy: Policy | None = None

    @classmethod
    def initial(
        cls,
        mdp: Mdp,
        grid: SupportGrid,
        policy: Policy | None = None,
        eta0: ReturnDistributionFunction | None = None,
    ) -> LearnerState:
        """Start from ``eta0``, or from the lowest grid point everywhere."""
        if eta0 is None:
            probs = np.zeros((mdp.n_states, mdp.n_actions, grid.k))
            probs[..., 0] = 1.0
        else:
            if eta0.grid != grid:
                raise ParameterError("initial estimates must be categorical on the learning grid")
            probs = eta0.probs_array()
        return cls(probs, np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64), 0, policy)

    @property
    def mode(self) -> str:
        return "control" if self.policy is None else "evaluation"

    def eta(self, grid: SupportGrid) -> ReturnDistributionFunction:
        return ReturnDistributionFunction.from_probs(grid, self.probs)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class KlLearnerState:
    """Per-pair logits; the estimates are their softmax, so always strictly positive."""

    logits: np.ndarray
    visits: np.ndarray
    t: int = 0
    policy: Policy | None = None

    @classmethod
    def initial(cls, mdp: Mdp, grid: SupportGrid, policy: Policy | None = None) -> KlLearnerState:
        return cls(
            np.zeros((mdp.n_states, mdp.n_actions, grid.k)),
            np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64),
            0,
            policy,
        )

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    @property
    def mode(self) -> str:
        return "control" if self.policy is None else "evaluation"

    def eta(self, grid: SupportGrid) -> ReturnDistributionFunction:
        return ReturnDistributionFunction.from_probs(grid, self.probs)


def kl_gradient(logits: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of ``KL(target || softmax(logits))`` with respect to the logits."""
    return softmax(logits) - target


@lru_cache(maxsize=4096)
def _matrix(grid: SupportGrid, r: float, gamma: float) -> np.ndarray:
    m = projection_matrix(grid, r, gamma)
    m.setflags(write=False)
    return m


def projected_target(probs: np.ndarray, grid: SupportGrid, transition: Transition, gamma: float) -> np.ndarray:
    """Projected sample target for ``transition`` given estimates ``probs``."""
    return probs[transition.x_next, transition.a_next] @ _matrix(grid, float(transition.r), float(gamma))


def _next_action(probs, policy: Policy | None, grid: SupportGrid, x_next: int, rng) -> int:
    if policy is None:
        return int(np.argmax(probs[x_next] @ grid.locations))
    row = policy.probs[x_next]
    if row.max() == 1.0:
        # determined: no draw, so a one-action MDP consumes the same stream in both modes
        return int(row.argmax())
    return int(min(np.searchsorted(np.cumsum(row), rng.random() * row.sum(), side="right"), row.size - 1))


def _sample(state, mdp: Mdp, grid: SupportGrid, rng: np.random.Generator, probs: np.ndarray) -> Transition:
    x, a = divmod(int(rng.integers(mdp.n_states * mdp.n_actions)), mdp.n_actions)
    r, x_next = sample_transition(mdp, x, a, rng)
    return Transition(x, a, r, x_next, _next_action(probs, state.policy, grid, x_next, rng))


def apply_mixture_update(
    state: LearnerState, grid: SupportGrid, transition: Transition, gamma: float, alpha: float
) -> LearnerState:
    """Mix the updated pair's row towards its projected target; all other rows stay put."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"step size must lie in [0, 1], got {alpha}")
    x, a = transition.x, transition.a
    target = projected_target(state.probs, grid, transition, gamma)
    probs = state.probs.copy()
    probs[x, a] = (1.0 - alpha) * probs[x, a] + alpha * target
    visits = state.visits.copy()
    visits[x, a] += 1
    return replace(state, probs=probs, visits=visits, t=state.t + 1)


def mixture_update_step(
    state: LearnerState,
    mdp: Mdp,
    grid: SupportGrid,
    rng: np.random.Generator,
    schedule: StepSchedule = DEFAULT_SCHEDULE,
    alpha: float | None = None,
) -> LearnerState:
    """One sampled mixture update.  ``alpha`` overrides the scheduled step size."""
    tr = _sample(state, mdp, grid, rng, state.probs)
    step = schedule(int(state.visits[tr.x, tr.a])) if alpha is None else alpha
    return apply_mixture_update(state, grid, tr, mdp.gamma, step)


def apply_kl_update(
    state: KlLearnerState, grid: SupportGrid, transition: Transition, gamma: float, lr: float
) -> KlLearnerState:
    if lr <= 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    x, a = transition.x, transition.a
    target = projected_target(state.probs, grid, transition, gamma)
    logits = state.logits.copy()
    logits[x, a] -= lr * kl_gradient(logits[x, a], target)
    visits = state.visits.copy()
    visits[x, a] += 1
    return replace(state, logits=logits, visits=visits, t=state.t + 1)


def kl_update_step(
    state: KlLearnerState,
    mdp: Mdp,
    grid: SupportGrid,
    rng: np.random.Generator,
    lr: float | StepSchedule,
) -> KlLearnerState:
    """One sampled KL-gradient step; ``lr`` may be a constant or a per-pair schedule."""
    tr = _sample(state, mdp, grid, rng, state.probs)
    step = lr(int(state.visits[tr.x, tr.a])) if callable(lr) else lr
    return apply_kl_update(state, grid, tr, mdp.gamma, step)


def log_stride(n_steps: int) -> int:
    return max(1, n_steps // 500)


@dataclass
class RunResult:
    trace: list[tuple[int, float]]
    state: LearnerState | KlLearnerState

    @property
    def final_distance(self) -> float:
        return self.trace[-1][1]


@dataclass
class QLearningResult:
    eta: ReturnDistributionFunction
    policy: Policy
    trace: list[tuple[int, float]] = field(default_factory=list)
    state: LearnerState | None = None


def _distance(grid: SupportGrid, probs: np.ndarray, ref: np.ndarray) -> float:
    return math.sqrt(float(grid_cramer_sq(grid, probs, ref).max()))


def _run(state, step, n_steps: int, grid: SupportGrid, ref: np.ndarray | None, stride: int | None):
    stride = log_stride(n_steps) if stride is None else stride
    trace = [] if ref is None else [(0, _distance(grid, state.probs, ref))]
    for t in range(1, n_steps + 1):
        state = step(state)
        if ref is not None and (t % stride == 0 or t == n_steps):
            trace.append((t, _distance(grid, state.probs, ref)))
    return state, trace


def _reference(grid: SupportGrid, reference: ReturnDistributionFunction | None) -> np.ndarray | None:
    if reference is None:
        return None
    if reference.grid != grid:
        raise ParameterError("the reference must be categorical on the learning grid")
    return reference.probs_array()


def run_policy_evaluation(
    mdp: Mdp,
    policy: Policy,
    grid: SupportGrid,
    schedule: StepSchedule,
    n_steps: int,
    seed: int,
    reference: ReturnDistributionFunction,
    eta0: ReturnDistributionFunction | None = None,
    stride: int | None = None,
) -> RunResult:
    """Categorical policy evaluation with mixture updates.

    The trace holds ``(t, sup-Cramér distance to reference)`` at ``t = 0``,
    every ``stride`` steps, and at the last step.
    """
    require_valid(mdp, policy)
    rng = make_rng(seed, "learning")
    state = LearnerState.initial(mdp, grid, policy, eta0)
    step = lambda s: mixture_update_step(s, mdp, grid, rng, schedule)  # noqa: E731
    state, trace = _run(state, step, n_steps, grid, _reference(grid, reference), stride)
    return RunResult(trace, state)


def run_q_learning(
    mdp: Mdp,
    grid: SupportGrid,
    schedule: StepSchedule,
    n_steps: int,
    seed: int,
    reference: ReturnDistributionFunction | None = None,
    eta0: ReturnDistributionFunction | None = None,
    stride: int | None = None,
) -> QLearningResult:
    """Categorical Q-learning with mixture updates; returns the final greedy policy."""
    require_valid(mdp)
    rng = make_rng(seed, "learning")
    state = LearnerState.initial(mdp, grid, None, eta0)
    step = lambda s: mixture_update_step(s, mdp, grid, rng, schedule)  # noqa: E731
    state, trace = _run(state, step, n_steps, grid, _reference(grid, reference), stride)
    eta = state.eta(grid)
    return QLearningResult(eta, greedy_policy(eta), trace, state)


def run_kl_policy_evaluation(
    mdp: Mdp,
    policy: Policy,
    grid: SupportGrid,
    lr: float | StepSchedule,
    n_steps: int,
    seed: int,
    reference: ReturnDistributionFunction | None = None,
    stride: int | None = None,
) -> RunResult:
    require_valid(mdp, policy)
    rng = make_rng(seed, "learning")
    state = KlLearnerState.initial(mdp, grid, policy)
    step = lambda s: kl_update_step(s, mdp, grid, rng, lr)  # noqa: E731
    state, trace = _run(state, step, n_steps, grid, _reference(grid, reference), stride)
    return RunResult(trace, state)
