"""Finite MDPs with a discrete joint reward/next-state kernel."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np

from .measures import PROB_TOL, ParameterError, ReturnDistributionFunction

__all__ = [
    "KernelEntry",
    "Mdp",
    "Policy",
    "Transition",
    "validate",
    "require_valid",
    "sample_transition",
    "greedy_policy",
    "make_rng",
    "q_values",
    "value_iteration",
    "mdp_from_dict",
    "mdp_to_dict",
    "load_mdp",
    "transition_outcomes",
]


class KernelEntry(NamedTuple):
    p: float
    r: float
    next: int


class Transition(NamedTuple):
    x: int
    a: int
    r: float
    x_next: int
    a_next: int | None = None


@dataclass(frozen=True)
class Mdp:
    """``kernel[x][a]`` lists the ``(p, r, next)`` outcomes of taking ``a`` in ``x``.

    Construction only normalises the container types; call :func:`validate`
    to check probabilities and indices.
    """

    n_states: int
    n_actions: int
    kernel: tuple
    gamma: float

    def __post_init__(self):
        table = tuple(
            tuple(tuple(KernelEntry(float(e[0]), float(e[1]), int(e[2])) for e in entries) for entries in row)
            for row in self.kernel
        )
        object.__setattr__(self, "kernel", table)

    def entries(self, x: int, a: int) -> tuple[KernelEntry, ...]:
        if not (0 <= x < self.n_states and 0 <= a < self.n_actions):
            raise ParameterError(f"no such state-action pair ({x}, {a})")
        return self.kernel[x][a]

    def pairs(self):
        for x in range(self.n_states):
            for a in range(self.n_actions):
                yield x, a

    @cached_property
    def _sampling_tables(self):
        tables = {}
        for x, a in self.pairs():
            es = self.kernel[x][a]
            cum = np.cumsum([e.p for e in es])
            tables[x, a] = (cum, [e.r for e in es], [e.next for e in es])
        return tables

    @property
    def max_abs_reward(self) -> float:
        return max((abs(e.r) for row in self.kernel for es in row for e in es), default=0.0)

    @property
    def reward_range(self) -> tuple[float, float]:
        rs = [e.r for row in self.kernel for es in row for e in es if e.p > 0]
        return min(rs), max(rs)

    def return_range(self) -> tuple[float, float]:
        """Interval that contains every possible discounted return."""
        lo, hi = self.reward_range
        return lo / (1 - self.gamma), hi / (1 - self.gamma)


@dataclass(frozen=True, eq=False)
class Policy:
    """Row-stochastic matrix ``probs[x, a] = pi(a | x)``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64, copy=True)
        if p.ndim != 2:
            raise ParameterError("policy must be a matrix indexed by (state, action)")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > PROB_TOL):
            raise ParameterError("policy rows must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> Policy:
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> Policy:
        p = np.zeros((len(actions), n_actions))
        p[np.arange(len(actions)), list(actions)] = 1.0
        return cls(p)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def actions(self) -> list[int] | None:
        """Chosen action per state for a deterministic policy, else ``None``."""
        if not np.all(self.probs.max(axis=1) == 1.0):
            return None
        return [int(a) for a in self.probs.argmax(axis=1)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    __hash__ = None


def validate(mdp: Mdp) -> list[str]:
    """Every invariant violation of ``mdp``; an empty list means it is well formed."""
    problems = []
    if mdp.n_states < 1 or mdp.n_actions < 1:
        problems.append(f"n_states and n_actions must be positive, got {mdp.n_states}, {mdp.n_actions}")
    if not 0.0 <= mdp.gamma < 1.0:
        problems.append(f"gamma must lie in [0, 1), got {mdp.gamma}")
    if len(mdp.kernel) != mdp.n_states:
        problems.append(f"kernel has {len(mdp.kernel)} states, expected {mdp.n_states}")
    for x, row in enumerate(mdp.kernel):
        if len(row) != mdp.n_actions:
            problems.append(f"state {x}: kernel has {len(row)} actions, expected {mdp.n_actions}")
        for a, entries in enumerate(row):
            if not entries:
                problems.append(f"({x}, {a}): empty outcome list")
                continue
            ps = [e.p for e in entries]
            if any(p < 0 for p in ps):
                problems.append(f"({x}, {a}): negative probability")
            total = sum(ps)
            if abs(total - 1.0) > PROB_TOL:
                problems.append(f"({x}, {a}): probabilities sum to {total!r}")
            for e in entries:
                if not 0 <= e.next < mdp.n_states:
                    problems.append(f"({x}, {a}): next state {e.next} out of range")
                if not np.isfinite(e.r):
                    problems.append(f"({x}, {a}): non-finite reward {e.r}")
    return problems


def require_valid(mdp: Mdp, policy: Policy | None = None) -> None:
    problems = validate(mdp)
    if policy is not None and policy.probs.shape != (mdp.n_states, mdp.n_actions):
        problems.append(f"policy shape {policy.probs.shape} does not match the MDP")
    if problems:
        raise ParameterError("invalid MDP: " + "; ".join(problems))


def _stream_id(purpose: int | str) -> int:
    if isinstance(purpose, str):
        return zlib.crc32(purpose.encode())
    return int(purpose)


def make_rng(seed: int, *stream: int | str) -> np.random.Generator:
    """Counter-based Philox generator for one ``(seed, *stream)`` key.

    Distinct stream keys give statistically independent generators, so each
    trial and purpose can own its own stream.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_stream_id(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def sample_transition(mdp: Mdp, x: int, a: int, rng: np.random.Generator) -> tuple[float, int]:
    try:
        cum, rewards, nexts = mdp._sampling_tables[x, a]
    except KeyError:
        raise ParameterError(f"no such state-action pair ({x}, {a})") from None
    i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    i = min(i, len(rewards) - 1)
    return rewards[i], nexts[i]


def greedy_policy(eta: ReturnDistributionFunction) -> Policy:
    """Deterministic policy maximising expected return; ties go to the lowest action."""
    means = eta.means()
    return Policy.deterministic(np.argmax(means, axis=1).tolist(), eta.n_actions)


def _expected_reward_and_transitions(mdp: Mdp) -> tuple[np.ndarray, np.ndarray]:
    r = np.zeros((mdp.n_states, mdp.n_actions))
    p = np.zeros((mdp.n_states, mdp.n_actions, mdp.n_states))
    for x, a in mdp.pairs():
        for e in mdp.kernel[x][a]:
            r[x, a] += e.p * e.r
            p[x, a, e.next] += e.p
    return r, p


def q_values(mdp: Mdp, policy: Policy) -> np.ndarray:
    """Exact action values of ``policy`` by a linear solve."""
    r, p = _expected_reward_and_transitions(mdp)
    n = mdp.n_states * mdp.n_actions
    # Q = R + gamma * P Pi Q with (P Pi)[(x,a), (x',a')] = p(x'|x,a) pi(a'|x')
    ppi = np.einsum("xay,yb->xayb", p, policy.probs).reshape(n, n)
    q = np.linalg.solve(np.eye(n) - mdp.gamma * ppi, r.ravel())
    return q.reshape(mdp.n_states, mdp.n_actions)


def value_iteration(
    mdp: Mdp, tol: float = 1e-12, max_iter: int = 100_000, n_iter: int | None = None
) -> np.ndarray:
    """Scalar optimal action values.

    With ``n_iter`` given, runs exactly that many sweeps from ``Q = 0``.
    """
    r, p = _expected_reward_and_transitions(mdp)
    q = np.zeros_like(r)
    for it in range(n_iter if n_iter is not None else max_iter):
        new = r + mdp.gamma * p @ q.max(axis=1)
        done = np.max(np.abs(new - q)) <= tol
        q = new
        if n_iter is None and done:
            break
    return q


_MDP_FIELDS = {"n_states", "n_actions", "gamma", "kernel", "policy"}
_ENTRY_FIELDS = {"p", "r", "next"}


def mdp_from_dict(obj: dict[str, Any]) -> tuple[Mdp, Policy | None]:
    """Parse the JSON MDP format; unknown fields are rejected."""
    if not isinstance(obj, dict):
        raise ParameterError("MDP document must be an object")
    unknown = set(obj) - _MDP_FIELDS
    if unknown:
        raise ParameterError(f"unknown MDP fields: {sorted(unknown)}")
    missing = {"n_states", "n_actions", "gamma", "kernel"} - set(obj)
    if missing:
        raise ParameterError(f"missing MDP fields: {sorted(missing)}")
    kernel = []
    for x, row in enumerate(obj["kernel"]):
        out_row = []
        for a, entries in enumerate(row):
            out = []
            for e in entries:
                if not isinstance(e, dict) or set(e) != _ENTRY_FIELDS:
                    raise ParameterError(f"kernel[{x}][{a}] entries need exactly the fields p, r, next")
                out.append(KernelEntry(e["p"], e["r"], e["next"]))
            out_row.append(tuple(out))
        kernel.append(tuple(out_row))
    mdp = Mdp(int(obj["n_states"]), int(obj["n_actions"]), tuple(kernel), float(obj["gamma"]))
    policy = Policy(np.asarray(obj["policy"], dtype=np.float64)) if obj.get("policy") is not None else None
    return mdp, policy


def mdp_to_dict(mdp: Mdp, policy: Policy | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "gamma": mdp.gamma,
        "kernel": [
            [[{"p": e.p, "r": e.r, "next": e.next} for e in entries] for entries in row]
            for row in mdp.kernel
        ],
    }
    if policy is not None:
        doc["policy"] = policy.probs.tolist()
    return doc


def load_mdp(path: str | Path) -> tuple[Mdp, Policy | None]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParameterError(f"cannot read MDP file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON: {exc}") from exc
    return mdp_from_dict(doc)


def transition_outcomes(mdp: Mdp, policy: Policy, x: int, a: int) -> list[tuple[float, Transition]]:
    """Every ``(r, x', a')`` outcome from ``(x, a)`` with its probability.

    Outcomes with zero probability are skipped.  Duplicate kernel entries are
    kept as separate outcomes.
    """
    out = []
    for e in mdp.entries(x, a):
        for a2 in range(mdp.n_actions):
            w = e.p * policy.probs[e.next, a2]
            if w > 0:
                out.append((w, Transition(x, a, e.r, e.next, a2)))
    return out
