"""Finite-support measures on the real line.

Everything here is immutable.  Arrays handed to the constructors are copied
and frozen, so distributions can be shared freely between operators.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

__all__ = [
    "ParameterError",
    "SupportGrid",
    "CategoricalDistribution",
    "FiniteDistribution",
    "SignedGridMeasure",
    "ReturnDistributionFunction",
    "COALESCE_TOL",
    "PROB_TOL",
    "dirac",
    "as_finite",
    "pushforward_affine",
    "mix",
    "cdf",
    "mean",
    "coalesce",
]

COALESCE_TOL = 1e-12
PROB_TOL = 1e-12


class ParameterError(ValueError):
    """An argument violates an operation's precondition."""


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class SupportGrid:
    """Strictly increasing support locations ``z_1 < ... < z_K`` with ``K >= 2``."""

    __slots__ = ("_z",)

    def __init__(self, locations: Iterable[float]):
        z = _frozen(list(locations))
        if z.ndim != 1 or z.size < 2:
            raise ParameterError("a support grid needs at least two locations")
        if not np.all(np.isfinite(z)):
            raise ParameterError("grid locations must be finite")
        if not np.all(np.diff(z) > 0):
            raise ParameterError("grid locations must be strictly increasing")
        self._z = z

    @classmethod
    def uniform(cls, lo: float, hi: float, k: int) -> SupportGrid:
        return cls(np.linspace(lo, hi, k))

    @property
    def locations(self) -> np.ndarray:
        return self._z

    @property
    def k(self) -> int:
        return int(self._z.size)

    def __len__(self) -> int:
        return self.k

    @property
    def lo(self) -> float:
        return float(self._z[0])

    @property
    def hi(self) -> float:
        return float(self._z[-1])

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self._z)

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupportGrid):
            return NotImplemented
        return self is other or np.array_equal(self._z, other._z)

    def __hash__(self) -> int:
        return hash(self._z.tobytes())

    def __repr__(self) -> str:
        return f"SupportGrid({self._z.tolist()})"


class CategoricalDistribution:
    """Probability vector over the points of a fixed :class:`SupportGrid`.

    Construction never renormalises: probabilities that are negative or do not
    sum to one within ``PROB_TOL`` raise :class:`ParameterError`.
    """

    __slots__ = ("grid", "_p")

    def __init__(self, grid: SupportGrid, probs: Iterable[float]):
        p = _frozen(list(probs) if not isinstance(probs, np.ndarray) else probs)
        if p.shape != (grid.k,):
            raise ParameterError(f"expected {grid.k} probabilities, got shape {p.shape}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ParameterError(f"probabilities must be finite and nonnegative: {p}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ParameterError(f"probabilities sum to {p.sum()!r}, not 1")
        self.grid = grid
        self._p = p

    @classmethod
    def dirac(cls, grid: SupportGrid, index: int) -> CategoricalDistribution:
        p = np.zeros(grid.k)
        p[index] = 1.0
        return cls(grid, p)

    @property
    def probs(self) -> np.ndarray:
        return self._p

    @property
    def locations(self) -> np.ndarray:
        return self.grid.locations

    @property
    def masses(self) -> np.ndarray:
        return self._p

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoricalDistribution):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self._p, other._p)

    __hash__ = None

    def __repr__(self) -> str:
        terms = [f"{m:.6g}δ_{z:g}" for z, m in zip(self.grid.locations, self._p) if m]
        return "Categorical(" + " + ".join(terms) + ")"


class FiniteDistribution:
    """Probability measure with finitely many atoms.

    Locations are strictly increasing and every mass is positive; zero-mass
    atoms are dropped by :meth:`from_atoms`.  Use :meth:`from_atoms` for
    unsorted or duplicated input.
    """

    __slots__ = ("_x", "_m")

    def __init__(self, locations: Iterable[float], masses: Iterable[float]):
        x = _frozen(locations)
        m = _frozen(masses)
        if x.ndim != 1 or x.shape != m.shape or x.size == 0:
            raise ParameterError("locations and masses must be nonempty 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            raise ParameterError("atoms must be finite")
        if np.any(np.diff(x) <= 0):
            raise ParameterError("atom locations must be strictly increasing")
        if np.any(m < 0):
            raise ParameterError("atom masses must be nonnegative")
        if abs(m.sum() - 1.0) > PROB_TOL:
            raise ParameterError(f"masses sum to {m.sum()!r}, not 1")
        self._x = x
        self._m = m

    @classmethod
    def from_atoms(
        cls,
        locations: Iterable[float],
        masses: Iterable[float],
        tol: float = COALESCE_TOL,
    ) -> FiniteDistribution:
        x, m = _coalesce_arrays(
            np.asarray(locations, dtype=np.float64).ravel(),
            np.asarray(masses, dtype=np.float64).ravel(),
            tol,
        )
        return cls(x, m)

    @property
    def locations(self) -> np.ndarray:
        return self._x

    @property
    def masses(self) -> np.ndarray:
        return self._m

    def __len__(self) -> int:
        return int(self._x.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteDistribution):
            return NotImplemented
        return np.array_equal(self._x, other._x) and np.array_equal(self._m, other._m)

    __hash__ = None

    def __repr__(self) -> str:
        if len(self) > 8:
            return f"FiniteDistribution({len(self)} atoms on [{self._x[0]:g}, {self._x[-1]:g}])"
        terms = [f"{m:.6g}δ_{x:g}" for x, m in zip(self._x, self._m)]
        return "FiniteDistribution(" + " + ".join(terms) + ")"


class SignedGridMeasure:
    """Signed weights on the points of a grid; total mass need not be zero or one."""

    __slots__ = ("grid", "_w")

    def __init__(self, grid: SupportGrid, weights: Iterable[float]):
        w = _frozen(weights)
        if w.shape != (grid.k,):
            raise ParameterError(f"expected {grid.k} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ParameterError("weights must be finite")
        self.grid = grid
        self._w = w

    @classmethod
    def difference(cls, a: CategoricalDistribution, b: CategoricalDistribution) -> SignedGridMeasure:
        if a.grid != b.grid:
            raise ParameterError("both distributions must live on the same grid")
        return cls(a.grid, a.probs - b.probs)

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def locations(self) -> np.ndarray:
        return self.grid.locations

    @property
    def masses(self) -> np.ndarray:
        return self._w

    @property
    def total_mass(self) -> float:
        return float(self._w.sum())

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self._w) <= tol))

    def __repr__(self) -> str:
        return f"SignedGridMeasure({self._w.tolist()})"


Distribution = Union[CategoricalDistribution, FiniteDistribution]
Measure = Union[CategoricalDistribution, FiniteDistribution, SignedGridMeasure]


class ReturnDistributionFunction:
    """A complete table of distributions indexed by ``(state, action)``."""

    __slots__ = ("_rows",)

    def __init__(self, rows: Sequence[Sequence[Distribution]]):
        table = tuple(tuple(r) for r in rows)
        if not table or not table[0]:
            raise ParameterError("a return distribution function needs at least one pair")
        n_actions = len(table[0])
        for x, r in enumerate(table):
            if len(r) != n_actions:
                raise ParameterError(f"state {x} has {len(r)} actions, expected {n_actions}")
            for a, d in enumerate(r):
                if not isinstance(d, (CategoricalDistribution, FiniteDistribution)):
                    raise ParameterError(f"entry ({x}, {a}) is not a probability distribution")
        self._rows = table

    @classmethod
    def constant(cls, n_states: int, n_actions: int, dist: Distribution) -> ReturnDistributionFunction:
        return cls([[dist] * n_actions for _ in range(n_states)])

    @classmethod
    def build(
        cls, n_states: int, n_actions: int, fn: Callable[[int, int], Distribution]
    ) -> ReturnDistributionFunction:
        return cls([[fn(x, a) for a in range(n_actions)] for x in range(n_states)])

    @classmethod
    def from_probs(cls, grid: SupportGrid, probs: np.ndarray) -> ReturnDistributionFunction:
        """Wrap an ``(n_states, n_actions, K)`` probability array."""
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[2] != grid.k:
            raise ParameterError(f"expected shape (S, A, {grid.k}), got {probs.shape}")
        return cls.build(
            probs.shape[0], probs.shape[1], lambda x, a: CategoricalDistribution(grid, probs[x, a])
        )

    @property
    def n_states(self) -> int:
        return len(self._rows)

    @property
    def n_actions(self) -> int:
        return len(self._rows[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_states, self.n_actions

    def __getitem__(self, key: tuple[int, int]) -> Distribution:
        x, a = key
        return self._rows[x][a]

    def pairs(self) -> Iterator[tuple[int, int]]:
        for x in range(self.n_states):
            for a in range(self.n_actions):
                yield x, a

    def items(self) -> Iterator[tuple[tuple[int, int], Distribution]]:
        for x, a in self.pairs():
            yield (x, a), self._rows[x][a]

    def map(self, fn: Callable[[Distribution], Distribution]) -> ReturnDistributionFunction:
        return ReturnDistributionFunction([[fn(d) for d in r] for r in self._rows])

    @property
    def grid(self) -> SupportGrid | None:
        """The common grid if every entry is categorical on one grid, else ``None``."""
        first = self._rows[0][0]
        if not isinstance(first, CategoricalDistribution):
            return None
        for _, d in self.items():
            if not isinstance(d, CategoricalDistribution) or d.grid != first.grid:
                return None
        return first.grid

    def probs_array(self) -> np.ndarray:
        if self.grid is None:
            raise ParameterError("probs_array needs categorical entries on a common grid")
        return np.array([[d.probs for d in r] for r in self._rows])

    def means(self) -> np.ndarray:
        return np.array([[mean(d) for d in r] for r in self._rows])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReturnDistributionFunction):
            return NotImplemented
        return self.shape == other.shape and all(
            self[p] == other[p] for p in self.pairs()
        )

    __hash__ = None

    def __repr__(self) -> str:
        body = ", ".join(f"{p}: {d!r}" for p, d in self.items())
        return f"ReturnDistributionFunction({body})"


def dirac(y: float) -> FiniteDistribution:
    return FiniteDistribution([y], [1.0])


def as_finite(d: Distribution) -> FiniteDistribution:
    """View a categorical distribution as a finite-atom one (zero-mass points dropped)."""
    if isinstance(d, FiniteDistribution):
        return d
    keep = d.probs > 0
    return FiniteDistribution(d.grid.locations[keep], d.probs[keep])


def _coalesce_arrays(x: np.ndarray, m: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    if x.shape != m.shape:
        raise ParameterError("locations and masses must have equal length")
    keep = m != 0
    x, m = x[keep], m[keep]
    if x.size == 0:
        raise ParameterError("a distribution needs at least one atom of positive mass")
    order = np.argsort(x, kind="stable")
    x, m = x[order], m[order]
    # a new cluster starts wherever the gap to the previous atom exceeds tol
    starts = np.flatnonzero(np.concatenate(([True], np.diff(x) > tol)))
    if starts.size == x.size:
        return x, m
    mass = np.add.reduceat(m, starts)
    lo = np.minimum.reduceat(x, starts)
    hi = np.maximum.reduceat(x, starts)
    avg = np.add.reduceat(m * x, starts) / mass
    # exact duplicates keep their location bit-for-bit
    loc = np.where(lo == hi, lo, np.clip(avg, lo, hi))
    return loc, mass


def coalesce(d: FiniteDistribution, tol: float = COALESCE_TOL) -> FiniteDistribution:
    """Merge atoms closer than ``tol`` into their mass-weighted average."""
    if tol < 0:
        raise ParameterError("tol must be nonnegative")
    x, m = _coalesce_arrays(np.asarray(d.locations), np.asarray(d.masses), tol)
    return FiniteDistribution(x, m)


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"gamma must lie in [0, 1), got {gamma}")


def pushforward_affine(d: Distribution, r: float, gamma: float) -> FiniteDistribution:
    """Law of ``r + gamma * Z`` for ``Z ~ d``."""
    _check_gamma(gamma)
    return FiniteDistribution.from_atoms(r + gamma * d.locations, d.masses)


def mix(weights: Sequence[float], dists: Sequence[Distribution]) -> FiniteDistribution:
    """Convex combination of distributions, atoms coalesced."""
    if len(weights) != len(dists) or not dists:
        raise ParameterError("weights and dists must be nonempty and of equal length")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > PROB_TOL:
        raise ParameterError(f"mixture weights must be nonnegative and sum to 1, got {w.sum()!r}")
    xs = [d.locations for wi, d in zip(w, dists) if wi > 0]
    ms = [wi * d.masses for wi, d in zip(w, dists) if wi > 0]
    return FiniteDistribution.from_atoms(np.concatenate(xs), np.concatenate(ms))


def cdf(d: Measure, x):
    """Right-continuous distribution function ``d((-inf, x])``.

    Accepts a scalar or an array of evaluation points.
    """
    cum = np.concatenate(([0.0], np.cumsum(d.masses)))
    idx = np.searchsorted(d.locations, x, side="right")
    out = cum[idx]
    return float(out) if np.ndim(out) == 0 else out


def mean(d: Distribution) -> float:
    return float(np.dot(d.locations, d.masses))
