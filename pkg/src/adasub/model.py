"""Items, states, realizations, priors and the conditional marginal oracle.

Items are dense integers ``0..n-1`` and states dense integers ``0..s-1``.
Sets of items are passed around either as iterables or as bitmasks (item
``i`` is bit ``i``); :func:`to_mask` converts between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import TooLargeToEnumerate, ValidationError, ZeroProbabilityObservation

EPS = 1e-9
# cap on log2 of the joint support produced by expanding an independent prior
MAX_JOINT_BITS = 24


def to_mask(items) -> int:
    if isinstance(items, (int, np.integer)):
        return int(items)
    mask = 0
    for e in items:
        mask |= 1 << int(e)
    return mask


def mask_items(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def realization_index(states: Sequence[int], n_states: int) -> int:
    """Mixed-radix little-endian index of a full realization."""
    idx = 0
    for e in reversed(range(len(states))):
        idx = idx * n_states + int(states[e])
    return idx


def realization_from_index(index: int, n_items: int, n_states: int) -> tuple[int, ...]:
    out = []
    for _ in range(n_items):
        index, o = divmod(index, n_states)
        out.append(o)
    return tuple(out)


@dataclass(frozen=True)
class PartialRealization:
    """Observed ``(item, state)`` pairs in selection order."""

    assignments: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pairs = tuple((int(e), int(o)) for e, o in self.assignments)
        object.__setattr__(self, "assignments", pairs)
        if len({e for e, _ in pairs}) != len(pairs):
            raise ValidationError(f"item observed twice in {pairs}")

    @classmethod
    def coerce(cls, psi) -> "PartialRealization":
        if psi is None:
            return EMPTY
        if isinstance(psi, PartialRealization):
            return psi
        if isinstance(psi, dict):
            return cls(tuple(psi.items()))
        return cls(tuple(psi))

    @cached_property
    def key(self) -> tuple[tuple[int, int], ...]:
        """Order-free identity; two observations with the same pairs share a key."""
        return tuple(sorted(self.assignments))

    @cached_property
    def domain(self) -> frozenset[int]:
        return frozenset(e for e, _ in self.assignments)

    @cached_property
    def mask(self) -> int:
        return to_mask(self.domain)

    def as_dict(self) -> dict[int, int]:
        return dict(self.assignments)

    def extend(self, e: int, o: int) -> "PartialRealization":
        return PartialRealization(self.assignments + ((int(e), int(o)),))

    def restrict(self, items) -> "PartialRealization":
        keep = set(items)
        return PartialRealization(tuple(p for p in self.assignments if p[0] in keep))

    def __len__(self) -> int:
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)

    def __eq__(self, other):
        if not isinstance(other, PartialRealization):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)


EMPTY = PartialRealization()


def is_consistent(psi, phi: Sequence[int]) -> bool:
    """True iff ``phi`` agrees with ``psi`` on every observed item."""
    psi = PartialRealization.coerce(psi)
    return all(phi[e] == o for e, o in psi.assignments)


def is_subrealization(psi, psi2) -> bool:
    psi = PartialRealization.coerce(psi)
    other = PartialRealization.coerce(psi2).as_dict()
    return all(e in other and other[e] == o for e, o in psi.assignments)


class Prior:
    """Distribution over full realizations, stored as its positive support.

    ``realizations`` is an ``(m, n)`` integer array and ``probs`` the matching
    probabilities. Use :meth:`explicit` or :meth:`independent` to build one.
    """

    def __init__(self, realizations, probs, n_states: int, *, marginals=None):
        R = np.array(realizations, dtype=np.int64)
        if R.ndim == 1:
            R = R.reshape(len(R), -1) if len(R) else R.reshape(0, 0)
        p = np.array(probs, dtype=float)
        if R.shape[0] != p.shape[0] or R.shape[0] == 0:
            raise ValidationError("prior needs one probability per realization and a nonempty support")
        if n_states < 1:
            raise ValidationError("need at least one state")
        if R.size and (R.min() < 0 or R.max() >= n_states):
            raise ValidationError("realization state out of range")
        if np.any(p <= 0):
            raise ValidationError("support probabilities must be strictly positive")
        if abs(p.sum() - 1.0) > EPS:
            raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
        if len({tuple(r) for r in R.tolist()}) != len(R):
            raise ValidationError("duplicate realization in support")
        R.setflags(write=False)
        p.setflags(write=False)
        self.realizations = R
        self.probs = p
        self.n_states = int(n_states)
        self.marginals = marginals

    @classmethod
    def explicit(cls, support, n_states: int) -> "Prior":
        """From ``[(states, p), ...]``; zero-probability entries are dropped."""
        support = [(tuple(int(o) for o in s), float(p)) for s, p in support if float(p) > 0]
        if not support:
            raise ValidationError("empty support")
        return cls([s for s, _ in support], [p for _, p in support], n_states)

    @classmethod
    def independent(cls, marginals) -> "Prior":
        """Product of per-item categorical distributions, expanded to the joint."""
        marginals = [tuple(float(x) for x in row) for row in marginals]
        if not marginals:
            raise ValidationError("independent prior needs at least one item")
        s = len(marginals[0])
        if any(len(row) != s for row in marginals):
            raise ValidationError("every item needs the same number of states")
        for row in marginals:
            if min(row) < 0 or abs(sum(row) - 1.0) > EPS:
                raise ValidationError(f"bad marginal {row}")
        n = len(marginals)
        if n * math.log2(max(s, 2)) > MAX_JOINT_BITS:
            raise TooLargeToEnumerate(f"joint support of {s}**{n} realizations exceeds 2**{MAX_JOINT_BITS}")
        states = []
        probs = []
        for idx in range(s**n):
            phi = realization_from_index(idx, n, s)
            p = 1.0
            for e, o in enumerate(phi):
                p *= marginals[e][o]
            if p > 0:
                states.append(phi)
                probs.append(p)
        total = sum(probs)
        probs = [p / total for p in probs]
        return cls(states, probs, s, marginals=tuple(marginals))

    @classmethod
    def deterministic(cls, phi: Sequence[int], n_states: int) -> "Prior":
        return cls([tuple(phi)], [1.0], n_states)

    @classmethod
    def uniform(cls, n_items: int, n_states: int) -> "Prior":
        return cls.independent([[1.0 / n_states] * n_states for _ in range(n_items)])

    @property
    def n_items(self) -> int:
        return self.realizations.shape[1]

    @property
    def size(self) -> int:
        return self.realizations.shape[0]

    @cached_property
    def support(self) -> list[tuple[int, ...]]:
        return [tuple(r) for r in self.realizations.tolist()]

    def consistent(self, psi) -> np.ndarray:
        """Boolean mask over the support rows consistent with ``psi``."""
        psi = PartialRealization.coerce(psi)
        if not psi.assignments:
            return np.ones(self.size, dtype=bool)
        items = [e for e, _ in psi.assignments]
        states = [o for _, o in psi.assignments]
        return np.all(self.realizations[:, items] == states, axis=1)

    def probability(self, psi) -> float:
        """``Pr[psi ≺ Φ]``."""
        return float(self.probs[self.consistent(psi)].sum())

    def condition(self, psi) -> "Prior":
        psi = PartialRealization.coerce(psi)
        if not psi.assignments:
            return self
        keep = self.consistent(psi)
        if keep.all():
            return self
        mass = self.probs[keep].sum()
        if mass <= 0:
            raise ZeroProbabilityObservation(f"no supported realization is consistent with {psi.assignments}")
        return Prior(self.realizations[keep], self.probs[keep] / mass, self.n_states)

    def state_distribution(self, e: int, psi=None) -> list[tuple[int, float]]:
        """``[(o, Pr[Φ(e)=o | psi])]`` over states with positive probability."""
        keep = self.consistent(psi)
        mass = self.probs[keep].sum()
        if mass <= 0:
            raise ZeroProbabilityObservation(f"observation {psi} has probability zero")
        col = self.realizations[keep, e]
        w = self.probs[keep]
        out = []
        for o in range(self.n_states):
            p = float(w[col == o].sum() / mass)
            if p > 0:
                out.append((o, p))
        return out

    def index_of(self, phi: Sequence[int]) -> int:
        target = tuple(int(o) for o in phi)
        try:
            return self.support.index(target)
        except ValueError:
            raise ZeroProbabilityObservation(f"{target} is not in the support") from None

    def __eq__(self, other):
        if not isinstance(other, Prior):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.realizations.shape == other.realizations.shape
            and np.array_equal(self.realizations, other.realizations)
            and np.array_equal(self.probs, other.probs)
        )

    def __hash__(self):
        return hash((self.n_states, self.realizations.shape, self.realizations.tobytes(), self.probs.tobytes()))

    def __repr__(self):
        return f"Prior(n_items={self.n_items}, n_states={self.n_states}, support={self.size})"


class UtilityFunction:
    """Oracle ``f(S, phi) >= 0``. Subclasses implement :meth:`value` on bitmasks."""

    n_items: int
    n_states: int

    def value(self, mask: int, phi: tuple[int, ...]) -> float:
        raise NotImplementedError

    def __call__(self, items, phi) -> float:
        return self.value(to_mask(items), tuple(int(o) for o in phi))

    def matrix(self, realizations: np.ndarray) -> np.ndarray:
        """Values for every subset (rows) and every given realization (columns)."""
        n = self.n_items
        phis = [tuple(r) for r in np.asarray(realizations).tolist()]
        out = np.empty((1 << n, len(phis)))
        for j, phi in enumerate(phis):
            for mask in range(1 << n):
                out[mask, j] = self.value(mask, phi)
        return out


class Model:
    """A utility function paired with a prior, with cached exact oracles.

    All conditional quantities are computed by enumeration of the conditioned
    support and memoized per observation.
    """

    def __init__(self, f: UtilityFunction, prior: Prior):
        if f.n_items != prior.n_items:
            raise ValidationError(f"utility has {f.n_items} items, prior has {prior.n_items}")
        if f.n_states != prior.n_states:
            raise ValidationError(f"utility has {f.n_states} states, prior has {prior.n_states}")
        self.f = f
        self.prior = prior
        self.n_items = prior.n_items
        self.n_states = prior.n_states
        self.values = f.matrix(prior.realizations)
        self.values.setflags(write=False)
        self._weights: dict = {}
        self._delta: dict = {}

    def weights(self, psi=None) -> np.ndarray:
        """Conditional probabilities ``p(phi | psi)`` over the support rows."""
        psi = PartialRealization.coerce(psi)
        key = psi.key
        w = self._weights.get(key)
        if w is None:
            keep = self.prior.consistent(psi)
            w = np.where(keep, self.prior.probs, 0.0)
            mass = w.sum()
            if mass <= 0:
                raise ZeroProbabilityObservation(f"observation {psi.assignments} has probability zero")
            w = w / mass
            self._weights[key] = w
        return w

    def expected_utility(self, items, psi=None) -> float:
        return float(self.values[to_mask(items)] @ self.weights(psi))

    def marginal(self, e: int, psi=None) -> float:
        psi = PartialRealization.coerce(psi)
        key = (psi.key, e)
        d = self._delta.get(key)
        if d is None:
            base = psi.mask
            if base >> e & 1:
                d = 0.0
            else:
                w = self.weights(psi)
                d = float((self.values[base | 1 << e] - self.values[base]) @ w)
            self._delta[key] = d
        return d

    def singleton_value(self, e: int) -> float:
        """``f(e) = E f({e}, Φ)``."""
        return float(self.values[1 << e] @ self.prior.probs)

    def state_distribution(self, e: int, psi=None) -> list[tuple[int, float]]:
        psi = PartialRealization.coerce(psi)
        w = self.weights(psi)
        col = self.prior.realizations[:, e]
        return [(o, float(w[col == o].sum())) for o in range(self.n_states) if w[col == o].sum() > 0]

    def utility(self, items, phi) -> float:
        return self.f(items, phi)


@lru_cache(maxsize=128)
def _model(f: UtilityFunction, prior: Prior) -> Model:
    return Model(f, prior)


def condition(prior: Prior, psi) -> Prior:
    return prior.condition(psi)


def expected_utility(f: UtilityFunction, S, prior: Prior, psi=None) -> float:
    return _model(f, prior).expected_utility(S, psi)


def marginal(f: UtilityFunction, e: int, psi, prior: Prior) -> float:
    return _model(f, prior).marginal(e, psi)


def singleton_value(f: UtilityFunction, e: int, prior: Prior) -> float:
    return _model(f, prior).singleton_value(e)
