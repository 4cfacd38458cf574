"""Adaptive policies: sampling-based density greedy and greedy mixtures.

A policy is a deterministic function of the current observation and a
*branch* (its internal randomness drawn up front). :meth:`Policy.branches`
lists every branch with its probability so that evaluation can be exact;
:meth:`Policy.sample_branches` draws branches for Monte Carlo.

Greedy argmax ties go to the smallest item index.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, IndependenceSystem, Knapsack
from .errors import NoFeasibleSingleton, TooLargeToEnumerate, ValidationError
from .model import EMPTY, EPS, Model, PartialRealization, mask_items, popcount

MAX_EXACT_ITEMS = 12
MAX_PERMUTATION_ITEMS = 8


@dataclass(frozen=True)
class SamplingParams:
    """Mixture and sampling probabilities.

    ``delta0`` is the probability that an item lands in the first random
    half, ``delta1``/``delta2`` weight the candidate policies.
    """

    delta0: float = 0.5
    delta1: float = 0.2
    delta2: float = 0.4

    @classmethod
    def knapsack(cls, delta0=0.5, delta1=0.2, delta2=0.4) -> "SamplingParams":
        p = cls(delta0, delta1, delta2)
        p.validate("knapsack")
        return p

    @classmethod
    def ksystem(cls, delta0=0.5, delta1=0.5) -> "SamplingParams":
        p = cls(delta0, delta1, 0.0)
        p.validate("ksystem")
        return p

    def validate(self, kind: str):
        if not 0 < self.delta0 < 1:
            raise ValidationError(f"delta0 must lie in (0, 1), got {self.delta0}")
        if not 0 <= self.delta1 <= 1:
            raise ValidationError(f"delta1 must lie in [0, 1], got {self.delta1}")
        if kind == "knapsack":
            if not 0 <= self.delta2 <= 1:
                raise ValidationError(f"delta2 must lie in [0, 1], got {self.delta2}")
            if self.delta1 + self.delta2 > 1 + EPS:
                raise ValidationError(f"delta1 + delta2 = {self.delta1 + self.delta2} exceeds 1")


@dataclass
class Trace:
    """One run: ordered ``(item, state)`` selections and the realized utility."""

    selections: tuple[tuple[int, int], ...]
    branch: object
    utility: float
    phases: tuple[tuple[tuple[int, int], ...], ...] = field(default=())

    @property
    def items(self) -> frozenset[int]:
        return frozenset(e for e, _ in self.selections)

    @property
    def order(self) -> list[int]:
        return [e for e, _ in self.selections]

    @property
    def mask(self) -> int:
        return sum(1 << e for e in self.items)


def partition_weight(mask: int, n: int, p: float) -> float:
    k = popcount(mask)
    return p**k * (1 - p) ** (n - k)


def _check_exact(n: int):
    if n > MAX_EXACT_ITEMS:
        raise TooLargeToEnumerate(f"exact branch enumeration is capped at {MAX_EXACT_ITEMS} items, got {n}")


def _sample_masks(rng: np.random.Generator, size: int, n: int, p: float) -> np.ndarray:
    bits = rng.random((size, n)) < p
    return bits.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64)) if n else np.zeros(size, np.int64)


class Policy:
    """Base class. Subclasses override :meth:`next` and, when randomized,
    :meth:`branches` and :meth:`sample_branches`."""

    name = "policy"

    def __init__(self, model: Model, constraint: Constraint | None = None):
        self.model = model
        self.constraint = constraint

    @property
    def n_items(self) -> int:
        return self.model.n_items

    def branches(self) -> list[tuple[object, float]]:
        return [(None, 1.0)]

    enumerate_randomness = branches

    def sample_branches(self, rng: np.random.Generator, size: int) -> list:
        return [None] * size

    def next(self, psi: PartialRealization, branch) -> int | None:
        raise NotImplementedError

    def run(self, phi, branch=None) -> Trace:
        phi = tuple(phi)
        psi = EMPTY
        while (e := self.next(psi, branch)) is not None:
            psi = psi.extend(e, phi[e])
        return Trace(psi.assignments, branch, self.model.f.value(psi.mask, phi), (psi.assignments,))

    def __repr__(self):
        return f"{type(self).__name__}()"


class EmptyPolicy(Policy):
    name = "empty"

    def next(self, psi, branch):
        return None


class FixedSetPolicy(Policy):
    """Selects the given items in order, ignoring observations."""

    name = "fixed"

    def __init__(self, model: Model, items, constraint: Constraint | None = None):
        super().__init__(model, constraint)
        self.items = tuple(dict.fromkeys(int(e) for e in items))
        if constraint is not None and not constraint.is_feasible(self.items):
            raise ValidationError(f"fixed set {self.items} is infeasible")

    def next(self, psi, branch):
        k = len(psi)
        return self.items[k] if k < len(self.items) else None

    def __repr__(self):
        return f"FixedSetPolicy({list(self.items)})"


def best_singleton(model: Model, constraint: Constraint | None) -> int:
    """``argmax f(e)`` over individually feasible items; ties to the smallest index."""
    best, best_val = None, -math.inf
    for e in range(model.n_items):
        if constraint is not None and not constraint.is_feasible(1 << e):
            continue
        v = model.singleton_value(e)
        if best is None or v > best_val + EPS:
            best, best_val = e, v
    if best is None:
        raise NoFeasibleSingleton("no item fits the constraint on its own")
    return best


class SingletonPolicy(Policy):
    """Picks the feasible item with the largest expected singleton value."""

    name = "singleton"

    def __init__(self, model, constraint=None):
        super().__init__(model, constraint)
        try:
            self.item = best_singleton(model, constraint)
        except NoFeasibleSingleton:
            self.item = None

    def next(self, psi, branch):
        return self.item if not psi.assignments else None


def greedy_choice(model: Model, constraint: Constraint | None, pool: int, psi: PartialRealization,
                  density: bool) -> int | None:
    """One round of (density) greedy restricted to ``pool``.

    The first round filters on ``f(e) > 0``; later rounds on a positive
    conditional marginal. Both require feasibility of the extended set.
    """
    chosen = psi.mask
    costs = constraint.costs if density else None
    best, best_score = None, -math.inf
    for e in mask_items(pool & ~chosen):
        if constraint is not None and not constraint.is_feasible(chosen | 1 << e):
            continue
        if not psi.assignments:
            if model.singleton_value(e) <= EPS:
                continue
            gain = model.marginal(e, psi)
        else:
            gain = model.marginal(e, psi)
            if gain <= EPS:
                continue
        score = gain / costs[e] if density else gain
        if best is None or score > best_score + EPS:
            best, best_score = e, score
    return best


class DensityGreedyPolicy(Policy):
    """Benefit-to-cost greedy over a fixed pool under a knapsack."""

    name = "density-greedy"

    def __init__(self, model: Model, kp: Knapsack, pool=None):
        super().__init__(model, kp)
        self.pool = (1 << model.n_items) - 1 if pool is None else _as_mask(pool)

    def next(self, psi, branch):
        return greedy_choice(self.model, self.constraint, self.pool, psi, density=True)


class GreedyPolicy(Policy):
    """Largest-marginal greedy over a fixed pool under an independence system."""

    name = "greedy"

    def __init__(self, model: Model, sys: Constraint, pool=None):
        super().__init__(model, sys)
        self.pool = (1 << model.n_items) - 1 if pool is None else _as_mask(pool)

    def next(self, psi, branch):
        return greedy_choice(self.model, self.constraint, self.pool, psi, density=False)


def _as_mask(pool) -> int:
    if isinstance(pool, (int, np.integer)):
        return int(pool)
    return sum(1 << int(e) for e in set(pool))


class SampledGreedyPolicy(Policy):
    """Greedy (or density greedy) on a random subset holding each item w.p. ``sigma``.

    Branch: the sampled subset as a bitmask.
    """

    name = "sampled-greedy"

    def __init__(self, model: Model, constraint: Constraint, sigma: float, density: bool):
        super().__init__(model, constraint)
        if not 0 < sigma <= 1:
            raise ValidationError(f"sampling probability must lie in (0, 1], got {sigma}")
        self.sigma = float(sigma)
        self.density = density

    def branches(self):
        n = self.n_items
        _check_exact(n)
        out = []
        for mask in range(1 << n):
            w = partition_weight(mask, n, self.sigma)
            if w > 0:
                out.append((mask, w))
        return out

    def sample_branches(self, rng, size):
        return _sample_masks(rng, size, self.n_items, self.sigma).tolist()

    def next(self, psi, branch):
        return greedy_choice(self.model, self.constraint, branch, psi, density=self.density)

    def __repr__(self):
        kind = "density" if self.density else "marginal"
        return f"SampledGreedyPolicy(sigma={self.sigma}, {kind})"


class _MixturePolicy(Policy):
    """Random bucket ``r0`` over candidate policies times a Bernoulli(δ0) partition.

    Branch: ``(bucket, mask of S1)``.
    """

    bucket_probs: tuple[float, ...] = ()
    delta0: float = 0.5

    def branches(self):
        n = self.n_items
        _check_exact(n)
        out = []
        for bucket, pb in enumerate(self.bucket_probs):
            if pb <= 0:
                continue
            for mask in range(1 << n):
                w = partition_weight(mask, n, self.delta0)
                if w > 0:
                    out.append(((bucket, mask), pb * w))
        return out

    def sample_branches(self, rng, size):
        r0 = rng.random(size)
        masks = _sample_masks(rng, size, self.n_items, self.delta0)
        edges = np.cumsum(self.bucket_probs)[:-1]
        buckets = np.searchsorted(edges, r0, side="right")
        return list(zip(buckets.tolist(), masks.tolist()))


class SadPolicy(_MixturePolicy):
    """Knapsack mixture: best singleton w.p. δ1, density greedy on ``S1`` w.p. δ2,
    density greedy on ``S2`` otherwise."""

    name = "sad"

    def __init__(self, model: Model, kp: Knapsack, params: SamplingParams | None = None):
        super().__init__(model, kp)
        self.params = params or SamplingParams.knapsack()
        self.params.validate("knapsack")
        d1, d2 = self.params.delta1, self.params.delta2
        self.bucket_probs = (d1, d2, max(0.0, 1.0 - d1 - d2))
        self.delta0 = self.params.delta0
        self.singleton = SingletonPolicy(model, kp)

    def next(self, psi, branch):
        bucket, mask = branch
        if bucket == 0:
            return self.singleton.next(psi, None)
        full = (1 << self.n_items) - 1
        pool = mask if bucket == 1 else full & ~mask
        return greedy_choice(self.model, self.constraint, pool, psi, density=True)

    def __repr__(self):
        return f"SadPolicy({self.params})"


class SimplifiedSadPolicy(_MixturePolicy):
    """Two-candidate form: best singleton w.p. δ1, else density greedy on a
    Bernoulli(1/2) sample."""

    name = "sad-simplified"

    def __init__(self, model: Model, kp: Knapsack, delta1: float = 0.2):
        super().__init__(model, kp)
        if not 0 <= delta1 <= 1:
            raise ValidationError(f"delta1 must lie in [0, 1], got {delta1}")
        self.bucket_probs = (delta1, 1.0 - delta1)
        self.delta0 = 0.5
        self.singleton = SingletonPolicy(model, kp)

    def next(self, psi, branch):
        bucket, mask = branch
        if bucket == 0:
            return self.singleton.next(psi, None)
        return greedy_choice(self.model, self.constraint, mask, psi, density=True)


class SagPolicy(_MixturePolicy):
    """k-system mixture: greedy on ``S1`` w.p. δ1, greedy on ``S2`` otherwise."""

    name = "sag"

    def __init__(self, model: Model, sys: Constraint, params: SamplingParams | None = None):
        super().__init__(model, sys)
        self.params = params or SamplingParams.ksystem()
        self.params.validate("ksystem")
        self.bucket_probs = (self.params.delta1, 1.0 - self.params.delta1)
        self.delta0 = self.params.delta0

    def next(self, psi, branch):
        bucket, mask = branch
        full = (1 << self.n_items) - 1
        pool = mask if bucket == 0 else full & ~mask
        return greedy_choice(self.model, self.constraint, pool, psi, density=False)

    def __repr__(self):
        return f"SagPolicy({self.params})"


def simplified_sag(model: Model, sys: Constraint) -> SampledGreedyPolicy:
    """Single-candidate form of the k-system mixture at δ0 = 1/2."""
    return SampledGreedyPolicy(model, sys, 0.5, density=False)


class RandomPolicy(Policy):
    """Scans a uniformly random permutation, taking every item that stays feasible."""

    name = "random"

    def branches(self):
        n = self.n_items
        if n > MAX_PERMUTATION_ITEMS:
            raise TooLargeToEnumerate(f"random policy enumerates {n}! permutations; cap is {MAX_PERMUTATION_ITEMS} items")
        perms = list(itertools.permutations(range(n)))
        return [(p, 1.0 / len(perms)) for p in perms]

    def sample_branches(self, rng, size):
        n = self.n_items
        return [tuple(rng.permutation(n).tolist()) for _ in range(size)]

    def next(self, psi, branch):
        chosen = psi.mask
        for e in branch:
            if chosen >> e & 1:
                continue
            if self.constraint is None or self.constraint.is_feasible(chosen | 1 << e):
                return e
        return None


class ConcatenatedPolicy(Policy):
    """Runs ``first`` to completion, then ``second`` from an empty observation.

    The selected set is the union of both runs; items picked twice count once.
    """

    name = "concat"

    def __init__(self, first: Policy, second: Policy):
        if first.model is not second.model:
            raise ValidationError("concatenated policies must share a model")
        super().__init__(first.model, None)
        self.first = first
        self.second = second

    def branches(self):
        return [((a, b), pa * pb) for a, pa in self.first.branches() for b, pb in self.second.branches()]

    def sample_branches(self, rng, size):
        return list(zip(self.first.sample_branches(rng, size), self.second.sample_branches(rng, size)))

    def run(self, phi, branch=None):
        a, b = branch if branch is not None else (None, None)
        ta = self.first.run(phi, a)
        tb = self.second.run(phi, b)
        seen = set()
        selections = []
        for e, o in ta.selections + tb.selections:
            if e not in seen:
                seen.add(e)
                selections.append((e, o))
        mask = sum(1 << e for e in seen)
        return Trace(tuple(selections), branch, self.model.f.value(mask, tuple(phi)),
                     ta.phases + tb.phases)

    def next(self, psi, branch):
        raise TypeError("concatenated policies are run phase by phase; use run()")

    def __repr__(self):
        return f"{self.first!r} @ {self.second!r}"


def concatenate(pi_a: Policy, pi_b: Policy) -> ConcatenatedPolicy:
    return ConcatenatedPolicy(pi_a, pi_b)


def density_greedy_run(model: Model, kp: Knapsack, pool, phi) -> Trace:
    return DensityGreedyPolicy(model, kp, pool).run(phi)


def greedy_run(model: Model, sys: Constraint, pool, phi) -> Trace:
    return GreedyPolicy(model, sys, pool).run(phi)


def run_pi_sad(model: Model, kp: Knapsack, params: SamplingParams, phi, branch) -> Trace:
    return SadPolicy(model, kp, params).run(phi, branch)


def run_pi_sag(model: Model, sys: Constraint, params: SamplingParams, phi, branch) -> Trace:
    return SagPolicy(model, sys, params).run(phi, branch)


def simplified_pi_sad(model: Model, kp: Knapsack, phi, branch, delta1: float = 0.2) -> Trace:
    return SimplifiedSadPolicy(model, kp, delta1).run(phi, branch)


POLICY_KINDS = ("sad", "sad-simplified", "sag", "greedy", "density-greedy", "singleton", "random")


def make_policy(kind: str, model: Model, constraint: Constraint, params: SamplingParams | None = None) -> Policy:
    """Build a policy by CLI name. ``params`` overrides the default δ's."""
    if kind in ("sad", "sad-simplified", "density-greedy") and not isinstance(constraint, Knapsack):
        raise ValidationError(f"policy {kind!r} needs a knapsack constraint")
    if kind == "sag" and not isinstance(constraint, IndependenceSystem):
        raise ValidationError("policy 'sag' needs a k-system constraint")
    if kind == "sad":
        return SadPolicy(model, constraint, params or SamplingParams.knapsack())
    if kind == "sad-simplified":
        return SimplifiedSadPolicy(model, constraint, params.delta1 if params else 0.2)
    if kind == "sag":
        return SagPolicy(model, constraint, params or SamplingParams.ksystem())
    if kind == "greedy":
        return GreedyPolicy(model, constraint)
    if kind == "density-greedy":
        return DensityGreedyPolicy(model, constraint)
    if kind == "singleton":
        return SingletonPolicy(model, constraint)
    if kind == "random":
        return RandomPolicy(model, constraint)
    raise ValidationError(f"unknown policy {kind!r}; choose from {', '.join(POLICY_KINDS)}")
