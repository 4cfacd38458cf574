"""Knapsack budgets and k-system independence oracles."""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateSystem, NotIndependentBase, TooLargeToVerify, ValidationError
from .model import EPS, mask_items, popcount, to_mask

MAX_VERIFY_ITEMS = 16


class Constraint:
    """Downward-closed feasibility family over items ``0..n_items-1``."""

    n_items: int

    def is_feasible(self, S) -> bool:
        raise NotImplementedError

    def can_add(self, V, e: int) -> bool:
        """True iff ``V ∪ {e}`` is feasible; ``V`` itself must be feasible."""
        V = to_mask(V)
        if not self.is_feasible(V):
            raise NotIndependentBase(f"base set {mask_items(V)} is not feasible")
        return self.is_feasible(V | 1 << e)

    def to_dict(self) -> dict:
        raise NotImplementedError


class Knapsack(Constraint):
    def __init__(self, costs, budget: float):
        self.costs = tuple(float(c) for c in costs)
        self.budget = float(budget)
        if any(c <= 0 for c in self.costs):
            raise ValidationError("item costs must be positive")
        if self.budget <= 0:
            raise ValidationError("budget must be positive")
        self.n_items = len(self.costs)

    def cost(self, S) -> float:
        return sum(self.costs[e] for e in mask_items(to_mask(S)))

    def is_feasible(self, S) -> bool:
        return self.cost(S) <= self.budget + EPS

    def affordable(self) -> list[int]:
        """Items whose cost alone fits the budget."""
        return [e for e, c in enumerate(self.costs) if c <= self.budget + EPS]

    def to_dict(self) -> dict:
        return {"knapsack": {"costs": list(self.costs), "budget": self.budget}}

    def __repr__(self):
        return f"Knapsack(costs={self.costs}, budget={self.budget})"


class IndependenceSystem(Constraint):
    """Base for k-systems; subclasses implement :meth:`is_independent`."""

    declared_k: int = 1

    def is_independent(self, S) -> bool:
        raise NotImplementedError

    def is_feasible(self, S) -> bool:
        return self.is_independent(S)


class Cardinality(IndependenceSystem):
    def __init__(self, limit: int, n_items: int):
        if limit < 0:
            raise ValidationError("cardinality limit must be nonnegative")
        self.limit = int(limit)
        self.n_items = int(n_items)
        self.declared_k = 1

    def is_independent(self, S) -> bool:
        return popcount(to_mask(S)) <= self.limit

    def to_dict(self):
        return {"cardinality": self.limit}

    def __repr__(self):
        return f"Cardinality({self.limit})"


class PartitionMatroid(IndependenceSystem):
    """At most ``limits[i]`` items from ``blocks[i]``; items outside every block are free."""

    def __init__(self, blocks, limits, n_items: int):
        self.blocks = tuple(tuple(sorted(int(e) for e in b)) for b in blocks)
        self.limits = tuple(int(x) for x in limits)
        self.n_items = int(n_items)
        self.declared_k = 1
        if len(self.blocks) != len(self.limits):
            raise ValidationError("one limit per block required")
        seen = [e for b in self.blocks for e in b]
        if len(seen) != len(set(seen)):
            raise ValidationError("partition blocks overlap")
        if any(e < 0 or e >= self.n_items for e in seen):
            raise ValidationError("block item out of range")
        if any(x < 0 for x in self.limits):
            raise ValidationError("block limits must be nonnegative")
        self._block_masks = tuple(to_mask(b) for b in self.blocks)

    def is_independent(self, S) -> bool:
        S = to_mask(S)
        return all(popcount(S & bm) <= lim for bm, lim in zip(self._block_masks, self.limits))

    def to_dict(self):
        return {"partition": {"blocks": [list(b) for b in self.blocks], "limits": list(self.limits)}}

    def __repr__(self):
        return f"PartitionMatroid(blocks={self.blocks}, limits={self.limits})"


class MatroidIntersection(IndependenceSystem):
    """Sets independent in every member matroid; declared k is the member count."""

    def __init__(self, matroids, declared_k: int | None = None):
        self.matroids = tuple(matroids)
        if not self.matroids:
            raise ValidationError("intersection needs at least one matroid")
        self.n_items = self.matroids[0].n_items
        if any(m.n_items != self.n_items for m in self.matroids):
            raise ValidationError("matroids disagree on the ground set size")
        self.declared_k = declared_k or len(self.matroids)

    def is_independent(self, S) -> bool:
        return all(m.is_independent(S) for m in self.matroids)

    def to_dict(self):
        return {"intersection": [m.to_dict() for m in self.matroids]}

    def __repr__(self):
        return f"MatroidIntersection({list(self.matroids)})"


class ExplicitSystem(IndependenceSystem):
    """Independent sets are the listed sets and all of their subsets."""

    def __init__(self, sets, n_items: int, declared_k: int | None = None):
        self.sets = tuple(tuple(sorted(int(e) for e in s)) for s in sets)
        self.n_items = int(n_items)
        if any(e < 0 or e >= self.n_items for s in self.sets for e in s):
            raise ValidationError("explicit set item out of range")
        self._masks = tuple(to_mask(s) for s in self.sets)
        self.declared_k = declared_k if declared_k is not None else verify_k(self)

    def is_independent(self, S) -> bool:
        S = to_mask(S)
        return S == 0 or any(S & m == S for m in self._masks)

    def to_dict(self):
        return {"explicit": [list(s) for s in self.sets]}

    def __repr__(self):
        return f"ExplicitSystem({self.sets})"


def is_independent(sys: IndependenceSystem, S) -> bool:
    return sys.is_independent(S)


def can_add(sys: Constraint, V, e: int) -> bool:
    return sys.can_add(V, e)


def knapsack_feasible(kp: Knapsack, S) -> bool:
    return kp.is_feasible(S)


def feasible_table(sys: Constraint) -> np.ndarray:
    """Boolean feasibility of every subset, indexed by bitmask."""
    return np.array([sys.is_feasible(m) for m in range(1 << sys.n_items)], dtype=bool)


def is_downward_closed(sys: Constraint) -> bool:
    ok = feasible_table(sys)
    if not ok[0]:
        return False
    for m in range(1, len(ok)):
        if ok[m]:
            sub = m
            while sub:
                sub = (sub - 1) & m
                if not ok[sub]:
                    return False
    return True


def _submasks(mask: int) -> np.ndarray:
    out = np.zeros(1, dtype=np.int64)
    for e in mask_items(mask):
        out = np.concatenate([out, out + (1 << e)])
    return out


def base_size_range(sys: IndependenceSystem) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest base size of every restriction ``R``, indexed by mask.

    ``B`` is a base of ``R`` iff ``B ⊆ R`` is independent and no element of
    ``R \\ B`` extends it, so each independent ``B`` is a base exactly of the
    sets ``B ∪ T`` with ``T`` avoiding ``B`` and its extensions.
    """
    n = sys.n_items
    if n > MAX_VERIFY_ITEMS:
        raise TooLargeToVerify(f"n={n} exceeds the k-verification cap of {MAX_VERIFY_ITEMS}")
    full = (1 << n) - 1
    ind = feasible_table(sys)
    lo = np.full(1 << n, n + 1, dtype=np.int64)
    hi = np.full(1 << n, -1, dtype=np.int64)
    for B in np.flatnonzero(ind).tolist():
        ext = 0
        for e in range(n):
            if not B >> e & 1 and ind[B | 1 << e]:
                ext |= 1 << e
        R = B | _submasks(full & ~(B | ext))
        size = popcount(B)
        np.minimum.at(lo, R, size)
        np.maximum.at(hi, R, size)
    return lo, hi


def verify_k(sys: IndependenceSystem) -> int:
    """Smallest integer k with max-base ≤ k · min-base for every restriction."""
    lo, hi = base_size_range(sys)
    k = 1
    for m in range(len(lo)):
        if hi[m] == 0:
            continue
        if lo[m] == 0:
            raise DegenerateSystem(f"restriction {mask_items(m)} has an empty and a nonempty base")
        k = max(k, math.ceil(hi[m] / lo[m]))
    return k


def constraint_from_dict(data, n_items: int) -> Constraint:
    """Inverse of ``to_dict``; raises ``ValueError``/``KeyError`` on bad input."""
    if not isinstance(data, dict) or len(data) != 1:
        raise ValueError("constraint must be an object with exactly one tag")
    (tag, body), = data.items()
    if tag == "cardinality":
        return Cardinality(int(body), n_items)
    if tag == "partition":
        return PartitionMatroid(body["blocks"], body["limits"], n_items)
    if tag == "intersection":
        members = [constraint_from_dict(m, n_items) for m in body]
        if not all(isinstance(m, IndependenceSystem) for m in members):
            raise ValueError("intersection members must be matroids")
        return MatroidIntersection(members)
    if tag == "explicit":
        return ExplicitSystem(body, n_items)
    if tag == "knapsack":
        kp = Knapsack(body["costs"], body["budget"])
        if kp.n_items != n_items:
            raise ValueError(f"knapsack has {kp.n_items} costs for {n_items} items")
        return kp
    raise ValueError(f"unknown constraint tag {tag!r}")
