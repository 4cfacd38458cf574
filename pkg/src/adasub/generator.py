"""Rejection sampling of certified adaptive submodular instances.

Each attempt draws a prior and a value table on the 1/16 grid in [0, 1] from
a mixture of proposals (uniform tables, concave-of-modular tables, and
perturbed concave tables), then keeps it only if the exhaustive checkers
agree with the requested profile. The stream of draws depends only on the
seed, so the same seed always yields the same instance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .constraints import Cardinality, Knapsack, MatroidIntersection, PartitionMatroid, verify_k
from .errors import GenerationExhausted, ValidationError
from .instance import Instance
from .model import Prior, mask_items, realization_from_index, realization_index
from .utilities import (
    ObservationTable,
    TableUtility,
    adaptive_submodular_fast,
    certify,
    check_nonmonotone,
    check_pointwise_submodular,
)

GRID = 16
MAX_GEN_ITEMS = 5
MAX_GEN_STATES = 3
CONSTRAINT_KINDS = ("knapsack", "cardinality", "partition", "intersection")


@dataclass(frozen=True)
class Profile:
    """Requested properties; ``None`` means either outcome is acceptable."""

    nonmonotone: bool | None = True
    pointwise: bool | None = None


def _random_constraint(rng: np.random.Generator, n: int, kind: str):
    if kind == "knapsack":
        q = rng.integers(1, 5, size=n)
        lo, hi = int(q.min()), max(int(q.min()), int(q.sum()) * 3 // 4)
        return Knapsack((q / 4).tolist(), int(rng.integers(lo, hi + 1)) / 4)
    if kind == "cardinality":
        return Cardinality(int(rng.integers(1, n + 1)), n)
    if kind == "partition":
        return _random_partition(rng, n)
    if kind == "intersection":
        # retry until the intersection is a genuine 2-system when n allows one
        for _ in range(1000):
            sys = MatroidIntersection([_random_partition(rng, n), _random_partition(rng, n)])
            if n < 3 or verify_k(sys) == 2:
                return sys
        raise GenerationExhausted("could not draw a matroid intersection with k = 2")
    raise ValidationError(f"unknown constraint kind {kind!r}; choose from {', '.join(CONSTRAINT_KINDS)}")


def _random_partition(rng, n) -> PartitionMatroid:
    n_blocks = int(rng.integers(1, n + 1))
    label = rng.integers(0, n_blocks, size=n)
    blocks = [[e for e in range(n) if label[e] == b] for b in range(n_blocks)]
    blocks = [b for b in blocks if b]
    limits = [int(rng.integers(1, len(b) + 1)) for b in blocks]
    return PartitionMatroid(blocks, limits, n)


def _random_prior(rng, n: int, s: int) -> Prior:
    if rng.random() < 0.5:
        marg = []
        for _ in range(n):
            w = rng.integers(1, 4, size=s).astype(float)
            marg.append((w / w.sum()).tolist())
        return Prior.independent(marg)
    total = s**n
    size = int(rng.integers(1, min(total, 32) + 1))
    idx = np.sort(rng.choice(total, size=size, replace=False))
    w = rng.integers(1, 5, size=size).astype(float)
    w /= w.sum()
    return Prior.explicit([(realization_from_index(int(i), n, s), p) for i, p in zip(idx, w)], s)


def _concave_values(rng, n, s, R) -> np.ndarray:
    weights = rng.integers(0, 4, size=(n, s))
    top = int(weights.max(axis=1).sum())
    h = np.empty(top + 1)
    h[0] = rng.integers(0, 5)
    step = int(rng.integers(1, 7))
    for x in range(1, top + 1):
        h[x] = h[x - 1] + step
        step -= int(rng.integers(0, 3))
    h = np.clip(h, 0, GRID)
    out = np.empty((1 << n, len(R)))
    for mask in range(1 << n):
        items = mask_items(mask)
        x = weights[items, R[:, items]].sum(axis=1) if items else np.zeros(len(R), dtype=int)
        out[mask] = h[x]
    return out


def _propose(rng, n, s, R, profile: Profile) -> np.ndarray:
    """Integer table in ``0..GRID`` of shape ``(2**n, len(R))``."""
    u = rng.random()
    p_uniform = 0.3 if profile.pointwise is False else 0.2
    p_perturb = 0.7 if profile.pointwise is False else 0.2
    if u < p_uniform:
        return rng.integers(0, GRID + 1, size=(1 << n, len(R))).astype(float)
    vals = _concave_values(rng, n, s, R)
    if u < p_uniform + p_perturb:
        k = int(rng.integers(1, 4))
        rows = rng.integers(0, 1 << n, size=k)
        cols = rng.integers(0, len(R), size=k)
        vals[rows, cols] += rng.choice([-1.0, 1.0], size=k)
        vals = np.clip(vals, 0, GRID)
    return vals


def _accept(vals: np.ndarray, prior: Prior, profile: Profile) -> bool:
    table = ObservationTable(None, prior, vals)
    if not adaptive_submodular_fast(table):
        return False
    if profile.nonmonotone is not None:
        if (check_nonmonotone(None, prior, table) is not None) != profile.nonmonotone:
            return False
    if profile.pointwise is not None:
        if (check_pointwise_submodular(None, prior, vals) is None) != profile.pointwise:
            return False
    return True


def generate_instance(seed: int, n: int, s: int, profile: Profile | None = None,
                      constraint: str = "knapsack", max_attempts: int = 10**6) -> Instance:
    """Draw a certified instance; raises :class:`GenerationExhausted` at the cap."""
    profile = profile or Profile()
    if not 1 <= n <= MAX_GEN_ITEMS or not 1 <= s <= MAX_GEN_STATES:
        raise ValidationError(f"generator supports 1 ≤ n ≤ {MAX_GEN_ITEMS} and 1 ≤ s ≤ {MAX_GEN_STATES}")
    rng = np.random.default_rng(seed)
    cons = _random_constraint(rng, n, constraint)
    for attempt in range(1, max_attempts + 1):
        prior = _random_prior(rng, n, s)
        vals = _propose(rng, n, s, prior.realizations, profile) / GRID
        if not _accept(vals, prior, profile):
            continue
        values = {}
        for j, phi in enumerate(prior.support):
            r = realization_index(phi, s)
            for mask in range(1 << n):
                values[mask, r] = float(vals[mask, j])
        f = TableUtility(n, s, values)
        report = certify(f, prior)
        if report.adaptive is not None or report.nonnegative is not None:
            continue  # fast filter and full enumeration disagree; never expected
        meta = {"seed": int(seed), "attempts": attempt, "profile": asdict(profile), "generator": "adasub"}
        inst_id = f"gen-{constraint}-n{n}-s{s}-seed{seed}"
        return Instance(prior, f, cons, id=inst_id, certified=report.passed(), meta=meta)
    raise GenerationExhausted(f"no instance matching {profile} after {max_attempts} attempts (seed={seed})")
