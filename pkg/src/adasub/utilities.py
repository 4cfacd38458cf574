"""Utility families and exhaustive submodularity / monotonicity checkers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooLargeToVerify, ValidationError
from .model import (
    EPS,
    Model,
    PartialRealization,
    Prior,
    UtilityFunction,
    mask_items,
    realization_index,
)

MAX_CHECK_ITEMS = 6
MAX_CHECK_STATES = 3


class TableUtility(UtilityFunction):
    """Utility given by an explicit table ``(subset mask, realization index) -> value``.

    Only realizations that will actually be evaluated need entries; looking up
    a missing entry raises ``KeyError``.
    """

    def __init__(self, n_items: int, n_states: int, values: dict[tuple[int, int], float]):
        self.n_items = int(n_items)
        self.n_states = int(n_states)
        self.values = {(int(m), int(r)): float(v) for (m, r), v in values.items()}
        limit = 1 << self.n_items
        for m, r in self.values:
            if not 0 <= m < limit or not 0 <= r < self.n_states**self.n_items:
                raise ValidationError(f"table key {(m, r)} out of range")

    @classmethod
    def from_function(cls, n_items, n_states, fn, realizations):
        """Tabulate ``fn(mask, phi)`` on every subset and the given realizations."""
        values = {}
        for phi in realizations:
            phi = tuple(int(o) for o in phi)
            r = realization_index(phi, n_states)
            for m in range(1 << n_items):
                values[m, r] = float(fn(m, phi))
        return cls(n_items, n_states, values)

    def value(self, mask, phi):
        return self.values[mask, realization_index(phi, self.n_states)]

    def realization_indices(self) -> list[int]:
        return sorted({r for _, r in self.values})

    def to_dict(self) -> dict:
        rows = {}
        for r in self.realization_indices():
            rows[str(r)] = [self.values[m, r] for m in range(1 << self.n_items)]
        return {"table": rows}


class ModularUtility(UtilityFunction):
    """``f(S, phi) = offset + sum_{e in S} weights[e][phi(e)]``."""

    def __init__(self, weights, offset: float = 0.0):
        self.weights = tuple(tuple(float(w) for w in row) for row in weights)
        self.offset = float(offset)
        self.n_items = len(self.weights)
        self.n_states = len(self.weights[0]) if self.weights else 1

    def value(self, mask, phi):
        return self.offset + sum(self.weights[e][phi[e]] for e in mask_items(mask))

    def to_dict(self):
        return {"modular": {"weights": [list(r) for r in self.weights], "offset": self.offset}}


class CoverageUtility(UtilityFunction):
    """Weighted coverage: item ``e`` in state ``o`` covers ``covers[e][o]``."""

    def __init__(self, weights, covers):
        self.weights = tuple(float(w) for w in weights)
        if any(w < 0 for w in self.weights):
            raise ValidationError("coverage weights must be nonnegative")
        self.covers = tuple(tuple(frozenset(int(u) for u in c) for c in row) for row in covers)
        self.n_items = len(self.covers)
        self.n_states = len(self.covers[0]) if self.covers else 1

    def value(self, mask, phi):
        covered = set()
        for e in mask_items(mask):
            covered |= self.covers[e][phi[e]]
        return sum(self.weights[u] for u in covered)

    def to_dict(self):
        return {
            "coverage": {
                "weights": list(self.weights),
                "covers": [[sorted(c) for c in row] for row in self.covers],
            }
        }


def utility_from_dict(data, n_items: int, n_states: int) -> UtilityFunction:
    if not isinstance(data, dict) or len(data) != 1:
        raise ValueError("utility must be an object with exactly one tag")
    (tag, body), = data.items()
    if tag == "table":
        values = {}
        for r, row in body.items():
            if len(row) != 1 << n_items:
                raise ValueError(f"table row {r} needs {1 << n_items} entries")
            for m, v in enumerate(row):
                values[m, int(r)] = float(v)
        return TableUtility(n_items, n_states, values)
    if tag == "modular":
        f = ModularUtility(body["weights"], body.get("offset", 0.0))
    elif tag == "coverage":
        f = CoverageUtility(body["weights"], body["covers"])
    else:
        raise ValueError(f"unknown utility tag {tag!r}")
    if f.n_items != n_items or f.n_states != n_states:
        raise ValueError(f"{tag} utility has shape {f.n_items}x{f.n_states}, expected {n_items}x{n_states}")
    return f


@dataclass
class Violation:
    """Concrete witness that a property fails.

    ``kind`` is one of ``adaptive``, ``pointwise``, ``nonneg`` or
    ``negative-marginal``. For ``adaptive`` the inequality
    ``Δ(item|psi) >= Δ(item|psi2)`` fails with ``lhs`` and ``rhs`` its sides.
    """

    kind: str
    item: int | None
    lhs: float
    rhs: float
    psi: PartialRealization | None = None
    psi2: PartialRealization | None = None
    sets: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    phi: tuple[int, ...] | None = None

    def describe(self) -> str:
        if self.kind == "adaptive":
            return (f"Δ({self.item}|{dict(self.psi.key)}) = {self.lhs:.6g} < "
                    f"Δ({self.item}|{dict(self.psi2.key)}) = {self.rhs:.6g}")
        if self.kind == "pointwise":
            E1, E2 = self.sets
            return (f"phi={list(self.phi)}: gain of {self.item} on {list(E1)} = {self.lhs:.6g} < "
                    f"gain on {list(E2)} = {self.rhs:.6g}")
        if self.kind == "nonneg":
            return f"f({list(self.sets[0])}, {list(self.phi)}) = {self.lhs:.6g} < 0"
        return f"Δ({self.item}|{dict(self.psi.key)}) = {self.lhs:.6g} < 0"


def _check_caps(n: int, s: int):
    if n > MAX_CHECK_ITEMS or s > MAX_CHECK_STATES:
        raise TooLargeToVerify(f"checkers enumerate at most {MAX_CHECK_ITEMS} items and "
                               f"{MAX_CHECK_STATES} states, got {n} and {s}")


class ObservationTable:
    """Every positive-probability partial realization with all its marginals.

    ``delta[i, e]`` is ``Δ(e | observations[i])`` (NaN when ``e`` was observed).
    Computed in one vectorized pass, independently of :class:`Model`'s lazy
    per-observation oracle.
    """

    def __init__(self, f: UtilityFunction, prior: Prior, values: np.ndarray | None = None):
        n, s = prior.n_items, prior.n_states
        _check_caps(n, s)
        R, p = prior.realizations, prior.probs
        if values is None:
            values = f.matrix(R)
        self.values = values
        observations, masks, weights = [], [], []
        for D in range(1 << n):
            items = mask_items(D)
            if items:
                proj = R[:, items]
                rows = np.unique(proj, axis=0)
            else:
                proj = np.zeros((len(R), 0), dtype=R.dtype)
                rows = np.zeros((1, 0), dtype=R.dtype)
            for row in rows:
                cons = np.all(proj == row, axis=1)
                w = np.where(cons, p, 0.0)
                observations.append(PartialRealization(tuple(zip(items, row.tolist()))))
                masks.append(D)
                weights.append(w / w.sum())
        self.observations = observations
        self.masks = np.array(masks, dtype=np.int64)
        self.weights = np.array(weights)
        self.index = {psi.key: i for i, psi in enumerate(observations)}
        bits = 1 << np.arange(n, dtype=np.int64)
        ext = self.masks[:, None] | bits[None, :]
        diffs = values[ext] - values[self.masks][:, None, :]
        delta = np.einsum("pnm,pm->pn", diffs, self.weights)
        observed = (self.masks[:, None] & bits[None, :]) != 0
        delta[observed] = np.nan
        self.delta = delta
        self.n_items = n

    def parents(self) -> np.ndarray:
        """``parents[i, x]`` is the row of observation ``i`` with item ``x`` dropped, or -1."""
        out = np.full((len(self.observations), self.n_items), -1, dtype=np.int64)
        for i, psi in enumerate(self.observations):
            for x in psi.domain:
                out[i, x] = self.index[tuple(pair for pair in psi.key if pair[0] != x)]
        return out


def check_adaptive_submodular(f: UtilityFunction, prior: Prior, table: ObservationTable | None = None):
    """Return ``None`` if ``Δ(e|ψ) >= Δ(e|ψ') - ε`` for all nested positive-probability
    observations ``ψ ⊆ ψ'`` and ``e ∉ dom(ψ')``, else the first :class:`Violation`."""
    table = table or ObservationTable(f, prior)
    delta = table.delta
    for j, psi2 in enumerate(table.observations):
        free = ~np.isnan(delta[j])
        if not free.any():
            continue
        pairs = psi2.key
        # every subrealization: choose a subset of psi2's pairs
        for sub in range(1 << len(pairs)):
            if sub == (1 << len(pairs)) - 1:
                continue
            key = tuple(pr for b, pr in enumerate(pairs) if sub >> b & 1)
            i = table.index[key]
            bad = free & (delta[i] < delta[j] - EPS)
            if bad.any():
                e = int(np.flatnonzero(bad)[0])
                return Violation("adaptive", e, float(delta[i, e]), float(delta[j, e]),
                                 psi=table.observations[i], psi2=psi2)
    return None


def adaptive_submodular_fast(table: ObservationTable, parents: np.ndarray | None = None) -> bool:
    """Single-step form of the adaptive check (equivalent by transitivity)."""
    if parents is None:
        parents = table.parents()
    delta = table.delta
    for x in range(table.n_items):
        has = parents[:, x] >= 0
        if not has.any():
            continue
        child = delta[has]
        parent = delta[parents[has, x]]
        with np.errstate(invalid="ignore"):
            if np.any(parent < child - EPS):
                return False
    return True


def _marginal_cube(values: np.ndarray, n: int) -> np.ndarray:
    bits = 1 << np.arange(n, dtype=np.int64)
    masks = np.arange(1 << n, dtype=np.int64)
    return values[masks[:, None] | bits[None, :]] - values[masks][:, None, :]


def check_pointwise_submodular(f: UtilityFunction, prior: Prior, values: np.ndarray | None = None):
    """Return ``None`` if ``f(·, φ)`` is submodular for every supported ``φ``."""
    n, s = prior.n_items, prior.n_states
    _check_caps(n, s)
    if values is None:
        values = f.matrix(prior.realizations)
    gains = _marginal_cube(values, n)
    for E2 in range(1 << n):
        free = np.array([not E2 >> e & 1 for e in range(n)], dtype=bool)
        if not free.any():
            continue
        E1 = E2
        while True:
            E1 = (E1 - 1) & E2
            bad = (gains[E1] < gains[E2] - EPS) & free[:, None]
            if bad.any():
                e, j = (int(x) for x in np.argwhere(bad)[0])
                return Violation("pointwise", e, float(gains[E1, e, j]), float(gains[E2, e, j]),
                                 sets=(tuple(mask_items(E1)), tuple(mask_items(E2))),
                                 phi=prior.support[j])
            if E1 == 0:
                break
    return None


def check_nonnegative(f: UtilityFunction, prior: Prior, values: np.ndarray | None = None):
    if values is None:
        values = f.matrix(prior.realizations)
    bad = values < -EPS
    if bad.any():
        m, j = (int(x) for x in np.argwhere(bad)[0])
        return Violation("nonneg", None, float(values[m, j]), 0.0,
                         sets=(tuple(mask_items(m)), ()), phi=prior.support[j])
    return None


def check_nonmonotone(f: UtilityFunction, prior: Prior, table: ObservationTable | None = None):
    """Return a ``negative-marginal`` witness ``(ψ, e)`` with ``Δ(e|ψ) < -ε``, or
    ``None`` when the function is adaptive monotone."""
    table = table or ObservationTable(f, prior)
    with np.errstate(invalid="ignore"):
        bad = table.delta < -EPS
    if bad.any():
        i, e = (int(x) for x in np.argwhere(bad)[0])
        return Violation("negative-marginal", e, float(table.delta[i, e]), 0.0, psi=table.observations[i])
    return None


@dataclass
class CertificationReport:
    nonnegative: Violation | None = None
    adaptive: Violation | None = None
    pointwise: Violation | None = None
    negative_marginal: Violation | None = None
    extra: dict = field(default_factory=dict)

    @property
    def monotone(self) -> bool:
        return self.negative_marginal is None

    def passed(self) -> list[str]:
        out = []
        if self.nonnegative is None:
            out.append("nonnegative")
        if self.adaptive is None:
            out.append("adaptive-submodular")
        if self.pointwise is None:
            out.append("pointwise-submodular")
        out.append("monotone" if self.monotone else "non-monotone")
        return out


def certify(f: UtilityFunction, prior: Prior) -> CertificationReport:
    """Run every checker once, sharing the enumeration."""
    values = f.matrix(prior.realizations)
    table = ObservationTable(f, prior, values)
    return CertificationReport(
        nonnegative=check_nonnegative(f, prior, values),
        adaptive=check_adaptive_submodular(f, prior, table),
        pointwise=check_pointwise_submodular(f, prior, values),
        negative_marginal=check_nonmonotone(f, prior, table),
    )


def marginal_via_model(f: UtilityFunction, prior: Prior, e: int, psi) -> float:
    """``Δ(e|ψ)`` as a difference of two conditional expectations."""
    m = Model(f, prior)
    psi = PartialRealization.coerce(psi)
    return m.expected_utility(psi.mask | 1 << e, psi) - m.expected_utility(psi.mask, psi)
