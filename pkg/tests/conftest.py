import itertools
import math

import pytest

from adasub.constraints import Knapsack
from adasub.model import Prior
from adasub.utilities import TableUtility


# ---------------------------------------------------------------------------
# Reference oracles. Plain loops over the support, no Model and no caching,
# so they stay independent of the code paths under test.
# ---------------------------------------------------------------------------


def brute_weights(prior, psi):
    pairs = list(psi)
    rows = []
    for phi, p in zip(prior.support, prior.probs.tolist()):
        if all(phi[e] == o for e, o in pairs):
            rows.append((phi, p))
    mass = sum(p for _, p in rows)
    return [(phi, p / mass) for phi, p in rows]


def brute_expected(f, prior, S, psi=()):
    return sum(p * f(S, phi) for phi, p in brute_weights(prior, psi))


def brute_marginal(f, prior, e, psi=()):
    dom = {x for x, _ in psi}
    if e in dom:
        return 0.0
    return sum(p * (f(dom | {e}, phi) - f(dom, phi)) for phi, p in brute_weights(prior, psi))


def brute_singleton(f, prior, e):
    return sum(p * f({e}, phi) for phi, p in zip(prior.support, prior.probs.tolist()))


def reference_greedy(f, prior, constraint, pool, phi, density):
    """Line-by-line transcription of the candidate greedy loop."""
    eps = 1e-9
    psi = []
    chosen = set()
    pool = set(pool)
    cands = [e for e in sorted(pool) if brute_singleton(f, prior, e) > eps and constraint.is_feasible({e})]
    while cands:
        def score(e):
            d = brute_marginal(f, prior, e, psi)
            return d / constraint.costs[e] if density else d

        best = cands[0]
        for e in cands[1:]:
            if score(e) > score(best) + eps:
                best = e
        psi.append((best, phi[best]))
        chosen.add(best)
        cands = [e for e in sorted(pool - chosen)
                 if constraint.is_feasible(chosen | {e}) and brute_marginal(f, prior, e, psi) > eps]
    return psi


def reference_sad_value(f, prior, kp, d0=0.5, d1=0.2, d2=0.4):
    """Exact value of the three-candidate knapsack mixture via the reference loop."""
    n = prior.n_items
    feas = [e for e in range(n) if kp.is_feasible({e})]
    estar = None
    for e in feas:
        if estar is None or brute_singleton(f, prior, e) > brute_singleton(f, prior, estar) + 1e-9:
            estar = e
    v1 = brute_singleton(f, prior, estar) if estar is not None else brute_expected(f, prior, set())
    v2 = v3 = 0.0
    for bits in itertools.product([0, 1], repeat=n):
        w = math.prod(d0 if b else 1 - d0 for b in bits)
        S1 = {e for e in range(n) if bits[e]}
        S2 = set(range(n)) - S1
        for phi, p in zip(prior.support, prior.probs.tolist()):
            t2 = reference_greedy(f, prior, kp, S1, phi, True)
            t3 = reference_greedy(f, prior, kp, S2, phi, True)
            v2 += w * p * f({e for e, _ in t2}, phi)
            v3 += w * p * f({e for e, _ in t3}, phi)
    return d1 * v1 + d2 * v2 + (1 - d1 - d2) * v3


# ---------------------------------------------------------------------------
# Hand-built fixtures
# ---------------------------------------------------------------------------


def table_from(n, s, fn, prior):
    return TableUtility.from_function(n, s, lambda m, phi: fn({e for e in range(n) if m >> e & 1}, phi),
                                      prior.support)


@pytest.fixture
def supermodular_pair():
    """Two items, deterministic prior, f({0,1}) = 1 and 0 otherwise."""
    prior = Prior.deterministic((0, 0), 1)
    f = table_from(2, 1, lambda S, phi: 1.0 if S == {0, 1} else 0.0, prior)
    return f, prior


@pytest.fixture
def toy_knapsack():
    """Three items with a pairwise penalty; independent fair coins for states."""
    prior = Prior.independent([[0.5, 0.5], [0.25, 0.75], [0.5, 0.5]])
    w = [(0.5, 1.0), (0.25, 0.75), (0.5, 0.5)]

    def fn(S, phi):
        base = 0.25 + sum(w[e][phi[e]] for e in S)
        if {0, 1} <= S:
            base -= 0.5
        if {1, 2} <= S and phi[1] == 1:
            base -= 0.5
        return max(base, 0.0)

    f = table_from(3, 2, fn, prior)
    kp = Knapsack([1.0, 0.5, 0.75], 1.5)
    return f, prior, kp
