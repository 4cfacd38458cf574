"""Exact / Monte Carlo policy evaluation, the optimal adaptive policy oracle,
and checks of the approximation inequalities on concrete instances."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .constraints import Constraint, IndependenceSystem, Knapsack, verify_k
from .errors import NoFeasibleSingleton, RangesOverlap, TooLargeToEnumerate, ValidationError
from .model import EMPTY, EPS, Model, PartialRealization, mask_items
from .policies import (
    Policy,
    SamplingParams,
    SampledGreedyPolicy,
    best_singleton,
    concatenate,
    make_policy,
)

MAX_OPT_ITEMS = 5
MAX_OPT_SUPPORT = 32
MAX_EXACT_RUNS = 2_000_000


@dataclass
class EvalResult:
    expected_utility: float
    mode: str
    trials: int | None = None
    std_error: float | None = None
    branches: int | None = None

    @property
    def value(self) -> float:
        return self.expected_utility


def eval_exact(policy: Policy) -> EvalResult:
    """``Σ_branch Pr[branch] Σ_φ p(φ) f(E(π, φ), φ)`` by full enumeration."""
    model = policy.model
    branches = policy.branches()
    runs = len(branches) * model.prior.size
    if runs > MAX_EXACT_RUNS:
        raise TooLargeToEnumerate(f"{runs} policy runs exceed the exact cap of {MAX_EXACT_RUNS}")
    support = model.prior.support
    probs = model.prior.probs.tolist()
    total = 0.0
    for branch, pb in branches:
        inner = 0.0
        for phi, p in zip(support, probs):
            inner += p * policy.run(phi, branch).utility
        total += pb * inner
    return EvalResult(total, "exact", branches=len(branches))


def eval_mc(policy: Policy, trials: int, seed: int) -> EvalResult:
    """Sample-mean estimate over ``trials`` draws of (realization, branch)."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    model = policy.model
    rng = np.random.default_rng(seed)
    phi_idx = rng.choice(model.prior.size, size=trials, p=model.prior.probs).tolist()
    branches = policy.sample_branches(rng, trials)
    support = model.prior.support
    counts = Counter(zip(branches, phi_idx))
    values = {}
    for key in sorted(counts, key=repr):
        branch, j = key
        values[key] = policy.run(support[j], branch).utility
    # aggregate by distinct outcome so that a constant sample is reproduced exactly
    by_value = Counter()
    for key, c in counts.items():
        by_value[values[key]] += c
    mean = sum(v * (c / trials) for v, c in sorted(by_value.items()))
    if len(by_value) == 1 or trials == 1:
        se = 0.0
    else:
        var = sum(c * (v - mean) ** 2 for v, c in by_value.items()) / (trials - 1)
        se = math.sqrt(var / trials)
    return EvalResult(mean, "monte-carlo", trials=trials, std_error=se)


class OptimalPolicy(Policy):
    """Replays an optimal decision tree keyed by observation."""

    name = "optimal"

    def __init__(self, model: Model, constraint: Constraint, tree: dict):
        super().__init__(model, constraint)
        self.tree = tree

    def next(self, psi, branch):
        return self.tree.get(psi.key)


@dataclass
class OptResult:
    value: float
    tree: dict
    policy: OptimalPolicy

    @property
    def states(self) -> int:
        return len(self.tree)


def optimal_value(model: Model, constraint: Constraint) -> OptResult:
    """Best adaptive policy by value recursion over observations.

    ``V(ψ) = max(E[f(dom ψ)|ψ], max_e Σ_o Pr[Φ(e)=o|ψ] V(ψ ∪ (e,o)))`` over
    feasible extensions; stopping is always allowed.
    """
    n = model.n_items
    if n > MAX_OPT_ITEMS or model.prior.size > MAX_OPT_SUPPORT:
        raise TooLargeToEnumerate(f"optimal oracle caps: n ≤ {MAX_OPT_ITEMS}, support ≤ {MAX_OPT_SUPPORT}; "
                                  f"got n={n}, support={model.prior.size}")
    memo: dict = {}

    def value(psi: PartialRealization) -> float:
        hit = memo.get(psi.key)
        if hit is not None:
            return hit[0]
        chosen = psi.mask
        best_val = model.expected_utility(chosen, psi)
        best_act = None
        for e in range(n):
            if chosen >> e & 1 or not constraint.is_feasible(chosen | 1 << e):
                continue
            v = 0.0
            for o, p in model.state_distribution(e, psi):
                v += p * value(psi.extend(e, o))
            if v > best_val + EPS:
                best_val, best_act = v, e
        memo[psi.key] = (best_val, best_act)
        return best_val

    v0 = value(EMPTY)
    tree = {key: act for key, (_, act) in memo.items()}
    return OptResult(v0, tree, OptimalPolicy(model, constraint, tree))


def best_feasible_subset(model: Model, constraint: Constraint) -> tuple[float, tuple[int, ...]]:
    """Best non-adaptive feasible set by exhaustive search; equals the adaptive
    optimum when the prior is deterministic."""
    best, arg = -math.inf, ()
    for mask in range(1 << model.n_items):
        if constraint.is_feasible(mask):
            v = model.expected_utility(mask)
            if v > best:
                best, arg = v, tuple(mask_items(mask))
    return best, arg


def policy_range(policy: Policy) -> frozenset[int]:
    """Every item the policy selects under some branch and supported realization."""
    out = set()
    for branch, _ in policy.branches():
        for phi in policy.model.prior.support:
            out |= policy.run(phi, branch).items
    return frozenset(out)


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    terms: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - EPS

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def verify_lemma1(pi_a: Policy, pi_b: Policy, pi_c: Policy) -> InequalityReport:
    """``f_avg(a@b) + f_avg(a@c) >= f_avg(a)`` for ``b``, ``c`` with disjoint ranges."""
    overlap = policy_range(pi_b) & policy_range(pi_c)
    if overlap:
        raise RangesOverlap(f"ranges share items {sorted(overlap)}")
    va = eval_exact(pi_a).value
    vab = eval_exact(concatenate(pi_a, pi_b)).value
    vac = eval_exact(concatenate(pi_a, pi_c)).value
    return InequalityReport("lemma1", vab + vac, va, {"a": va, "a@b": vab, "a@c": vac})


def _singleton_value(model: Model, constraint: Constraint) -> float:
    try:
        return model.singleton_value(best_singleton(model, constraint))
    except NoFeasibleSingleton:
        return 0.0


def verify_lemma2(sigma: float, model: Model, kp: Knapsack, opt: OptResult | None = None) -> InequalityReport:
    """``(2 + 1/σ) f_avg(π) + f(e*) >= f_avg(π_opt @ π)`` for density greedy on a σ-sample."""
    opt = opt or optimal_value(model, kp)
    pi = SampledGreedyPolicy(model, kp, sigma, density=True)
    v = eval_exact(pi).value
    fe = _singleton_value(model, kp)
    v_cat = eval_exact(concatenate(opt.policy, pi)).value
    return InequalityReport("lemma2", (2 + 1 / sigma) * v + fe, v_cat,
                            {"sigma": sigma, "f_avg": v, "f_estar": fe, "opt@pi": v_cat, "opt": opt.value})


def verify_lemma3(sigma: float, model: Model, sys: IndependenceSystem, k: int | None = None,
                  opt: OptResult | None = None) -> InequalityReport:
    """``(k + 1/σ) f_avg(π) >= f_avg(π_opt @ π)`` for greedy on a σ-sample."""
    k = verify_k(sys) if k is None else k
    opt = opt or optimal_value(model, sys)
    pi = SampledGreedyPolicy(model, sys, sigma, density=False)
    v = eval_exact(pi).value
    v_cat = eval_exact(concatenate(opt.policy, pi)).value
    return InequalityReport("lemma3", (k + 1 / sigma) * v, v_cat,
                            {"sigma": sigma, "k": k, "f_avg": v, "opt@pi": v_cat, "opt": opt.value})


def proven_bound(kind: str, params: SamplingParams | None = None, k: int | None = None) -> float | None:
    """Guaranteed fraction of OPT for a policy kind, or ``None`` if there is none.

    For non-default δ's this is the weakest per-candidate share of the
    combined inequality, which reduces to 1/10 and 1/(2k+4) at the defaults.
    """
    if kind == "sad":
        p = params or SamplingParams.knapsack()
        a, b = 2 + 1 / p.delta0, 2 + 1 / (1 - p.delta0)
        return min(p.delta1 / 2, p.delta2 / a, (1 - p.delta1 - p.delta2) / b)
    if kind == "sad-simplified":
        d1 = params.delta1 if params else 0.2
        # candidate 2 is the δ0 = 1/2 sample, which stands for both greedy halves
        return min(d1 / 2, (1 - d1) / 8)
    if kind == "sag":
        p = params or SamplingParams.ksystem()
        return min(p.delta1 / (k + 1 / p.delta0), (1 - p.delta1) / (k + 1 / (1 - p.delta0)))
    return None


@dataclass
class RatioReport:
    instance_id: str
    policy: str
    value: float
    opt: float
    ratio: float
    bound: float | None
    k: int | None = None

    @property
    def passed(self) -> bool | None:
        if self.bound is None:
            return None
        return self.value >= self.bound * self.opt - EPS

    def as_dict(self) -> dict:
        return {
            "instance-id": self.instance_id,
            "policy": self.policy,
            "value": self.value,
            "opt": self.opt,
            "ratio": self.ratio,
            "bound": self.bound,
            "pass": self.passed,
        }


def ratio_report(instance, kind: str, params: SamplingParams | None = None) -> RatioReport:
    """Exact policy value against the optimal adaptive value, with the proven bound."""
    model = instance.model
    constraint = instance.constraint
    policy = make_policy(kind, model, constraint, params)
    value = eval_exact(policy).value
    opt = optimal_value(model, constraint).value
    k = None
    if isinstance(constraint, IndependenceSystem):
        k = verify_k(constraint)
    ratio = 1.0 if abs(opt) <= EPS else value / opt
    bound = proven_bound(kind, params, k)
    return RatioReport(instance.id, kind, value, opt, ratio, bound, k)
