"""Instance files: JSON documents bundling prior, utility and constraint.

Example::

    {
      "id": "toy",
      "n": 2, "states": 2,
      "costs": [1.0, 1.0], "budget": 1.5,
      "constraint": {"knapsack": {"costs": [1.0, 1.0], "budget": 1.5}},
      "prior": {"independent": [[0.5, 0.5], [0.25, 0.75]]},
      "utility": {"table": {"0": [0, 1, 1, 1.5], "1": [...], ...}}
    }

Table rows are keyed by the mixed-radix realization index (item 0 is the
least significant digit) and list one value per subset bitmask.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .constraints import Constraint, Knapsack, constraint_from_dict
from .errors import AdasubError, ParseError
from .model import Model, Prior, UtilityFunction
from .utilities import utility_from_dict


@dataclass
class Instance:
    prior: Prior
    utility: UtilityFunction
    constraint: Constraint
    id: str = "instance"
    certified: list[str] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.prior.n_items

    @property
    def n_states(self) -> int:
        return self.prior.n_states

    @cached_property
    def model(self) -> Model:
        return Model(self.utility, self.prior)

    def to_dict(self) -> dict:
        out = {"id": self.id, "n": self.n, "states": self.n_states}
        if isinstance(self.constraint, Knapsack):
            out["costs"] = list(self.constraint.costs)
            out["budget"] = self.constraint.budget
        out["constraint"] = self.constraint.to_dict()
        out["prior"] = prior_to_dict(self.prior)
        out["utility"] = self.utility.to_dict()
        if self.meta:
            out["meta"] = self.meta
        if self.certified is not None:
            out["certified"] = list(self.certified)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def prior_to_dict(prior: Prior) -> dict:
    if prior.marginals is not None:
        return {"independent": [list(row) for row in prior.marginals]}
    return {"support": [{"states": list(s), "p": float(p)} for s, p in zip(prior.support, prior.probs.tolist())]}


def prior_from_dict(data, n: int, s: int) -> Prior:
    if not isinstance(data, dict) or len(data) != 1:
        raise ValueError("prior must be an object with exactly one of 'support' or 'independent'")
    if "independent" in data:
        prior = Prior.independent(data["independent"])
    elif "support" in data:
        prior = Prior.explicit([(row["states"], row["p"]) for row in data["support"]], s)
    else:
        raise ValueError(f"unknown prior form {next(iter(data))!r}")
    if prior.n_items != n or prior.n_states != s:
        raise ValueError(f"prior covers {prior.n_items} items x {prior.n_states} states, expected {n} x {s}")
    return prior


def _field(doc: dict, name: str, parse):
    if name not in doc:
        raise ParseError("missing required field", field=name)
    try:
        return parse(doc[name])
    except ParseError:
        raise
    except (AdasubError, KeyError, ValueError, TypeError, IndexError) as exc:
        raise ParseError(f"{type(exc).__name__}: {exc}", field=name) from exc


def parse_instance(text: str, default_id: str = "instance") -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    n = _field(doc, "n", _nonneg_int)
    s = _field(doc, "states", _positive_int)
    prior = _field(doc, "prior", lambda d: prior_from_dict(d, n, s))
    utility = _field(doc, "utility", lambda d: utility_from_dict(d, n, s))
    if "constraint" in doc:
        constraint = _field(doc, "constraint", lambda d: constraint_from_dict(d, n))
    elif "budget" in doc:
        constraint = _field(doc, "budget", lambda b: Knapsack(doc["costs"], b))
    else:
        raise ParseError("need a 'constraint' or 'costs' + 'budget'", field="constraint")
    if n and not isinstance(constraint, Knapsack) and "costs" in doc:
        _field(doc, "costs", lambda c: Knapsack(c, 1.0))
    inst = Instance(prior, utility, constraint, id=str(doc.get("id", default_id)),
                    certified=doc.get("certified"), meta=doc.get("meta", {}))
    # evaluate the table on the support now so that missing entries surface as parse errors
    _field({"utility": None}, "utility", lambda _: inst.model)
    return inst


def _nonneg_int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < 0:
        raise ValueError(f"expected a nonnegative integer, got {x!r}")
    return x


def _positive_int(x) -> int:
    if _nonneg_int(x) < 1:
        raise ValueError(f"expected a positive integer, got {x!r}")
    return x


def load_instance(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_instance(text, default_id=path.stem)
