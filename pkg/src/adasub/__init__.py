"""Non-monotone adaptive submodular maximization under knapsack and k-system constraints."""

from .constraints import (
    Cardinality,
    ExplicitSystem,
    IndependenceSystem,
    Knapsack,
    MatroidIntersection,
    PartitionMatroid,
    verify_k,
)
from .evaluation import eval_exact, eval_mc, optimal_value, ratio_report
from .generator import Profile, generate_instance
from .instance import Instance, load_instance, parse_instance
from .model import EMPTY, Model, PartialRealization, Prior
from .policies import (
    SadPolicy,
    SagPolicy,
    SamplingParams,
    SimplifiedSadPolicy,
    concatenate,
    make_policy,
)
from .utilities import CoverageUtility, ModularUtility, TableUtility

__version__ = "0.1.0"
