"""Approximate huge discrete sums with multi-bin hashing and a MAX-oracle.

The library estimates S(w) = sum_sigma w(sigma) over q-ary domains,
permutation domains (matrix permanents) and distribution spaces (total
variation distance) to a constant factor (q/r)^2, driving an exact
enumeration oracle at desk scale and exporting oracle queries for external
solvers beyond it.
"""

from .field import FieldSpec, find_irreducible, vector_less
from .hashing import (
    MultiBinHash,
    HashSampler,
    accepts,
    evaluate_hash,
    pairwise_independence_audit,
)
from .oracle import (
    ExhaustiveOracle,
    MultiBin,
    MultiBinPermutation,
    OracleAnswer,
    OracleQuery,
    OracleRefusal,
    Unconstrained,
    exhaustive_max,
)
from .ilp import ExportUnsupported, export_ilp, parse_ilp, solve_parsed
from .estimator import (
    EstimateReport,
    EstimatorConfig,
    estimate_sum,
    lower_median,
    quantile_bracket,
    tail_quantiles,
)
from .generator import estimate_sum_unconstrained, lex_bound, sample_basis
from .permanent import (
    PermanentInstance,
    estimate_permanent,
    exact_permanent,
    permutation_weight,
    smallest_prime_power_above,
)
from .weights import (
    MarkovChainPair,
    PottsModel,
    ProductDistributionPair,
    TableWeight,
    exact_partition,
    exact_sum,
    exact_tv,
    hellinger_bracket,
    load_model,
    random_regular_graph,
    tv_weight,
)

__version__ = "0.1.0"
