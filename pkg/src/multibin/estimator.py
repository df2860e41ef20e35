"""Multi-bin estimator for S(w) = sum over GF(q)^n of w, driven by a MAX-oracle.

One unconstrained oracle call pins the maximum M_0; for every level
i = 1..n' the oracle maximizes w over the acceptance region of a fresh random
hash with i rows, ell times, and the lower median of those values estimates
the tail quantile beta_i = w(sigma_{floor(t^i)}) with t = q/r.  The geometric
combination

    M_0 + (t - 1) * sum_{i=0}^{n'-1} M_{i+1} * t^i

is then, with probability at least 1 - delta, within a factor t^2 of the true
sum when the oracle is exact.

Every oracle call draws its randomness from a counter-based stream keyed by
(seed, level, repetition), so any single call is reproducible in isolation
and results do not depend on worker scheduling.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction

import numpy as np

from .field import FieldSpec, factor_prime_power
from .hashing import sample_hash
from .oracle import (
    MultiBin,
    OracleAnswer,
    OracleQuery,
    STATUS_EMPTY,
    STATUS_EXACT,
    STATUS_TIMEOUT,
    Unconstrained,
)

_STATUS_CHAR = {STATUS_EXACT: "e", STATUS_EMPTY: "z", STATUS_TIMEOUT: "t"}

# purpose tags for the keyed RNG streams
STREAM_HASH = 1
STREAM_BASIS = 2
STREAM_CONCENTRATION = 3


def stream_rng(seed: int, purpose: int, i: int, k: int) -> np.random.Generator:
    """Counter-based generator for one oracle call, keyed by (seed, purpose, i, k)."""
    if not (0 <= i < 1 << 24 and 0 <= k < 1 << 24):
        raise ValueError("stream indices out of range")
    ss = np.random.SeedSequence(entropy=(seed & (2**64 - 1), purpose, i, k))
    return np.random.Generator(np.random.Philox(ss))


class EstimatorAbort(RuntimeError):
    """A level call failed hard; carries the partially filled report."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def lower_median(values) -> float:
    """Middle order statistic; the lower of the two middles for even length."""
    values = sorted(values)
    if not values:
        raise ValueError("median of an empty list")
    return values[(len(values) - 1) // 2]


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator parameters plus the derived schedule (gamma, ell, n', t).

    r defaults to floor((q-1)/2); it must satisfy 1 <= r < q/2 so the median
    concentration rate gamma is positive, which also means q >= 3 here (the
    binary field admits no valid bin rank).
    """

    q: int
    n: int
    r: int | None = None
    delta: float = 0.1
    construction: str = "dense"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        factor_prime_power(self.q)  # raises unless q is a prime power
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.r is None:
            object.__setattr__(self, "r", (self.q - 1) // 2)
        if not (1 <= self.r and 2 * self.r < self.q):
            raise ValueError(
                f"bin rank must satisfy 1 <= r < q/2; got r={self.r}, q={self.q}"
            )
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.construction not in ("dense", "toeplitz", "field_mult"):
            raise ValueError(
                f"construction {self.construction!r} not usable by the estimator"
            )
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def t(self) -> float:
        return self.q / self.r

    @property
    def gamma(self) -> float:
        return (self.q / (3 * self.r)) * (0.5 - self.r / self.q) ** 2

    @property
    def ell(self) -> int:
        return math.ceil(math.log(2 * self.n / self.delta) / self.gamma)

    @property
    def n_prime(self) -> int:
        # smallest j with t^j >= q^n, in exact integer arithmetic
        j = 0
        while self.q**j < self.q**self.n * self.r**j:
            j += 1
        return j

    @property
    def field(self) -> FieldSpec:
        return FieldSpec.of(self.q)

    def to_json(self) -> dict:
        # workers is execution metadata, not part of the estimate's identity;
        # it is reported under "timing" so reports stay byte-comparable
        return {
            "q": self.q,
            "n": self.n,
            "r": self.r,
            "delta": self.delta,
            "construction": self.construction,
            "seed": self.seed,
            "t": self.t,
            "gamma": self.gamma,
            "ell": self.ell,
            "n_prime": self.n_prime,
        }


def combine_levels(medians, t: float) -> float:
    """M_0 + (t - 1) * sum_i M_{i+1} t^i with compensated summation."""
    terms = [medians[i + 1] * t**i for i in range(len(medians) - 1)]
    return medians[0] + (t - 1.0) * math.fsum(terms)


def combine_levels_log(medians, t: float) -> float:
    """The same combination evaluated in log space (handles huge t^n')."""
    logs = []
    if medians[0] > 0:
        logs.append(math.log(medians[0]))
    for i in range(len(medians) - 1):
        if medians[i + 1] > 0:
            logs.append(math.log(t - 1.0) + math.log(medians[i + 1]) + i * math.log(t))
    if not logs:
        return -math.inf
    m = max(logs)
    return m + math.log(math.fsum(math.exp(x - m) for x in logs))


@dataclass
class EstimateReport:
    """Everything one estimator run produced, including every oracle value.

    Statuses are per-call one-character codes: e(xact), z(ero bin, empty
    feasible set), t(imed out, value is a lower bound).
    """

    variant: str
    config: dict
    medians: list[float]
    level_values: list[list[float]]
    level_statuses: list[str]
    estimate: float
    log_estimate: float
    oracle_calls: int
    status_counts: dict
    lower_bound_only: bool
    wall_seconds: float
    workers: int = 1
    level_info: list[dict] = dataclass_field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": "estimate_report",
            "variant": self.variant,
            "config": self.config,
            "medians": self.medians,
            "level_values": self.level_values,
            "level_statuses": self.level_statuses,
            "estimate": self.estimate,
            "log_estimate": self.log_estimate,
            "oracle_calls": self.oracle_calls,
            "status_counts": self.status_counts,
            "lower_bound_only": self.lower_bound_only,
            "level_info": self.level_info,
            "timing": {"wall_seconds": self.wall_seconds, "workers": self.workers},
        }

    @staticmethod
    def from_json(d: dict) -> "EstimateReport":
        return EstimateReport(
            variant=d["variant"],
            config=d["config"],
            medians=list(d["medians"]),
            level_values=[list(v) for v in d["level_values"]],
            level_statuses=list(d["level_statuses"]),
            estimate=d["estimate"],
            log_estimate=d["log_estimate"],
            oracle_calls=d["oracle_calls"],
            status_counts=dict(d["status_counts"]),
            lower_bound_only=d["lower_bound_only"],
            wall_seconds=d.get("timing", {}).get("wall_seconds", 0.0),
            workers=d.get("timing", {}).get("workers", 1),
            level_info=list(d.get("level_info", [])),
        )

    def canonical_bytes(self, include_timing: bool = False) -> bytes:
        doc = self.to_json()
        if not include_timing:
            doc.pop("timing", None)
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def run_levels(config: EstimatorConfig, oracle, m0_solve, level_solve, variant: str,
               level_info: list[dict] | None = None) -> EstimateReport:
    """Shared level loop: one M_0 call plus n' * ell independent level calls.

    level_solve(i, k) -> OracleAnswer must derive all of its randomness from
    stream_rng so the result is identical for any worker count.
    """
    t0 = time.monotonic()
    n_prime, ell = config.n_prime, config.ell
    values = np.zeros((n_prime, ell), dtype=np.float64)
    statuses = np.empty((n_prime, ell), dtype="U1")

    m0_answer = m0_solve()
    tasks = [(i, k) for i in range(1, n_prime + 1) for k in range(ell)]

    def run_task(task):
        i, k = task
        ans = level_solve(i, k)
        return i, k, ans

    try:
        if config.workers == 1:
            results = map(run_task, tasks)
            for i, k, ans in results:
                values[i - 1, k] = ans.value
                statuses[i - 1, k] = _STATUS_CHAR[ans.status]
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                for i, k, ans in pool.map(run_task, tasks, chunksize=64):
                    values[i - 1, k] = ans.value
                    statuses[i - 1, k] = _STATUS_CHAR[ans.status]
    except Exception as exc:
        partial = _assemble_report(
            config, variant, m0_answer, values, statuses, level_info, t0, partial=True
        )
        raise EstimatorAbort(f"oracle call failed: {exc}", partial=partial) from exc

    return _assemble_report(config, variant, m0_answer, values, statuses, level_info, t0)


def _assemble_report(config, variant, m0_answer, values, statuses, level_info, t0,
                     partial=False) -> EstimateReport:
    medians = [float(m0_answer.value)]
    for i in range(values.shape[0]):
        medians.append(float(lower_median(values[i])))
    estimate = combine_levels(medians, config.t)
    log_estimate = combine_levels_log(medians, config.t)
    flat = ["".join(row) for row in statuses]
    counts = {
        "exact": int(np.count_nonzero(statuses == "e")) + (m0_answer.status == STATUS_EXACT),
        "empty": int(np.count_nonzero(statuses == "z")) + (m0_answer.status == STATUS_EMPTY),
        "timeout_lower_bound": int(np.count_nonzero(statuses == "t"))
        + (m0_answer.status == STATUS_TIMEOUT),
    }
    return EstimateReport(
        variant=variant,
        config=config.to_json(),
        medians=medians,
        level_values=[[float(v) for v in row] for row in values],
        level_statuses=flat,
        estimate=float(estimate),
        log_estimate=float(log_estimate),
        oracle_calls=values.size + 1,
        status_counts=counts,
        lower_bound_only=bool(counts["timeout_lower_bound"] > 0) or partial,
        wall_seconds=time.monotonic() - t0,
        workers=config.workers,
        level_info=level_info or [],
    )


def level_hash(config: EstimatorConfig, i: int, k: int):
    """The hash for level i, repetition k: an i x n matrix plus offset.

    Construction falls back to dense above i = n, where the structured
    families are not defined (the matrix is taller than square).
    """
    rng = stream_rng(config.seed, STREAM_HASH, i, k)
    construction = config.construction
    if i > config.n and construction in ("toeplitz", "field_mult"):
        construction = "dense"
    return sample_hash(config.field, i, config.n, config.r, construction, rng)


def iter_level_hashes(config: EstimatorConfig):
    """All (i, k, hash) triples of a run, in schedule order."""
    for i in range(1, config.n_prime + 1):
        for k in range(config.ell):
            yield i, k, level_hash(config, i, k)


def estimate_sum(config: EstimatorConfig, weight, oracle,
                 budget_seconds: float | None = None) -> EstimateReport:
    """Estimate sum_sigma w(sigma) over GF(q)^n with hash-constrained oracle calls."""
    if weight.q != config.q or weight.n != config.n:
        raise ValueError(
            f"weight model domain ({weight.q}, {weight.n}) does not match config "
            f"({config.q}, {config.n})"
        )
    oracle.prepare(weight)

    def m0_solve() -> OracleAnswer:
        return oracle.solve(OracleQuery(weight, Unconstrained(), budget_seconds))

    def level_solve(i, k) -> OracleAnswer:
        h = level_hash(config, i, k)
        return oracle.solve(OracleQuery(weight, MultiBin(h), budget_seconds))

    return run_levels(config, oracle, m0_solve, level_solve, "constrained")


# ---------------------------------------------------------------------------
# tail quantiles and the theory-side bracket


def tail_quantiles(weights, config: EstimatorConfig) -> np.ndarray:
    """beta_i = w(sigma_{floor(t^i)}) over the descending weight order, i <= n'.

    Ranks floor(t^i) are computed in exact integer arithmetic; ranks beyond
    the domain size yield 0 (the weight of a missing configuration).
    """
    sw = np.sort(np.asarray(weights, dtype=np.float64))[::-1]
    out = np.zeros(config.n_prime + 1, dtype=np.float64)
    for i in range(config.n_prime + 1):
        rank = config.q**i // config.r**i  # floor(t^i) >= 1
        if rank <= len(sw):
            out[i] = sw[rank - 1]
    return out


@dataclass(frozen=True)
class QuantileTruth:
    """Test-side ground truth: the full sorted weight sequence and its quantiles."""

    sorted_weights: np.ndarray  # descending
    betas: np.ndarray  # beta_0 .. beta_{n'}

    @staticmethod
    def from_weights(weights, config: EstimatorConfig) -> "QuantileTruth":
        sw = np.sort(np.asarray(weights, dtype=np.float64))[::-1]
        return QuantileTruth(sw, tail_quantiles(sw, config))


def quantile_bracket(weights, config: EstimatorConfig) -> tuple[Fraction, Fraction]:
    """The bracket [L', U'] around the true sum implied by exact tail quantiles.

    L' = beta_0 + (t-1) * sum_{i<n'} beta_{min(i+2, n')} t^i
    U' = beta_0 + (t-1) * sum_{i<n'} beta_i t^i

    Evaluated in exact rational arithmetic (floats are lifted exactly), so
    tests can assert L' <= S <= U' <= t^2 L' without tolerance.
    """
    betas = [Fraction(float(b)) for b in tail_quantiles(weights, config)]
    t = Fraction(config.q, config.r)
    n_prime = config.n_prime
    lower = betas[0] + (t - 1) * sum(
        (betas[min(i + 2, n_prime)] * t**i for i in range(n_prime)), Fraction(0)
    )
    upper = betas[0] + (t - 1) * sum(
        (betas[i] * t**i for i in range(n_prime)), Fraction(0)
    )
    return lower, upper


@dataclass
class ConcentrationReport:
    level: int
    trials: int
    frequency: float
    bound: float  # 1 - 2 exp(-gamma * ell)
    interval: tuple[float, float]


def quantile_concentration(config: EstimatorConfig, weight, oracle, level: int,
                           trials: int) -> ConcentrationReport:
    """Empirical check of the median concentration at one level.

    Repeats the level-`level` inner loop `trials` times and reports how often
    the median lands in [beta_{min(level+1, n')}, beta_{max(level-1, 0)}].
    """
    from .weights import weight_table

    truth = QuantileTruth.from_weights(weight_table(weight), config)
    lo = float(truth.betas[min(level + 1, config.n_prime)])
    hi = float(truth.betas[max(level - 1, 0)])
    oracle.prepare(weight)
    inside = 0
    for trial in range(trials):
        rng = stream_rng(config.seed, STREAM_CONCENTRATION, level, trial)
        vals = []
        for _ in range(config.ell):
            h = sample_hash(config.field, level, config.n, config.r,
                            "dense" if level > config.n else config.construction, rng)
            vals.append(oracle.solve(OracleQuery(weight, MultiBin(h))).value)
        med = lower_median(vals)
        if lo <= med <= hi:
            inside += 1
    bound = 1.0 - 2.0 * math.exp(-config.gamma * config.ell)
    return ConcentrationReport(
        level=level,
        trials=trials,
        frequency=inside / trials,
        bound=bound,
        interval=(lo, hi),
    )
