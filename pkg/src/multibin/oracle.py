"""The MAX-oracle: maximize a weight over hash-constrained or explicit domains.

The reference implementation enumerates exhaustively and is exact.  Three
constraint forms are supported:

* ``Unconstrained``            -- the weight model's whole domain, or an
                                  explicit parameter domain to iterate with no
                                  feasibility testing at all;
* ``MultiBin``                 -- configurations sigma with A sigma + b
                                  coordinate-wise below the threshold vector;
* ``MultiBinPermutation``      -- the same filter over permutation vectors.

Maximization scans configurations sorted by weight (descending, lexicographic
within ties), so the first accepted configuration is the exact answer and the
tie-break is always the lexicographically first maximizer.  A wall-clock
budget turns an unfinished scan into a lower bound, never a silent truncation.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import _kernels
from .field import enumerate_vectors
from .hashing import MultiBinHash

DEFAULT_MAX_EVALUATIONS = 10**8
DEFAULT_MAX_TABLE = 2 * 10**7

STATUS_EXACT = "exact"
STATUS_EMPTY = "empty"
STATUS_TIMEOUT = "timeout_lower_bound"


class OracleRefusal(RuntimeError):
    """The domain is too large to enumerate; refuse instead of truncating."""


@dataclass(frozen=True)
class Unconstrained:
    """Maximize over the model's whole domain, or over explicit parameter rows.

    When ``domain`` is given, the oracle evaluates the weight on exactly those
    rows in order, with no feasibility test; composition with an affine map
    belongs inside the weight callback.
    """

    domain: np.ndarray | None = None


@dataclass(frozen=True)
class MultiBin:
    hash: MultiBinHash
    thresholds: np.ndarray | None = None  # defaults to (r, ..., r)


@dataclass(frozen=True)
class MultiBinPermutation:
    hash: MultiBinHash | None  # None: permutation domain without hash rows
    n: int
    thresholds: np.ndarray | None = None


@dataclass(frozen=True)
class OracleQuery:
    weight: object  # a weight model from multibin.weights / multibin.permanent
    constraint: object = Unconstrained()
    budget_seconds: float | None = None


@dataclass(frozen=True)
class OracleAnswer:
    value: float
    witness: np.ndarray | None
    status: str

    @property
    def exact(self) -> bool:
        return self.status == STATUS_EXACT


@dataclass
class _Context:
    """Sorted enumeration of one weight model's domain, built once per model."""

    sorted_configs: np.ndarray  # (N, n) int16, weight-descending, lex within ties
    sorted_weights: np.ndarray  # (N,) float64


def permutation_vectors(n: int) -> np.ndarray:
    """All n! permutations of (0..n-1) as rows, lexicographic order."""
    if n > 10:
        raise OracleRefusal(f"permutation domain n={n} too large to enumerate")
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def _sorted_context(configs: np.ndarray, weights: np.ndarray) -> _Context:
    order = np.argsort(-weights, kind="stable")  # ties keep lexicographic order
    return _Context(
        sorted_configs=np.ascontiguousarray(configs[order], dtype=np.int16),
        sorted_weights=np.ascontiguousarray(weights[order], dtype=np.float64),
    )


class ExhaustiveOracle:
    """Exact MAX-oracle by enumeration, with caching of per-model preparations.

    Pure and thread-safe once a model's context exists; `prepare` builds it
    eagerly so concurrent solves never race on construction.  Answers are
    deterministic and independent of thread scheduling.
    """

    def __init__(self, max_evaluations: int = DEFAULT_MAX_EVALUATIONS,
                 max_table: int = DEFAULT_MAX_TABLE,
                 budget_seconds: float | None = None,
                 use_numba: bool = True):
        self.max_evaluations = max_evaluations
        self.max_table = max_table
        self.budget_seconds = budget_seconds
        self.use_numba = use_numba
        self._contexts: dict[tuple[int, bool], _Context] = {}
        self._keepalive: dict[int, object] = {}

    # -- context construction ------------------------------------------------

    def prepare(self, weight, permutation: bool | None = None) -> _Context:
        if permutation is None:
            permutation = bool(getattr(weight, "permutation_domain", False))
        key = (id(weight), permutation)
        ctx = self._contexts.get(key)
        if ctx is not None:
            return ctx
        q, n = weight.q, weight.n
        if permutation:
            configs = permutation_vectors(n)
            if configs.shape[0] > self.max_table:
                raise OracleRefusal(f"{n}! permutations exceed table limit")
            weights = weight.bulk_weight(configs)
        else:
            size = q**n
            if size > self.max_evaluations:
                raise OracleRefusal(
                    f"domain size q^n = {size} exceeds evaluation limit {self.max_evaluations}"
                )
            if size > self.max_table:
                raise OracleRefusal(
                    f"domain size q^n = {size} exceeds table limit {self.max_table}"
                )
            configs = enumerate_vectors(q, n)
            weights = weight.bulk_weight(configs)
        ctx = _sorted_context(configs, np.asarray(weights, dtype=np.float64))
        self._contexts[key] = ctx
        self._keepalive[id(weight)] = weight
        return ctx

    # -- solving ---------------------------------------------------------------

    def solve(self, query: OracleQuery) -> OracleAnswer:
        c = query.constraint
        budget = query.budget_seconds if query.budget_seconds is not None else self.budget_seconds
        deadline = time.monotonic() + budget if budget is not None else None
        if isinstance(c, Unconstrained):
            if c.domain is not None:
                return self._solve_domain(query.weight, c.domain, deadline)
            ctx = self.prepare(query.weight)
            return OracleAnswer(
                float(ctx.sorted_weights[0]),
                ctx.sorted_configs[0].astype(np.int64),
                STATUS_EXACT,
            )
        if isinstance(c, MultiBin):
            ctx = self.prepare(query.weight, permutation=False)
            return self._solve_multibin(ctx, query.weight, c.hash, c.thresholds, deadline)
        if isinstance(c, MultiBinPermutation):
            ctx = self.prepare(query.weight, permutation=True)
            if c.hash is None:
                return OracleAnswer(
                    float(ctx.sorted_weights[0]),
                    ctx.sorted_configs[0].astype(np.int64),
                    STATUS_EXACT,
                )
            return self._solve_multibin(ctx, query.weight, c.hash, c.thresholds, deadline)
        raise TypeError(f"unknown constraint {c!r}")

    def _solve_multibin(self, ctx, weight, h: MultiBinHash, thresholds, deadline) -> OracleAnswer:
        if h.n != weight.n:
            raise ValueError(f"hash over {h.n} variables, weight over {weight.n}")
        thr = np.full(h.m, h.r, dtype=np.int64) if thresholds is None else \
            np.asarray(thresholds, dtype=np.int64)
        if thr.shape != (h.m,):
            raise ValueError("threshold vector length mismatch")
        hit, exhausted = _kernels.first_accepted(
            ctx.sorted_configs, h.A, h.b, h.field, thr,
            deadline=deadline, use_numba=self.use_numba,
        )
        if hit >= 0:
            return OracleAnswer(
                float(ctx.sorted_weights[hit]),
                ctx.sorted_configs[hit].astype(np.int64),
                STATUS_EXACT,
            )
        if exhausted:
            return OracleAnswer(0.0, None, STATUS_EMPTY)
        return OracleAnswer(0.0, None, STATUS_TIMEOUT)

    def _solve_domain(self, weight, domain: np.ndarray, deadline) -> OracleAnswer:
        domain = np.asarray(domain)
        if domain.shape[0] == 0:
            return OracleAnswer(0.0, None, STATUS_EMPTY)
        if domain.shape[0] > self.max_evaluations:
            raise OracleRefusal(f"explicit domain of {domain.shape[0]} rows too large")
        fast = getattr(weight, "fast_domain_max", None) if self.use_numba else None
        if fast is not None:
            result = fast(domain, deadline=deadline)
            if result is not None:
                best, row, exhausted = result
                return OracleAnswer(
                    float(best),
                    domain[row].astype(np.int64) if row >= 0 else None,
                    STATUS_EXACT if exhausted else STATUS_TIMEOUT,
                )
        best = -math.inf
        best_row = None
        status = STATUS_EXACT
        chunk = 1 << 16
        for start in range(0, domain.shape[0], chunk):
            rows = domain[start : start + chunk]
            vals = np.asarray(weight.bulk_weight(rows), dtype=np.float64)
            pos = int(np.argmax(vals))
            if vals[pos] > best:
                best = float(vals[pos])
                best_row = rows[pos].astype(np.int64)
            if deadline is not None and time.monotonic() > deadline and start + chunk < domain.shape[0]:
                status = STATUS_TIMEOUT
                break
        return OracleAnswer(best, best_row, status)


def exhaustive_max(query: OracleQuery, max_evaluations: int = DEFAULT_MAX_EVALUATIONS,
                   use_numba: bool = True) -> OracleAnswer:
    """One-shot exact maximization; see ExhaustiveOracle for the contract."""
    oracle = ExhaustiveOracle(max_evaluations=max_evaluations, use_numba=use_numba)
    return oracle.solve(query)
