"""Permanent approximation: the estimator over the symmetric group.

A permutation sigma contributes prod_i D[i, sigma(i)]; the domain S_n is
embedded in GF(q)^n for a prime power q > n by writing positions 1..n as the
field elements a_0..a_{n-1}.  Level calls add the permutation requirements to
the multi-bin hash filter; since q/r approaches 2 from above as q grows, the
guarantee approaches a 4-approximation.

``exact_permanent`` is the ground-truth oracle (inclusion-exclusion over
column subsets, O(2^n n)).
"""

from __future__ import annotations

import math

import numpy as np

from .estimator import EstimateReport, EstimatorConfig, level_hash, run_levels
from .field import factor_prime_power
from .oracle import MultiBinPermutation, OracleAnswer, OracleQuery


def smallest_prime_power_above(n: int) -> int:
    q = n + 1
    while True:
        try:
            factor_prime_power(q)
            return q
        except ValueError:
            q += 1


def permutation_weight(D: np.ndarray, perm) -> float:
    """prod_i D[i, perm[i]] for a permutation vector over {0..n-1}."""
    D = np.asarray(D, dtype=np.float64)
    perm = np.asarray(perm, dtype=np.int64)
    n = D.shape[0]
    if perm.shape != (n,) or sorted(perm.tolist()) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of 0..{n - 1}")
    return float(np.prod(D[np.arange(n), perm]))


def exact_permanent(D: np.ndarray) -> float:
    """Permanent by inclusion-exclusion over column subsets (Gray-code order)."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 0:
        return 1.0
    if n > 20:
        raise ValueError(f"n = {n} too large for exact computation")
    rowsum = np.zeros(n, dtype=np.float64)
    total = 0.0
    prev = 0
    popcount = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        bit = gray ^ prev
        j = bit.bit_length() - 1
        if gray & bit:
            rowsum += D[:, j]
            popcount += 1
        else:
            rowsum -= D[:, j]
            popcount -= 1
        sign = -1.0 if (n - popcount) % 2 else 1.0
        total += sign * float(np.prod(rowsum))
        prev = gray
    return total


class PermanentWeight:
    """Weight model over the permutation domain inside GF(q)^n.

    Rows that are not permutations of 0..n-1 weigh 0, so the model is also
    well defined on the full q-ary domain.
    """

    permutation_domain = True

    def __init__(self, D, q: int):
        D = np.ascontiguousarray(D, dtype=np.float64)
        n = D.shape[0]
        if D.shape != (n, n):
            raise ValueError("matrix must be square")
        if q <= n:
            raise ValueError(f"need q > n, got q={q}, n={n}")
        factor_prime_power(q)
        self.D = D
        self.q = q
        self.n = n

    def bulk_weight(self, configs: np.ndarray) -> np.ndarray:
        configs = np.asarray(configs, dtype=np.int64)
        n = self.n
        in_range = np.all(configs < n, axis=1)
        prods = np.zeros(configs.shape[0], dtype=np.float64)
        if np.any(in_range):
            rows = configs[in_range]
            distinct = (np.sort(rows, axis=1) == np.arange(n)).all(axis=1)
            vals = np.prod(self.D[np.arange(n), rows], axis=1)
            prods[in_range] = vals * distinct
        return prods

    def bulk_log_weight(self, configs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.bulk_weight(configs))

    def weight(self, sigma) -> float:
        return float(self.bulk_weight(np.asarray(sigma).reshape(1, -1))[0])

    def linear_objective(self) -> np.ndarray:
        """log-linear objective over one-hot value choices: c[i][v] = log D[i][v]."""
        obj = np.full((self.n, self.q), -np.inf)
        with np.errstate(divide="ignore"):
            obj[:, : self.n] = np.log(self.D)
        return obj


class PermanentInstance:
    """A nonnegative matrix plus the field parameters of its estimator run."""

    def __init__(self, D, q: int | None = None, r: int | None = None):
        D = np.ascontiguousarray(D, dtype=np.float64)
        n = D.shape[0]
        if D.shape != (n, n):
            raise ValueError("matrix must be square")
        if n < 1:
            raise ValueError("matrix must be nonempty")
        if D.min() < 0:
            raise ValueError("entries must be nonnegative")
        self.D = D
        self.n = n
        self.q = smallest_prime_power_above(n) if q is None else q
        if self.q <= n:
            raise ValueError(f"need q > n, got q={self.q}")
        factor_prime_power(self.q)
        self.r = (self.q - 1) // 2 if r is None else r

    def weight_model(self) -> PermanentWeight:
        return PermanentWeight(self.D, self.q)


def estimate_permanent(instance: PermanentInstance, oracle, delta: float = 0.1,
                       seed: int = 0, construction: str = "dense", workers: int = 1,
                       budget_seconds: float | None = None) -> EstimateReport:
    """Run the permutation-constrained estimator on a permanent instance."""
    config = EstimatorConfig(
        q=instance.q, n=instance.n, r=instance.r, delta=delta,
        construction=construction, seed=seed, workers=workers,
    )
    weight = instance.weight_model()
    oracle.prepare(weight, permutation=True)
    n = instance.n

    def m0_solve() -> OracleAnswer:
        return oracle.solve(
            OracleQuery(weight, MultiBinPermutation(None, n), budget_seconds)
        )

    def level_solve(i, k) -> OracleAnswer:
        h = level_hash(config, i, k)
        return oracle.solve(
            OracleQuery(weight, MultiBinPermutation(h, n), budget_seconds)
        )

    return run_levels(config, oracle, m0_solve, level_solve, "permutation")
