"""Image-of-a-map estimator variant: the MAX-oracle stays unconstrained.

Instead of filtering configurations through hash inequalities, each level
builds the acceptance region directly as the image of an affine map and the
oracle merely iterates a parameter domain:

* level i <= n ("coset union"): sample n linearly independent columns, split
  them into A (n-i columns) and R (i columns), draw a shift b, and maximize
  w(Ax + Ry + b) over free x in GF(q)^(n-i) and y in {a_0..a_{r-1}}^i.  The
  image is a union of r^i distinct cosets of the code spanned by A, exactly
  q^(n-i) * r^i configurations.

* level i > n ("lex set"): sample a full-rank n x n matrix A and shift b, and
  maximize w(Ay + b) over the first ceil(r^i / q^(i-n)) - 1 vectors of GF(q)^n
  in lexicographic order.

Both regimes reproduce the (r/q)^m per-configuration acceptance statistics of
the hash-constrained estimator, so the combination formula and the t^2
guarantee carry over unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .estimator import (
    EstimateReport,
    EstimatorConfig,
    STREAM_BASIS,
    run_levels,
    stream_rng,
)
from .field import FieldSpec
from .oracle import OracleAnswer, OracleQuery, Unconstrained
from .weights import TableWeight, weight_table


def sample_basis(field: FieldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n linearly independent columns, uniform over ordered bases of GF(q)^n.

    Columns are drawn uniformly and redrawn whenever they fall in the span of
    the columns already chosen; rank is maintained by Gaussian elimination.
    Resampling terminates with probability 1; a 64n retry cap fails loudly.

    Candidates may be drawn from `rng` in batches, so the generator's position
    after the call is unspecified; draw anything else you need first.
    """
    q = field.q
    if field.k == 1 and _kernels.HAVE_NUMBA:
        return _kernels.sample_basis_prime(q, n, rng, max_retries=64 * n)
    basis = np.zeros((n, n), dtype=np.int64)
    # pivot rows are kept mutually reduced (unit at own pivot, zero at all other
    # pivots), so membership in the span is one elimination pass
    pivot_rows = np.zeros((n, n), dtype=np.int64)
    positions = np.zeros(n, dtype=np.int64)
    rank = 0
    retries = 0
    while rank < n:
        v = rng.integers(0, q, size=n, dtype=np.int64)
        if field.k == 1:
            red = (v - v[positions[:rank]] @ pivot_rows[:rank]) % q if rank else v.copy()
        else:
            red = v.copy()
            for t in range(rank):
                c = int(red[positions[t]])
                if c:
                    red = field.add_arr(
                        red, field.mul_arr(np.full(n, field.neg(c)), pivot_rows[t])
                    )
        nz = np.nonzero(red)[0]
        if nz.size == 0:
            retries += 1
            if retries > 64 * n:
                raise RuntimeError("basis sampling exceeded the retry cap")
            continue
        pos = int(nz[0])
        inv = field.inv(int(red[pos]))
        if field.k == 1:
            new_row = (red * inv) % q
            if rank:
                pivot_rows[:rank] = (
                    pivot_rows[:rank] - np.outer(pivot_rows[:rank, pos], new_row)
                ) % q
        else:
            new_row = field.mul_arr(red, np.full(n, inv))
            for t in range(rank):
                c = int(pivot_rows[t, pos])
                if c:
                    pivot_rows[t] = field.add_arr(
                        pivot_rows[t], field.mul_arr(np.full(n, field.neg(c)), new_row)
                    )
        pivot_rows[rank] = new_row
        positions[rank] = pos
        basis[:, rank] = v
        rank += 1
    return basis


@dataclass(frozen=True)
class LexBound:
    """The K-th vector of GF(q)^n in lexicographic order and the strict-below set.

    K = ceil(r^m / q^(m-n)); the set S = {x : x <_lex s} holds exactly K - 1
    vectors (the bound itself is excluded).
    """

    q: int
    n: int
    m: int
    r: int
    K: int
    size: int
    s_m: np.ndarray

    def domain(self) -> np.ndarray:
        return lex_prefix(self.q, self.n, self.size)


def lex_bound(q: int, n: int, m: int, r: int) -> LexBound:
    if m <= n:
        raise ValueError("the lexicographic regime applies to m > n only")
    num = r**m
    den = q ** (m - n)
    K = -(-num // den)  # exact ceiling
    from .field import rank_vector

    return LexBound(q=q, n=n, m=m, r=r, K=K, size=K - 1, s_m=rank_vector(K - 1, q, n))


def lex_prefix(q: int, n: int, count: int) -> np.ndarray:
    """The first `count` vectors of GF(q)^n in lexicographic order, as rows."""
    out = np.empty((count, n), dtype=np.int64)
    ramp = np.arange(count, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[:, j] = ramp % q
        ramp //= q
    return out


def product_grid(q: int, n_free: int, r: int, m: int) -> np.ndarray:
    """All (x, y) parameter rows with x in GF(q)^n_free and y in {0..r-1}^m."""
    rows = q**n_free * r**m
    n = n_free + m
    out = np.empty((rows, n), dtype=np.int64)
    ramp = np.arange(rows, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        base = r if j >= n_free else q
        out[:, j] = ramp % base
        ramp //= base
    return out


@dataclass(frozen=True)
class GeneratorDomain:
    """One sampled affine image: sigma = G z + b over the rows of `domain`."""

    regime: str  # "coset_union" | "lex_set"
    G: np.ndarray  # (n, n)
    b: np.ndarray  # (n,)
    domain: np.ndarray  # (rows, n) parameter vectors
    m: int
    r: int


def sample_generator_domain(field: FieldSpec, n: int, m: int, r: int,
                            rng: np.random.Generator,
                            domain_rows: np.ndarray | None = None) -> GeneratorDomain:
    """Draw the level-m affine image: the shift b first, then the basis columns
    (basis sampling consumes a variable amount of the stream)."""
    b = rng.integers(0, field.q, size=n, dtype=np.int64)
    G = sample_basis(field, n, rng)
    if m <= n:
        rows = product_grid(field.q, n - m, r, m) if domain_rows is None else domain_rows
        return GeneratorDomain("coset_union", G, b, rows, m, r)
    rows = lex_bound(field.q, n, m, r).domain() if domain_rows is None else domain_rows
    return GeneratorDomain("lex_set", G, b, rows, m, r)


class ComposedAffineWeight:
    """w'(z) = w(G z + b): the affine map lives inside the weight callback,
    so the oracle performs pure domain iteration with no feasibility test."""

    def __init__(self, inner, G: np.ndarray, b: np.ndarray, field: FieldSpec):
        self.inner = inner
        self.G = np.asarray(G, dtype=np.int64)
        self.b = np.asarray(b, dtype=np.int64)
        self.field = field
        self.q = inner.q
        self.n = inner.n

    def map_rows(self, zrows: np.ndarray) -> np.ndarray:
        zrows = np.asarray(zrows, dtype=np.int64)
        if self.field.k == 1:
            return (zrows @ self.G.T + self.b) % self.q
        out = np.empty_like(zrows)
        for idx, z in enumerate(zrows):
            out[idx] = self.field.add_arr(self.field.matvec(self.G, z), self.b)
        return out

    def bulk_weight(self, zrows: np.ndarray) -> np.ndarray:
        return self.inner.bulk_weight(self.map_rows(zrows))

    def weight(self, z) -> float:
        return float(self.bulk_weight(np.asarray(z).reshape(1, -1))[0])

    def fast_domain_max(self, domain: np.ndarray, deadline=None):
        """Fused map + table-gather + max when the inner model is a plain table
        over a prime field; None signals the oracle to take the generic path."""
        if self.field.k != 1 or not isinstance(self.inner, TableWeight):
            return None
        return _kernels.image_max(domain, self.G, self.b, self.inner.table, self.q,
                                  deadline=deadline)


def image_set(dom: GeneratorDomain, field: FieldSpec) -> np.ndarray:
    """Lexicographic ranks of the image {G z + b}, duplicates removed."""
    zrows = dom.domain
    if field.k == 1:
        sig = (zrows @ dom.G.T + dom.b) % field.q
    else:
        sig = np.stack([field.add_arr(field.matvec(dom.G, z), dom.b) for z in zrows])
    ranks = np.zeros(len(sig), dtype=np.int64)
    for j in range(sig.shape[1]):
        ranks = ranks * field.q + sig[:, j]
    return np.unique(ranks)


@dataclass
class ImageAudit:
    regime: str
    q: int
    n: int
    m: int
    r: int
    draws: int
    expected_size: int
    sizes: list[int]
    marginal: np.ndarray  # empirical Pr(Z_sigma) per configuration
    target_marginal: float
    joint: np.ndarray | None  # empirical joint acceptance, when small enough

    @property
    def sizes_exact(self) -> bool:
        return all(s == self.expected_size for s in self.sizes)

    @property
    def max_marginal_deviation(self) -> float:
        return float(np.abs(self.marginal - self.target_marginal).max())


def image_membership_audit(field: FieldSpec, n: int, m: int, r: int, draws: int,
                           seed: int = 0, regime: str | None = None,
                           joint_limit: int = 2048) -> ImageAudit:
    """Verify image sizes exactly and acceptance statistics empirically.

    For the coset-union regime the image must have exactly q^(n-m) * r^m
    configurations on every draw; for the lexicographic regime exactly
    ceil(r^m / q^(m-n)) - 1 (the affine map is injective).  Marginal
    acceptance frequencies are accumulated per configuration; the joint
    acceptance matrix is kept when the domain is small enough.
    """
    q = field.q
    if q**n > 10**6:
        raise ValueError("audit domain too large")
    if regime is None:
        regime = "coset_union" if m <= n else "lex_set"
    if regime == "coset_union":
        expected = q ** (n - m) * r**m
        rows = product_grid(q, n - m, r, m)
    else:
        expected = lex_bound(q, n, m, r).size
        rows = lex_bound(q, n, m, r).domain()

    sizes = []
    hits = np.zeros(q**n, dtype=np.int64)
    joint = np.zeros((q**n, q**n), dtype=np.int64) if q**n <= joint_limit else None
    for d in range(draws):
        rng = stream_rng(seed, STREAM_BASIS, m, d)
        dom = sample_generator_domain(field, n, m, r, rng, domain_rows=rows)
        ranks = image_set(dom, field)
        sizes.append(int(ranks.size))
        z = np.zeros(q**n, dtype=np.int64)
        z[ranks] = 1
        hits += z
        if joint is not None:
            joint += np.outer(z, z)
    return ImageAudit(
        regime=regime,
        q=q,
        n=n,
        m=m,
        r=r,
        draws=draws,
        expected_size=expected,
        sizes=sizes,
        marginal=hits / draws,
        target_marginal=(r / q) ** m if regime == "coset_union" else expected / q**n,
        joint=joint / draws if joint is not None else None,
    )


def estimate_sum_unconstrained(config: EstimatorConfig, weight, oracle,
                               budget_seconds: float | None = None) -> EstimateReport:
    """The estimator run with unconstrained oracle calls over affine images."""
    if weight.q != config.q or weight.n != config.n:
        raise ValueError(
            f"weight model domain ({weight.q}, {weight.n}) does not match config "
            f"({config.q}, {config.n})"
        )
    field = config.field
    q, n, r = config.q, config.n, config.r
    oracle.prepare(weight)
    # gather-from-table inner model: the composed callback then costs one
    # affine map plus one table lookup per domain row
    inner = weight if isinstance(weight, TableWeight) else TableWeight(q, n, weight_table(weight))

    domains: dict[int, np.ndarray] = {}
    level_info = []
    for i in range(1, config.n_prime + 1):
        if i <= n:
            domains[i] = product_grid(q, n - i, r, i)
            level_info.append({"i": i, "regime": "coset_union", "domain_size": int(domains[i].shape[0])})
        else:
            domains[i] = lex_bound(q, n, i, r).domain()
            level_info.append({"i": i, "regime": "lex_set", "domain_size": int(domains[i].shape[0])})

    def m0_solve() -> OracleAnswer:
        return oracle.solve(OracleQuery(weight, Unconstrained(), budget_seconds))

    def level_solve(i, k) -> OracleAnswer:
        rng = stream_rng(config.seed, STREAM_BASIS, i, k)
        dom = sample_generator_domain(field, n, i, r, rng, domain_rows=domains[i])
        composed = ComposedAffineWeight(inner, dom.G, dom.b, field)
        return oracle.solve(
            OracleQuery(composed, Unconstrained(domain=dom.domain), budget_seconds)
        )

    return run_levels(config, oracle, m0_solve, level_solve, "unconstrained",
                      level_info=level_info)
