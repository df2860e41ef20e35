"""The affine hash family h(x) = Ax + b over GF(q) and its multi-bin acceptance test.

Four ways to draw (A, b) are provided, all exposing the same evaluated form:

* ``dense``            -- every entry of A and b i.i.d. uniform.
* ``toeplitz``         -- A constant along descending diagonals; only the first
                          row, first column and b are random.
* ``sparse_toeplitz``  -- Toeplitz with Bernoulli(density) entries, q = 2 only.
* ``field_mult``       -- multiplication by a random element of GF(q^n),
                          materialized as an affine map; uses m + n random
                          symbols, the information-theoretic minimum.

A hash accepts a configuration sigma when every coordinate of A sigma + b has
ordering index below the bin rank r, i.e. the acceptance region is the union
of the r^m lowest hash bins.  ``pairwise_independence_audit`` checks the
acceptance statistics of a whole family by exhaustive enumeration.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass

import numpy as np

from .field import FieldSpec, enumerate_vectors

CONSTRUCTIONS = ("dense", "toeplitz", "sparse_toeplitz", "field_mult")

AUDIT_FAMILY_LIMIT = 1 << 24
AUDIT_WORK_LIMIT = 5 * 10**8


@dataclass(frozen=True)
class MultiBinHash:
    """An affine map x -> Ax + b over GF(q) plus the bin rank r.

    Immutable; safe to evaluate concurrently from any number of threads.
    `random_bits` records the randomness consumed when the hash was sampled
    (NaN for hashes built directly from matrices).
    """

    field: FieldSpec
    A: np.ndarray  # (m, n) element indices
    b: np.ndarray  # (m,)
    r: int
    construction: str = "dense"
    seed: int | None = None
    random_bits: float = float("nan")
    nu: tuple[int, ...] | None = None  # field_mult multiplier, kept for audits
    density: float | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.int64)
        b = np.asarray(self.b, dtype=np.int64)
        if A.ndim != 2 or b.ndim != 1 or A.shape[0] != b.shape[0]:
            raise ValueError(f"inconsistent hash shapes {A.shape}, {b.shape}")
        if not 1 <= self.r <= self.field.q - 1:
            raise ValueError(f"bin rank {self.r} out of range for q={self.field.q}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def validate_entries(self) -> "MultiBinHash":
        """Range-check matrix entries; used on deserialized input."""
        q = self.field.q
        if self.A.size and not (0 <= self.A.min() and self.A.max() < q):
            raise ValueError("matrix entries out of field range")
        if self.b.size and not (0 <= self.b.min() and self.b.max() < q):
            raise ValueError("offset entries out of field range")
        return self

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def to_json(self) -> dict:
        out = {
            "construction": self.construction,
            "q": self.field.q,
            "m": self.m,
            "n": self.n,
            "r": self.r,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "seed": self.seed,
        }
        if self.density is not None:
            out["density"] = self.density
        if self.nu is not None:
            out["nu"] = list(self.nu)
        canonical = FieldSpec.of(self.field.q)
        if self.field != canonical:
            out["field"] = self.field.to_config()
        return out

    @staticmethod
    def from_json(d: dict) -> "MultiBinHash":
        field = (
            FieldSpec.from_config(d["field"]) if "field" in d else FieldSpec.of(int(d["q"]))
        )
        return MultiBinHash(
            field=field,
            A=np.array(d["A"], dtype=np.int64).reshape(int(d["m"]), int(d["n"])),
            b=np.array(d["b"], dtype=np.int64),
            r=int(d["r"]),
            construction=d.get("construction", "dense"),
            seed=d.get("seed"),
            nu=tuple(d["nu"]) if "nu" in d else None,
            density=d.get("density"),
        ).validate_entries()


def evaluate_hash(h: MultiBinHash, x: np.ndarray) -> np.ndarray:
    """A x + b over the field; x is a length-n index vector."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (h.n,):
        raise ValueError(f"expected vector of length {h.n}, got shape {x.shape}")
    return h.field.add_arr(h.field.matvec(h.A, x), h.b)


def accepts(h: MultiBinHash, sigma: np.ndarray, thresholds: np.ndarray | None = None) -> bool:
    """True iff every coordinate of A sigma + b is below the threshold.

    The default threshold is the bin-rank vector (r, ..., r); a per-coordinate
    vector may be supplied instead.  m = 0 accepts everything.
    """
    value = evaluate_hash(h, sigma)
    if thresholds is None:
        return bool(np.all(value < h.r))
    thresholds = np.asarray(thresholds)
    if thresholds.shape != (h.m,):
        raise ValueError("threshold vector length mismatch")
    return bool(np.all(value < thresholds))


# ---------------------------------------------------------------------------
# sampling


def _bits_per_symbol(q: int) -> int:
    return max(1, math.ceil(math.log2(q)))


def sample_dense(field: FieldSpec, m: int, n: int, r: int, rng: np.random.Generator) -> MultiBinHash:
    """Every entry of A and b i.i.d. uniform; draws A row-major, then b."""
    if m < 0 or n < 1:
        raise ValueError(f"bad hash dimensions m={m}, n={n}")
    q = field.q
    syms = rng.integers(0, q, size=m * n + m, dtype=np.int64)
    A = syms[: m * n].reshape(m, n)
    b = syms[m * n :]
    bits = (m * n + m) * _bits_per_symbol(q)
    return MultiBinHash(field, A, b, r, "dense", random_bits=float(bits))


def _toeplitz_from(first_row: np.ndarray, first_col: np.ndarray) -> np.ndarray:
    m, n = len(first_col), len(first_row)
    seq = np.concatenate((first_col[::-1], first_row[1:]))  # diagonals, bottom-left up
    idx = np.arange(n)[None, :] - np.arange(m)[:, None] + (m - 1)
    return np.ascontiguousarray(seq[idx], dtype=np.int64)


def sample_toeplitz(field: FieldSpec, m: int, n: int, r: int, rng: np.random.Generator) -> MultiBinHash:
    """A[i][j] = A[i-1][j-1]; draws the first row, then the rest of the first
    column, then b (m + n - 1 random symbols plus m for b)."""
    if m < 1 or n < 1:
        raise ValueError(f"bad hash dimensions m={m}, n={n}")
    q = field.q
    syms = rng.integers(0, q, size=2 * m + n - 1, dtype=np.int64)
    first_row = syms[:n]
    first_col = np.concatenate(([first_row[0]], syms[n : n + m - 1]))
    b = syms[n + m - 1 :]
    A = _toeplitz_from(first_row, first_col)
    bits = (2 * m + n - 1) * _bits_per_symbol(q)
    return MultiBinHash(field, A, b, r, "toeplitz", random_bits=float(bits))


def sample_sparse_toeplitz(
    field: FieldSpec, m: int, n: int, r: int, rng: np.random.Generator, density: float
) -> MultiBinHash:
    """Toeplitz with Bernoulli(density) first row/column entries; q = 2 only.

    The q-ary sparse variant is unspecified, so it is refused rather than
    guessed.  b stays uniform, which keeps the marginal Pr(h(x) = y) = 2^-m.
    """
    if field.q != 2:
        raise ValueError("sparse Toeplitz hashing is defined for q = 2 only")
    if not 0.0 < density <= 0.5:
        raise ValueError(f"density must be in (0, 0.5], got {density}")
    if m < 1 or n < 1:
        raise ValueError(f"bad hash dimensions m={m}, n={n}")
    u = rng.random(m + n - 1)
    entries = (u < density).astype(np.int64)
    first_row = entries[:n]
    first_col = np.concatenate(([first_row[0]], entries[n:]))
    b = rng.integers(0, 2, size=m, dtype=np.int64)
    A = _toeplitz_from(first_row, first_col)
    hp = -density * math.log2(density) - (1 - density) * math.log2(1 - density)
    bits = (m + n - 1) * hp + m
    return MultiBinHash(
        field, A, b, r, "sparse_toeplitz", random_bits=float(bits), density=density
    )


@functools.lru_cache(maxsize=None)
def _find_irreducible_over(spec_key: tuple, degree: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible of given degree over GF(q).

    Coefficients are element indices, low degree first, length degree + 1.
    Trial division against every monic polynomial of degree <= degree/2.
    """
    field = FieldSpec(*spec_key)
    q = field.q

    def poly_from(v: int, deg: int) -> list[int]:
        out = []
        for _ in range(deg):
            out.append(v % q)
            v //= q
        return out + [1]

    def poly_rem(a: list[int], mod: list[int]) -> list[int]:
        a = list(a)
        dm = len(mod) - 1
        while len(a) - 1 >= dm and any(a):
            while a and a[-1] == 0:
                a.pop()
            if len(a) - 1 < dm:
                break
            lead = a[-1]
            shift = len(a) - 1 - dm
            for i, c in enumerate(mod):
                a[shift + i] = field.sub(a[shift + i], field.mul(lead, c))
        while a and a[-1] == 0:
            a.pop()
        return a

    def irreducible(c: list[int]) -> bool:
        for x in range(q):
            acc = 0
            for coeff in reversed(c):
                acc = field.add(field.mul(acc, x), coeff)
            if acc == 0:
                return False
        for d in range(2, degree // 2 + 1):
            for v in range(q**d):
                if not poly_rem(c, poly_from(v, d)):
                    return False
        return True

    for v in range(q**degree):
        cand = poly_from(v, degree)
        if irreducible(cand):
            return tuple(cand)
    raise RuntimeError("irreducible search exhausted")  # mathematically unreachable


def fieldmult_matrix(field: FieldSpec, nu: np.ndarray, modulus: tuple[int, ...] | None = None) -> np.ndarray:
    """Materialize multiplication by phi(nu) in GF(q^n) as an n x n matrix over GF(q).

    The product phi(x) * phi(nu) is the polynomial convolution of x and nu
    reduced modulo an irreducible f of degree n, so the map is P @ Gamma with
    Gamma the (2n-1) x n convolution matrix of nu and P the reduction matrix
    whose column i holds the coefficients of zeta^i mod f.
    """
    nu = np.asarray(nu, dtype=np.int64)
    n = len(nu)
    f = modulus if modulus is not None else _find_irreducible_over(
        (field.p, field.k, field.modulus), n
    )
    gamma = np.zeros((2 * n - 1, n), dtype=np.int64)
    for i in range(2 * n - 1):
        for j in range(n):
            if 0 <= i - j < n:
                gamma[i, j] = nu[i - j]
    # columns of P: zeta^i mod f, built by repeated multiplication by zeta
    P = np.zeros((n, 2 * n - 1), dtype=np.int64)
    power = [1] + [0] * (n - 1)
    for i in range(2 * n - 1):
        P[:, i] = power
        lead = power[-1]
        power = [0] + power[:-1]
        if lead:
            for j in range(n):
                power[j] = field.sub(power[j], field.mul(lead, f[j]))
    return field.matmul(P, gamma)


def fieldmult_reference(field: FieldSpec, nu: np.ndarray, x: np.ndarray, m: int,
                        modulus: tuple[int, ...] | None = None) -> np.ndarray:
    """Reference pipeline: first m coordinates of phi^-1(phi(x) * phi(nu) mod f)."""
    nu = np.asarray(nu, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    n = len(nu)
    f = modulus if modulus is not None else _find_irreducible_over(
        (field.p, field.k, field.modulus), n
    )
    conv = [0] * (2 * n - 1)
    for i in range(n):
        for j in range(n):
            conv[i + j] = field.add(conv[i + j], field.mul(int(x[i]), int(nu[j])))
    # reduce modulo f
    for i in range(2 * n - 2, n - 1, -1):
        lead = conv[i]
        if lead:
            conv[i] = 0
            for j in range(n + 1):
                conv[i - n + j] = field.sub(conv[i - n + j], field.mul(lead, f[j]))
    return np.array(conv[:m], dtype=np.int64)


def sample_fieldmult(field: FieldSpec, m: int, n: int, r: int, rng: np.random.Generator) -> MultiBinHash:
    """Draw nu uniform on GF(q)^n, then b uniform on GF(q)^m; m + n symbols."""
    if not 1 <= m <= n:
        raise ValueError(f"field_mult requires 1 <= m <= n, got m={m}, n={n}")
    q = field.q
    syms = rng.integers(0, q, size=n + m, dtype=np.int64)
    nu, b = syms[:n], syms[n:]
    A = fieldmult_matrix(field, nu)[:m, :]
    bits = (m + n) * _bits_per_symbol(q)
    return MultiBinHash(
        field, A, b, r, "field_mult", random_bits=float(bits), nu=tuple(int(v) for v in nu)
    )


def sample_hash(
    field: FieldSpec,
    m: int,
    n: int,
    r: int,
    construction: str,
    rng: np.random.Generator,
    density: float | None = None,
) -> MultiBinHash:
    if construction == "dense":
        return sample_dense(field, m, n, r, rng)
    if construction == "toeplitz":
        return sample_toeplitz(field, m, n, r, rng)
    if construction == "sparse_toeplitz":
        if density is None:
            raise ValueError("sparse_toeplitz requires a density")
        return sample_sparse_toeplitz(field, m, n, r, rng, density)
    if construction == "field_mult":
        return sample_fieldmult(field, m, n, r, rng)
    raise ValueError(f"unknown construction {construction!r}")


@dataclass
class HashSampler:
    """Repeatable source of hashes for one (construction, m, n, r, seed) setting.

    Identical seeds yield identical hash streams.  Samplers are single-threaded
    objects; the hashes they produce are immutable and freely shareable.
    """

    field: FieldSpec
    m: int
    n: int
    r: int
    construction: str = "dense"
    seed: int = 0
    density: float | None = None

    def __post_init__(self):
        self._rng = np.random.Generator(np.random.Philox(key=np.array([self.seed, 0], dtype=np.uint64)))

    def sample(self) -> MultiBinHash:
        h = sample_hash(self.field, self.m, self.n, self.r, self.construction, self._rng, self.density)
        return dataclasses.replace(h, seed=self.seed)


# ---------------------------------------------------------------------------
# exhaustive family audit


@dataclass
class AuditReport:
    construction: str
    q: int
    r: int
    m: int
    n: int
    family_size: int
    target_marginal: float  # (r/q)^m
    target_joint: float  # (r/q)^{2m}
    max_marginal_deviation: float
    max_joint_deviation: float
    marginal_exact: bool  # integer-count equality, meaningless when weighted
    joint_exact: bool
    weighted: bool  # true for sparse families (non-uniform members)

    @property
    def exact(self) -> bool:
        return self.marginal_exact and self.joint_exact

    def to_json(self) -> dict:
        return {
            "construction": self.construction,
            "q": self.q,
            "r": self.r,
            "m": self.m,
            "n": self.n,
            "family_size": self.family_size,
            "target_marginal": self.target_marginal,
            "target_joint": self.target_joint,
            "max_marginal_deviation": self.max_marginal_deviation,
            "max_joint_deviation": self.max_joint_deviation,
            "marginal_exact": self.marginal_exact,
            "joint_exact": self.joint_exact,
            "weighted": self.weighted,
            "exact": self.exact,
        }


def _iter_family(construction, field, m, n, density):
    """Yield (A_matrix, weight) for every distinct matrix part of the family."""
    q = field.q
    if construction == "dense":
        for flat in enumerate_vectors(q, m * n):
            yield flat.reshape(m, n), 1.0
    elif construction == "toeplitz":
        for sym in enumerate_vectors(q, m + n - 1):
            first_row = sym[:n]
            first_col = np.concatenate(([sym[0]], sym[n:]))
            yield _toeplitz_from(first_row, first_col), 1.0
    elif construction == "sparse_toeplitz":
        for sym in enumerate_vectors(2, m + n - 1):
            ones = int(sym.sum())
            w = density**ones * (1 - density) ** (m + n - 1 - ones)
            first_row = sym[:n]
            first_col = np.concatenate(([sym[0]], sym[n:]))
            yield _toeplitz_from(first_row, first_col), w
    elif construction == "field_mult":
        for nu in enumerate_vectors(q, n):
            yield fieldmult_matrix(field, nu)[:m, :], 1.0
    else:
        raise ValueError(f"unknown construction {construction!r}")


def _family_matrix_count(construction, q, m, n) -> int:
    if construction == "dense":
        return q ** (m * n)
    if construction in ("toeplitz", "sparse_toeplitz"):
        base = 2 if construction == "sparse_toeplitz" else q
        return base ** (m + n - 1)
    if construction == "field_mult":
        return q**n
    raise ValueError(f"unknown construction {construction!r}")


def pairwise_independence_audit(
    construction: str,
    q: int,
    r: int,
    m: int,
    n: int,
    density: float | None = None,
) -> AuditReport:
    """Exhaustively enumerate a hash family and compare its acceptance statistics
    against the pairwise-independent ideal.

    For every configuration the marginal Pr(accept) is compared with (r/q)^m and
    every distinct pair's joint probability with (r/q)^{2m}.  For the uniform
    families the comparison is exact integer counting; the sparse family is
    weighted and only the float deviations are reported.
    """
    field = FieldSpec.of(q)
    if construction == "sparse_toeplitz" and density is None:
        raise ValueError("sparse_toeplitz audit requires a density")
    n_mats = _family_matrix_count(construction, q, m, n)
    family = n_mats * q**m
    if family > AUDIT_FAMILY_LIMIT or family * q**n > AUDIT_WORK_LIMIT:
        raise ValueError(f"family of size {family} too large to enumerate")

    sigmas = enumerate_vectors(q, n)  # (q^n, n)
    offsets = enumerate_vectors(q, m)  # (q^m, m)
    N = len(sigmas)
    weighted = construction == "sparse_toeplitz"

    cnt_dtype = np.float64 if weighted else np.int64
    marginal = np.zeros(N, dtype=cnt_dtype)
    joint = np.zeros((N, N), dtype=cnt_dtype)

    for A, w in _iter_family(construction, field, m, n, density):
        if field.k == 1:
            H = (sigmas @ A.T) % q  # (q^n, m)
            vals = (H[:, None, :] + offsets[None, :, :]) % q
        else:
            H = np.stack([field.matvec(A, s) for s in sigmas])
            vals = field.add_arr(H[:, None, :], offsets[None, :, :])
        Z = (vals < r).all(axis=2)  # (q^n, q^m)
        if weighted:
            marginal += w * Z.sum(axis=1)
            joint += w * (Z @ Z.T)
        else:
            marginal += Z.sum(axis=1)
            joint += Z.astype(np.int64) @ Z.T.astype(np.int64)

    target_m = (r / q) ** m
    target_j = (r / q) ** (2 * m)
    off_diag = ~np.eye(N, dtype=bool)
    max_marg_dev = float(np.abs(marginal / family - target_m).max())
    max_joint_dev = float(np.abs(joint[off_diag] / family - target_j).max()) if N > 1 else 0.0

    if weighted:
        marg_exact = joint_exact = False
    else:
        # integer-count comparison: count * q^m == family * r^m, no tolerance
        marg_exact = bool(np.all(marginal.astype(object) * q**m == family * r**m))
        joint_exact = bool(
            np.all(joint[off_diag].astype(object) * q ** (2 * m) == family * r ** (2 * m))
        )

    return AuditReport(
        construction=construction,
        q=q,
        r=r,
        m=m,
        n=n,
        family_size=family,
        target_marginal=target_m,
        target_joint=target_j,
        max_marginal_deviation=max_marg_dev,
        max_joint_deviation=max_joint_dev,
        marginal_exact=marg_exact,
        joint_exact=joint_exact,
        weighted=weighted,
    )
