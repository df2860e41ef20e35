"""Exact arithmetic over GF(q) for prime-power q, with a fixed total element ordering.

Elements are represented by their ordering index, an integer in [0, q-1].
For q = p^k with k > 1 the index encodes the coefficient vector of the
residue polynomial in base p, least-significant coefficient first, so the
ordering a_0 < a_1 < ... < a_{q-1} is canonical and serializable.  The
prime subfield therefore occupies indices 0..p-1 in the natural order.

Vectors and matrices of field elements are plain integer numpy arrays of
indices; all operations validate that indices are in range only at the
boundaries (construction / deserialization), not in inner loops.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field as dataclass_field

import numpy as np

TABLE_LIMIT = 256  # precompute add/mul/inv tables up to this field size
SEARCH_LIMIT = 1 << 20  # guard for irreducible-polynomial trial search


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def factor_prime_power(q: int) -> tuple[int, int]:
    """Return (p, k) with q = p^k, or raise ValueError if q is not a prime power."""
    if q < 2:
        raise ValueError(f"field size must be >= 2, got {q}")
    for p in range(2, q + 1):
        if q % p == 0:
            if not is_prime(p):
                break
            k = 0
            m = q
            while m % p == 0:
                m //= p
                k += 1
            if m != 1:
                break
            return p, k
    raise ValueError(f"{q} is not a prime power")


# ---------------------------------------------------------------------------
# polynomial helpers over F_p (coefficient lists, index 0 = constant term)


def _poly_trim(c: list[int]) -> list[int]:
    while c and c[-1] == 0:
        c.pop()
    return c


def _poly_mod(a: list[int], m: list[int], p: int) -> list[int]:
    """Remainder of a divided by monic m, coefficients mod p."""
    a = [x % p for x in a]
    dm = len(m) - 1
    inv_lead = pow(m[-1], p - 2, p) if m[-1] != 1 else 1
    while len(_poly_trim(a)) - 1 >= dm:
        shift = len(a) - 1 - dm
        factor = (a[-1] * inv_lead) % p
        for i, c in enumerate(m):
            a[shift + i] = (a[shift + i] - factor * c) % p
        _poly_trim(a)
    return a


def _poly_mul(a: list[int], b: list[int], p: int) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return out


def _is_irreducible(c: list[int], p: int) -> bool:
    """Exhaustive trial division by all monic polynomials of degree <= deg/2."""
    k = len(c) - 1
    # degree-1 factors == roots
    for x in range(p):
        acc = 0
        for coeff in reversed(c):
            acc = (acc * x + coeff) % p
        if acc == 0:
            return False
    for d in range(2, k // 2 + 1):
        for v in range(p**d):
            div = _digits(v, p, d) + [1]
            if not _poly_trim(_poly_mod(list(c), div, p)):
                return False
    return True


def _digits(v: int, p: int, k: int) -> list[int]:
    out = []
    for _ in range(k):
        out.append(v % p)
        v //= p
    return out


@functools.lru_cache(maxsize=None)
def find_irreducible(p: int, k: int) -> tuple[int, ...]:
    """Lexicographically smallest monic irreducible polynomial of degree k over F_p.

    Returned as a coefficient tuple (c_0, ..., c_k) with c_k = 1.  Lexicographic
    means smallest base-p encoding of the low coefficients, so results are
    reproducible across runs.  k = 1 returns (0, 1), i.e. the polynomial x.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")
    if p**k > SEARCH_LIMIT:
        raise ValueError(f"p^k = {p**k} exceeds trial-search limit {SEARCH_LIMIT}")
    if k == 1:
        return (0, 1)
    for v in range(p**k):
        cand = _digits(v, p, k) + [1]
        if _is_irreducible(cand, p):
            return tuple(cand)
    raise RuntimeError(f"no irreducible polynomial of degree {k} over F_{p}")  # unreachable


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldSpec:
    """The finite field F_q, q = p^k, with the fixed ordering a_0 < ... < a_{q-1}.

    Immutable after construction; the precomputed tables make every operation
    pure and safe to share across threads.
    """

    p: int
    k: int
    modulus: tuple[int, ...]  # empty for k == 1
    _tables: dict = dataclass_field(default=None, repr=False, compare=False)

    @staticmethod
    @functools.lru_cache(maxsize=None)
    def of(q: int, modulus: tuple[int, ...] | None = None) -> "FieldSpec":
        p, k = factor_prime_power(q)
        if k == 1:
            if modulus:
                raise ValueError("prime fields take no modulus")
            return FieldSpec(p, 1, ())
        mod = tuple(modulus) if modulus is not None else find_irreducible(p, k)
        return FieldSpec(p, k, mod)

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")
        if self.k < 1:
            raise ValueError("extension degree must be >= 1")
        if self.k > 1:
            if len(self.modulus) != self.k + 1 or self.modulus[-1] != 1:
                raise ValueError("modulus must be monic of degree k")
            if any(not 0 <= c < self.p for c in self.modulus):
                raise ValueError("modulus coefficients out of range")
            if not _is_irreducible(list(self.modulus), self.p):
                raise ValueError(f"modulus {self.modulus} is reducible over F_{self.p}")
        elif self.modulus:
            raise ValueError("prime fields take no modulus")
        if self.q > TABLE_LIMIT and self.k > 1:
            raise ValueError(f"extension fields limited to q <= {TABLE_LIMIT}")
        object.__setattr__(self, "_tables", self._build_tables())

    @property
    def q(self) -> int:
        return self.p**self.k

    # -- element codecs ----------------------------------------------------

    def coeffs(self, index: int) -> list[int]:
        """Coefficient vector of element a_index, least-significant first."""
        return _digits(index, self.p, self.k)

    def index(self, coeffs: list[int]) -> int:
        v = 0
        for c in reversed(coeffs[: self.k]):
            v = v * self.p + (c % self.p)
        return v

    def _build_tables(self) -> dict:
        q, p = self.q, self.p
        if self.k == 1:
            if q > TABLE_LIMIT:
                return {}
            idx = np.arange(q, dtype=np.int64)
            add = (idx[:, None] + idx[None, :]) % p
            mul = (idx[:, None] * idx[None, :]) % p
        else:
            add = np.zeros((q, q), dtype=np.int64)
            mul = np.zeros((q, q), dtype=np.int64)
            vecs = [self.coeffs(i) for i in range(q)]
            for i in range(q):
                for j in range(q):
                    add[i, j] = self.index([(a + b) % p for a, b in zip(vecs[i], vecs[j])])
                    prod = _poly_mod(_poly_mul(vecs[i], vecs[j], p), list(self.modulus), p)
                    mul[i, j] = self.index(prod + [0] * (self.k - len(prod)))
        neg = np.zeros(q, dtype=np.int64)
        inv = np.zeros(q, dtype=np.int64)
        for i in range(q):
            neg[i] = int(np.nonzero(add[i] == 0)[0][0])
            if i:
                inv[i] = int(np.nonzero(mul[i] == 1)[0][0])
        return {"add": add, "mul": mul, "neg": neg, "inv": inv}

    # -- scalar operations ---------------------------------------------------

    def _check(self, *elems: int) -> None:
        for e in elems:
            if not 0 <= e < self.q:
                raise ValueError(f"element index {e} out of range for GF({self.q})")

    def add(self, a: int, b: int) -> int:
        self._check(a, b)
        if self.k == 1:
            return (a + b) % self.p
        return int(self._tables["add"][a, b])

    def mul(self, a: int, b: int) -> int:
        self._check(a, b)
        if self.k == 1:
            return (a * b) % self.p
        return int(self._tables["mul"][a, b])

    def neg(self, a: int) -> int:
        self._check(a)
        if self.k == 1:
            return (-a) % self.p
        return int(self._tables["neg"][a])

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def inv(self, a: int) -> int:
        self._check(a)
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        if self.k == 1:
            return pow(a, self.p - 2, self.p)
        return int(self._tables["inv"][a])

    # -- array operations (element indices as int64 arrays) -----------------

    def add_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.k == 1:
            return (a + b) % self.p
        return self._tables["add"][a, b]

    def mul_arr(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.k == 1:
            return (a * b) % self.p
        return self._tables["mul"][a, b]

    def matvec(self, A: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Field matrix-vector product, A of shape (m, n), x of shape (n,)."""
        A = np.asarray(A, dtype=np.int64)
        x = np.asarray(x, dtype=np.int64)
        if A.ndim != 2 or A.shape[1] != x.shape[0]:
            raise ValueError(f"shape mismatch: {A.shape} @ {x.shape}")
        if self.k == 1:
            return (A @ x) % self.p
        out = np.zeros(A.shape[0], dtype=np.int64)
        for j in range(A.shape[1]):
            out = self.add_arr(out, self.mul_arr(A[:, j], x[j]))
        return out

    def matmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if A.shape[1] != B.shape[0]:
            raise ValueError(f"shape mismatch: {A.shape} @ {B.shape}")
        if self.k == 1:
            return (A @ B) % self.p
        out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
        for i in range(A.shape[0]):
            for j in range(B.shape[1]):
                acc = 0
                for l in range(A.shape[1]):
                    acc = self.add(acc, self.mul(int(A[i, l]), int(B[l, j])))
                out[i, j] = acc
        return out

    # -- serialization -------------------------------------------------------

    def to_config(self) -> dict:
        return {"p": self.p, "k": self.k, "modulus": list(self.modulus)}

    @staticmethod
    def from_config(cfg: dict) -> "FieldSpec":
        return FieldSpec(int(cfg["p"]), int(cfg["k"]), tuple(cfg.get("modulus", ())))


def vector_less(x: np.ndarray, y: np.ndarray) -> bool:
    """Strict coordinate-wise order on index vectors: true iff x_i < y_i for all i."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return bool(np.all(x < y))


def enumerate_vectors(q: int, n: int) -> np.ndarray:
    """All q^n index vectors in lexicographic order (first coordinate most significant).

    Row i is the vector of lexicographic rank i; this fixes the config <-> integer
    convention used by weight tables throughout the package.
    """
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    out = np.empty((q**n, n), dtype=np.int64)
    ramp = np.arange(q**n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[:, j] = ramp % q
        ramp //= q
    return out


def vector_rank(x: np.ndarray, q: int) -> int:
    """Lexicographic rank of an index vector (inverse of enumerate_vectors rows)."""
    r = 0
    for v in np.asarray(x).tolist():
        r = r * q + int(v)
    return r


def rank_vector(rank: int, q: int, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[j] = rank % q
        rank //= q
    if rank:
        raise ValueError("rank out of range")
    return out
