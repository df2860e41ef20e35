"""Weight models: Potts exponentials, total-variation integrands, lookup tables.

Every model exposes the same small surface the oracle and estimators need:
``q`` and ``n`` fixing the domain GF(q)^n, and ``bulk_weight`` /
``bulk_log_weight`` evaluating batches of configuration rows (element indices,
first coordinate most significant in the table ordering).  Weights are
computed in log space internally and exponentiated on demand, so deep-cold
Potts instances do not underflow.

Exact brute-force integrators over the full domain live here as well; they
are the ground truth the estimators are validated against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .field import enumerate_vectors

EXACT_SUM_LIMIT = 10**8
_CHUNK = 1 << 16


def _config_chunk(q: int, n: int, start: int, stop: int) -> np.ndarray:
    ramp = np.arange(start, stop, dtype=np.int64)
    out = np.empty((stop - start, n), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        out[:, j] = ramp % q
        ramp //= q
    return out


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    if math.isinf(m):
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


@dataclass(frozen=True)
class PottsModel:
    """Exponential-family weight on vertex labelings of an undirected graph.

    w(sigma) = exp(-zeta * (J * #{edges with equal labels} +
                            H * #{vertices labeled 0})).
    """

    vertices: int
    edges: tuple[tuple[int, int], ...]
    q: int
    zeta: float
    J: float = 0.1
    H: float = 0.1

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.vertices and 0 <= v < self.vertices):
                raise ValueError(f"edge ({u},{v}) references a missing vertex")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))

    @property
    def n(self) -> int:
        return self.vertices

    def bulk_log_weight(self, configs: np.ndarray) -> np.ndarray:
        configs = np.asarray(configs)
        cost = np.zeros(configs.shape[0], dtype=np.float64)
        for u, v in self.edges:
            cost += self.J * (configs[:, u] == configs[:, v])
        cost += self.H * np.count_nonzero(configs == 0, axis=1)
        return -self.zeta * cost

    def bulk_weight(self, configs: np.ndarray) -> np.ndarray:
        return np.exp(self.bulk_log_weight(configs))

    def log_weight(self, sigma) -> float:
        return float(self.bulk_log_weight(np.asarray(sigma).reshape(1, -1))[0])

    def weight(self, sigma) -> float:
        return math.exp(self.log_weight(sigma))

    def to_config(self) -> dict:
        return {
            "type": "potts",
            "vertices": self.vertices,
            "edges": [list(e) for e in self.edges],
            "q": self.q,
            "zeta": self.zeta,
            "J": self.J,
            "H": self.H,
        }

    @staticmethod
    def from_config(cfg: dict) -> "PottsModel":
        return PottsModel(
            vertices=int(cfg["vertices"]),
            edges=tuple((int(u), int(v)) for u, v in cfg["edges"]),
            q=int(cfg["q"]),
            zeta=float(cfg["zeta"]),
            J=float(cfg.get("J", 0.1)),
            H=float(cfg.get("H", 0.1)),
        )


def random_regular_graph(n: int, d: int, seed: int) -> tuple[tuple[int, int], ...]:
    """Simple d-regular graph on n vertices via the pairing model.

    Stubs are shuffled and paired; draws containing a self-loop or repeated
    edge are rejected wholesale and retried, so the result is a uniform-ish
    simple pairing and deterministic per seed.
    """
    if n * d % 2:
        raise ValueError("n*d must be even")
    if d >= n:
        raise ValueError("degree must be below vertex count")
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 4 << 48], dtype=np.uint64)))
    stubs = np.repeat(np.arange(n), d)
    for _ in range(1000):
        perm = rng.permutation(stubs)
        pairs = perm.reshape(-1, 2)
        edges = set()
        ok = True
        for u, v in pairs:
            u, v = int(u), int(v)
            if u == v or (min(u, v), max(u, v)) in edges:
                ok = False
                break
            edges.add((min(u, v), max(u, v)))
        if ok:
            return tuple(sorted(edges))
    raise RuntimeError(f"pairing model failed to produce a simple {d}-regular graph")


@dataclass(frozen=True)
class ProductDistributionPair:
    """Two product distributions P^n, Q^n on {0..q-1}^n; the weight is the
    total-variation integrand |P(sigma) - Q(sigma)| / 2."""

    P: tuple[float, ...]
    Q: tuple[float, ...]
    n: int

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        Q = np.asarray(self.Q, dtype=np.float64)
        if P.shape != Q.shape or P.ndim != 1:
            raise ValueError("P and Q must be equal-length vectors")
        for name, vec in (("P", P), ("Q", Q)):
            if vec.min() < 0:
                raise ValueError(f"{name} has a negative entry")
            if abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} does not sum to 1")
        object.__setattr__(self, "P", tuple(float(x) for x in P))
        object.__setattr__(self, "Q", tuple(float(x) for x in Q))

    @property
    def q(self) -> int:
        return len(self.P)

    def likelihoods(self, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        P = np.asarray(self.P)
        Q = np.asarray(self.Q)
        return P[configs].prod(axis=1), Q[configs].prod(axis=1)

    def bulk_weight(self, configs: np.ndarray) -> np.ndarray:
        p, q_ = self.likelihoods(np.asarray(configs))
        return np.abs(p - q_) / 2.0

    def bulk_log_weight(self, configs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.bulk_weight(configs))

    def weight(self, sigma) -> float:
        return float(self.bulk_weight(np.asarray(sigma).reshape(1, -1))[0])

    def to_config(self) -> dict:
        return {"type": "product", "P": list(self.P), "Q": list(self.Q), "n": self.n}

    @staticmethod
    def from_config(cfg: dict) -> "ProductDistributionPair":
        return ProductDistributionPair(tuple(cfg["P"]), tuple(cfg["Q"]), int(cfg["n"]))


@dataclass(frozen=True)
class MarkovChainPair:
    """Two first-order chains over q states compared over n steps."""

    P0: tuple[float, ...]
    Q0: tuple[float, ...]
    TP: tuple[tuple[float, ...], ...]
    TQ: tuple[tuple[float, ...], ...]
    n: int

    def __post_init__(self):
        P0 = np.asarray(self.P0, dtype=np.float64)
        Q0 = np.asarray(self.Q0, dtype=np.float64)
        TP = np.asarray(self.TP, dtype=np.float64)
        TQ = np.asarray(self.TQ, dtype=np.float64)
        q = len(P0)
        if Q0.shape != (q,) or TP.shape != (q, q) or TQ.shape != (q, q):
            raise ValueError("inconsistent chain dimensions")
        for name, vec in (("P0", P0), ("Q0", Q0)):
            if abs(vec.sum() - 1.0) > 1e-9 or vec.min() < 0:
                raise ValueError(f"{name} is not a distribution")
        for name, mat in (("TP", TP), ("TQ", TQ)):
            if mat.min() < 0 or np.abs(mat.sum(axis=1) - 1.0).max() > 1e-9:
                raise ValueError(f"{name} rows must sum to 1")
        object.__setattr__(self, "P0", tuple(map(float, P0)))
        object.__setattr__(self, "Q0", tuple(map(float, Q0)))
        object.__setattr__(self, "TP", tuple(tuple(map(float, row)) for row in TP))
        object.__setattr__(self, "TQ", tuple(tuple(map(float, row)) for row in TQ))

    @property
    def q(self) -> int:
        return len(self.P0)

    def likelihoods(self, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        configs = np.asarray(configs)
        P0 = np.asarray(self.P0)
        Q0 = np.asarray(self.Q0)
        TP = np.asarray(self.TP)
        TQ = np.asarray(self.TQ)
        p = P0[configs[:, 0]].copy()
        q_ = Q0[configs[:, 0]].copy()
        for t in range(1, configs.shape[1]):
            p *= TP[configs[:, t - 1], configs[:, t]]
            q_ *= TQ[configs[:, t - 1], configs[:, t]]
        return p, q_

    def bulk_weight(self, configs: np.ndarray) -> np.ndarray:
        p, q_ = self.likelihoods(configs)
        return np.abs(p - q_) / 2.0

    def bulk_log_weight(self, configs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.bulk_weight(configs))

    def weight(self, sigma) -> float:
        return float(self.bulk_weight(np.asarray(sigma).reshape(1, -1))[0])

    def to_config(self) -> dict:
        return {
            "type": "markov",
            "P0": list(self.P0),
            "Q0": list(self.Q0),
            "TP": [list(r) for r in self.TP],
            "TQ": [list(r) for r in self.TQ],
            "n": self.n,
        }

    @staticmethod
    def from_config(cfg: dict) -> "MarkovChainPair":
        return MarkovChainPair(
            tuple(cfg["P0"]), tuple(cfg["Q0"]),
            tuple(tuple(r) for r in cfg["TP"]), tuple(tuple(r) for r in cfg["TQ"]),
            int(cfg["n"]),
        )


class TableWeight:
    """Explicit nonnegative weight table over GF(q)^n, lexicographic order."""

    def __init__(self, q: int, n: int, table):
        table = np.ascontiguousarray(table, dtype=np.float64)
        if table.shape != (q**n,):
            raise ValueError(f"table must cover the whole domain, expected {q**n} entries")
        if table.min() < 0:
            raise ValueError("weights must be nonnegative")
        self.q = q
        self.n = n
        self.table = table

    def _ranks(self, configs: np.ndarray) -> np.ndarray:
        configs = np.asarray(configs, dtype=np.int64)
        ranks = np.zeros(configs.shape[0], dtype=np.int64)
        for j in range(self.n):
            ranks = ranks * self.q + configs[:, j]
        return ranks

    def bulk_weight(self, configs: np.ndarray) -> np.ndarray:
        return self.table[self._ranks(configs)]

    def bulk_log_weight(self, configs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.bulk_weight(configs))

    def weight(self, sigma) -> float:
        return float(self.bulk_weight(np.asarray(sigma).reshape(1, -1))[0])

    def to_config(self) -> dict:
        return {"type": "table", "q": self.q, "n": self.n, "weights": self.table.tolist()}

    @staticmethod
    def from_config(cfg: dict) -> "TableWeight":
        return TableWeight(int(cfg["q"]), int(cfg["n"]), cfg["weights"])


def tv_weight(pair, sigma) -> float:
    """|P(sigma) - Q(sigma)| / 2 for a product or Markov pair."""
    return pair.weight(sigma)


def weight_table(model) -> np.ndarray:
    """Full weight table of a q-ary model in lexicographic order, chunked."""
    size = model.q**model.n
    if size > EXACT_SUM_LIMIT:
        raise ValueError(f"domain of size {size} too large to tabulate")
    out = np.empty(size, dtype=np.float64)
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        out[start:stop] = model.bulk_weight(_config_chunk(model.q, model.n, start, stop))
    return out


def exact_sum(model) -> float:
    """Brute-force sum of the weight over the whole domain (chunked)."""
    size = model.q**model.n
    if size > EXACT_SUM_LIMIT:
        raise ValueError(f"domain of size {size} too large for brute force")
    total = 0.0
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        total += float(np.sum(model.bulk_weight(_config_chunk(model.q, model.n, start, stop))))
    return total


def log_exact_partition(model: PottsModel) -> float:
    """log Z by streaming log-sum-exp over all labelings."""
    size = model.q**model.n
    if size > EXACT_SUM_LIMIT:
        raise ValueError(f"domain of size {size} too large for brute force")
    partials = []
    for start in range(0, size, _CHUNK):
        stop = min(start + _CHUNK, size)
        logw = model.bulk_log_weight(_config_chunk(model.q, model.n, start, stop))
        partials.append(_logsumexp(logw))
    return _logsumexp(np.asarray(partials))


def exact_partition(model: PottsModel) -> float:
    return math.exp(log_exact_partition(model))


def exact_tv(pair) -> float:
    """Brute-force total variation distance between the two joint laws."""
    return exact_sum(pair)


def hellinger_bracket(pair: ProductDistributionPair) -> tuple[float, float]:
    """Two-sided total-variation bounds from the Hellinger distance.

    With h(P,Q)^2 = sum_s (sqrt P(s) - sqrt Q(s))^2 per coordinate and the
    tensorization h(P^n,Q^n)^2 = 2 - 2 * prod_i (1 - h_i^2 / 2), the distance
    satisfies  h^2/2 <= TV <= h * sqrt(1 - h^2/4).  Defined for product pairs
    only; Markov pairs have no closed form and are refused.
    """
    if not isinstance(pair, ProductDistributionPair):
        raise TypeError("Hellinger bracket is only defined for product pairs")
    P = np.asarray(pair.P)
    Q = np.asarray(pair.Q)
    h1_sq = float(np.sum((np.sqrt(P) - np.sqrt(Q)) ** 2))
    h_sq = 2.0 - 2.0 * (1.0 - h1_sq / 2.0) ** pair.n
    h = math.sqrt(h_sq)
    return h_sq / 2.0, h * math.sqrt(1.0 - h_sq / 4.0)


_MODEL_TYPES = {
    "potts": PottsModel,
    "product": ProductDistributionPair,
    "markov": MarkovChainPair,
    "table": TableWeight,
}


def model_from_config(cfg: dict):
    kind = cfg.get("type")
    if kind not in _MODEL_TYPES:
        raise ValueError(f"unknown model type {kind!r}")
    return _MODEL_TYPES[kind].from_config(cfg)


def load_model(path):
    with open(path) as fh:
        return model_from_config(json.load(fh))
