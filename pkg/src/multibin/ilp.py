"""Solver-neutral text export of MAX-oracle queries.

The grammar ("mbilp", version 1) is line oriented; `#` starts a comment.

    mbilp 1
    q <int>                     field size (prime fields only)
    n <int>                     number of q-ary variables x0..x{n-1}
    onehot x<j> : x<j>v0 ... x<j>v{q-1}
                                binary indicators, exactly one per group is 1;
                                value(x<j>) = sum_v v * x<j>v<v>
    modrow coeffs c_1 .. c_n offset b rank r
                                sum_j c_j * value(x<j>) + b  ==  s  (mod q)
                                for some s with 0 <= s < r.  ILP expansion:
                                sum_j c_j*value(x<j>) + b = s + q*aux,
                                aux >= 0 integer, 0 <= s <= r-1.
    diff x<i> x<j>              value(x<i>) != value(x<j>)
    bound x<j> <v>              value(x<j>) <= v
    obj x<j>v<v> <float>        objective coefficient of one binary
    forbid x<j>v<v>             binary fixed to 0 (log-weight -inf)
    end

The objective is maximized and is the log of the configuration weight, so the
oracle value equals exp(objective).  An infeasible program means the
constrained maximum weight is 0.  ``parse_ilp`` + ``solve_parsed`` give an
in-repo reference consumer used to round-trip the encoding against the
exhaustive oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .oracle import MultiBin, MultiBinPermutation, OracleQuery

PARSE_SOLVE_LIMIT = 10**6


class ExportUnsupported(ValueError):
    """The query cannot be expressed in the export grammar."""


@dataclass
class IlpProblem:
    q: int
    n: int
    rows: list[tuple[list[int], int, int]] = dataclass_field(default_factory=list)
    diffs: list[tuple[int, int]] = dataclass_field(default_factory=list)
    bounds: dict[int, int] = dataclass_field(default_factory=dict)
    objective: np.ndarray | None = None  # (n, q), -inf for forbidden


def export_ilp(query: OracleQuery, path) -> None:
    """Write the query as an mbilp file; refuses unsupported shapes.

    Only multi-bin (optionally permutation) constraints over prime fields are
    encodable, and only weight models exposing a separable log-linear
    objective (a ``linear_objective()`` method).
    """
    c = query.constraint
    if isinstance(c, MultiBin):
        h, permutation = c.hash, False
        thresholds = c.thresholds
    elif isinstance(c, MultiBinPermutation):
        if c.hash is None:
            raise ExportUnsupported("permutation query without hash rows has no bins to encode")
        h, permutation = c.hash, True
        thresholds = c.thresholds
    else:
        raise ExportUnsupported(f"constraint {type(c).__name__} is not exportable")
    if h.field.k != 1:
        raise ExportUnsupported("export encodes prime-field arithmetic only")
    objective_fn = getattr(query.weight, "linear_objective", None)
    if objective_fn is None:
        raise ExportUnsupported(
            f"weight model {type(query.weight).__name__} exposes no separable "
            "log-linear objective"
        )
    obj = np.asarray(objective_fn(), dtype=np.float64)
    q, n = h.field.q, h.n
    if obj.shape != (n, q):
        raise ExportUnsupported(f"objective shape {obj.shape} does not match ({n}, {q})")
    thr = [h.r] * h.m if thresholds is None else [int(v) for v in thresholds]

    lines = ["mbilp 1", f"q {q}", f"n {n}"]
    for j in range(n):
        names = " ".join(f"x{j}v{v}" for v in range(q))
        lines.append(f"onehot x{j} : {names}")
    for row_idx in range(h.m):
        coeffs = " ".join(str(int(v)) for v in h.A[row_idx])
        lines.append(
            f"modrow coeffs {coeffs} offset {int(h.b[row_idx])} rank {thr[row_idx]}"
        )
    if permutation:
        for i in range(n):
            for j in range(i + 1, n):
                lines.append(f"diff x{i} x{j}")
        bound = getattr(query.weight, "n", n) - 1
        for j in range(n):
            lines.append(f"bound x{j} {bound}")
    for j in range(n):
        for v in range(q):
            coeff = float(obj[j, v])
            if math.isinf(coeff) and coeff < 0:
                lines.append(f"forbid x{j}v{v}")
            else:
                lines.append(f"obj x{j}v{v} {coeff!r}")
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_ilp(path) -> IlpProblem:
    with open(path) as fh:
        raw = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in raw if ln]
    if not lines or lines[0].split() != ["mbilp", "1"]:
        raise ValueError("not an mbilp version 1 file")
    prob = IlpProblem(q=0, n=0)
    for ln in lines[1:]:
        tok = ln.split()
        if tok[0] == "q":
            prob.q = int(tok[1])
        elif tok[0] == "n":
            prob.n = int(tok[1])
            prob.objective = np.zeros((prob.n, prob.q))
        elif tok[0] == "onehot":
            pass  # group structure is implied by the naming scheme
        elif tok[0] == "modrow":
            assert tok[1] == "coeffs"
            coeffs = [int(v) for v in tok[2 : 2 + prob.n]]
            assert tok[2 + prob.n] == "offset" and tok[4 + prob.n] == "rank"
            prob.rows.append((coeffs, int(tok[3 + prob.n]), int(tok[5 + prob.n])))
        elif tok[0] == "diff":
            prob.diffs.append((int(tok[1][1:]), int(tok[2][1:])))
        elif tok[0] == "bound":
            prob.bounds[int(tok[1][1:])] = int(tok[2])
        elif tok[0] == "obj":
            j, v = _binary_name(tok[1])
            prob.objective[j, v] = float(tok[2])
        elif tok[0] == "forbid":
            j, v = _binary_name(tok[1])
            prob.objective[j, v] = -math.inf
        elif tok[0] == "end":
            break
        else:
            raise ValueError(f"unknown directive {tok[0]!r}")
    return prob


def _binary_name(name: str) -> tuple[int, int]:
    j, v = name[1:].split("v")
    return int(j), int(v)


def solve_parsed(prob: IlpProblem) -> tuple[float, np.ndarray | None]:
    """Brute-force reference solver for parsed files.

    Returns (max weight, argmax assignment); infeasible programs yield (0, None).
    """
    from .field import enumerate_vectors

    if prob.q**prob.n > PARSE_SOLVE_LIMIT:
        raise ValueError("parsed problem too large for the reference solver")
    configs = enumerate_vectors(prob.q, prob.n)
    ok = np.ones(len(configs), dtype=bool)
    for coeffs, offset, rank in prob.rows:
        vals = (configs @ np.asarray(coeffs) + offset) % prob.q
        ok &= vals < rank
    for i, j in prob.diffs:
        ok &= configs[:, i] != configs[:, j]
    for j, v in prob.bounds.items():
        ok &= configs[:, j] <= v
    logw = prob.objective[np.arange(prob.n)[None, :], configs].sum(axis=1)
    logw = np.where(ok, logw, -np.inf)
    best = int(np.argmax(logw))
    if math.isinf(logw[best]) and logw[best] < 0:
        return 0.0, None
    return float(math.exp(logw[best])), configs[best]
