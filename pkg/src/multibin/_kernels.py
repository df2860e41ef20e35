"""Enumeration kernels for the exhaustive MAX-oracle.

The constrained oracle scans configurations in weight-descending order and
returns the first one the hash accepts, which is the exact constrained
maximum.  The scan is the hot loop of every estimator run, so it is JIT
compiled when numba is available; a vectorized numpy implementation with
identical semantics is kept both as a fallback and as a cross-check target
for tests.  Results are identical across the two paths.
"""

from __future__ import annotations

import time

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only in stripped envs
    numba = None
    HAVE_NUMBA = False


def _scan_prime_py(configs, A, b, q, thresholds, start, stop):
    """First row index in [start, stop) whose hash value is coordinate-wise
    below the thresholds, or -1.  Prime fields (integer residues)."""
    m, n = A.shape
    for c in range(start, stop):
        ok = True
        for j in range(m):
            s = b[j]
            for k in range(n):
                s += A[j, k] * configs[c, k]
            if s % q >= thresholds[j]:
                ok = False
                break
        if ok:
            return c
    return -1


def _scan_tables_py(configs, A, b, add, mul, thresholds, start, stop):
    """Same contract, extension fields via add/mul tables."""
    m, n = A.shape
    for c in range(start, stop):
        ok = True
        for j in range(m):
            s = b[j]
            for k in range(n):
                s = add[s, mul[A[j, k], configs[c, k]]]
            if s >= thresholds[j]:
                ok = False
                break
        if ok:
            return c
    return -1


def _image_max_prime_py(zrows, G, shift, table, q, start, stop):
    """Max of table[rank(G z + shift)] over domain rows [start, stop); returns
    (best value, row index of the first maximizer), or (-inf, -1) when empty."""
    n = G.shape[0]
    best = -np.inf
    best_row = -1
    for d in range(start, stop):
        rank = 0
        for i in range(n):
            s = shift[i]
            for j in range(n):
                s += G[i, j] * zrows[d, j]
            rank = rank * q + s % q
        v = table[rank]
        if v > best:
            best = v
            best_row = d
    return best, best_row


def _basis_consume_py(cands, q, inv, basis, pivot_rows, positions, rank):
    """Feed candidate columns into an incremental mod-q elimination.

    Dependent candidates are skipped (that is the resampling), independent
    ones land in `basis`; pivot rows stay mutually reduced.  Returns
    (new rank, candidates consumed).
    """
    B, n = cands.shape
    red = np.empty(n, dtype=np.int64)
    used = 0
    for idx in range(B):
        if rank == n:
            break
        used = idx + 1
        for j in range(n):
            red[j] = cands[idx, j]
        for t in range(rank):
            c = red[positions[t]]
            if c != 0:
                for j in range(n):
                    red[j] = (red[j] - c * pivot_rows[t, j]) % q
        pos = -1
        for j in range(n):
            if red[j] != 0:
                pos = j
                break
        if pos < 0:
            continue
        iv = inv[red[pos]]
        for j in range(n):
            red[j] = (red[j] * iv) % q
        for t in range(rank):
            c = pivot_rows[t, pos]
            if c != 0:
                for j in range(n):
                    pivot_rows[t, j] = (pivot_rows[t, j] - c * red[j]) % q
        for j in range(n):
            pivot_rows[rank, j] = red[j]
            basis[j, rank] = cands[idx, j]
        positions[rank] = pos
        rank += 1
    return rank, used


if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    _scan_prime = _jit(_scan_prime_py)
    _scan_tables = _jit(_scan_tables_py)
    _image_max_prime = _jit(_image_max_prime_py)
    _basis_consume = _jit(_basis_consume_py)
else:  # pragma: no cover
    _scan_prime = _scan_prime_py
    _scan_tables = _scan_tables_py
    _image_max_prime = _image_max_prime_py
    _basis_consume = _basis_consume_py


def sample_basis_prime(q: int, n: int, rng, max_retries: int) -> np.ndarray:
    """Prime-field basis sampling: candidates drawn sequentially in batches."""
    inv = np.array([0] + [pow(v, q - 2, q) for v in range(1, q)], dtype=np.int64)
    basis = np.zeros((n, n), dtype=np.int64)
    pivot_rows = np.zeros((n, n), dtype=np.int64)
    positions = np.zeros(n, dtype=np.int64)
    rank = 0
    consumed = 0
    while rank < n:
        batch = rng.integers(0, q, size=(n - rank + 8, n), dtype=np.int64)
        rank, used = _basis_consume(batch, q, inv, basis, pivot_rows, positions, rank)
        consumed += used
        if consumed - rank > max_retries:
            raise RuntimeError("basis sampling exceeded the retry cap")
    return basis


def scan_first_accepted_numpy(configs, A, b, field, thresholds, start, stop):
    """Vectorized equivalent of the jitted scans; used as fallback/cross-check."""
    chunk = configs[start:stop].astype(np.int64)
    if field.k == 1:
        vals = (chunk @ A.T + b) % field.q
    else:
        add, mul = field._tables["add"], field._tables["mul"]
        m = A.shape[0]
        vals = np.empty((chunk.shape[0], m), dtype=np.int64)
        for j in range(m):
            acc = np.full(chunk.shape[0], b[j], dtype=np.int64)
            for k in range(A.shape[1]):
                acc = add[acc, mul[A[j, k], chunk[:, k]]]
            vals[:, j] = acc
    hits = np.nonzero(np.all(vals < thresholds, axis=1))[0]
    return int(start + hits[0]) if hits.size else -1


def first_accepted(configs, A, b, field, thresholds, start=0, stop=None,
                   chunk=16384, deadline=None, use_numba=True):
    """First accepted row index in [start, stop), honoring an optional deadline.

    Returns (index, exhausted): index -1 means nothing accepted within the
    scanned range; exhausted False means the deadline interrupted the scan.
    """
    if stop is None:
        stop = configs.shape[0]
    A = np.ascontiguousarray(A, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    thresholds = np.ascontiguousarray(thresholds, dtype=np.int64)
    if A.shape[0] == 0:  # no constraint rows: first config wins
        return (start, True) if start < stop else (-1, True)
    pos = start
    while pos < stop:
        end = min(pos + chunk, stop)
        if not use_numba:
            hit = scan_first_accepted_numpy(configs, A, b, field, thresholds, pos, end)
        elif field.k == 1:
            hit = _scan_prime(configs, A, b, field.q, thresholds, pos, end)
        else:
            tabs = field._tables
            hit = _scan_tables(configs, A, b, tabs["add"], tabs["mul"], thresholds, pos, end)
        if hit >= 0:
            return int(hit), True
        pos = end
        if deadline is not None and time.monotonic() > deadline:
            return -1, False
    return -1, True


def image_max(zrows, G, shift, table, q, chunk=1 << 15, deadline=None, use_numba=True):
    """Max of table[rank(G z + shift)] over all domain rows (prime fields).

    Returns (best, row, exhausted); the row is the first maximizer in domain
    order.  An expired deadline stops the scan and reports a lower bound.
    """
    zrows = np.ascontiguousarray(zrows, dtype=np.int64)
    G = np.ascontiguousarray(G, dtype=np.int64)
    shift = np.ascontiguousarray(shift, dtype=np.int64)
    best = -np.inf
    best_row = -1
    pos = 0
    total = zrows.shape[0]
    while pos < total:
        end = min(pos + chunk, total)
        if use_numba:
            v, row = _image_max_prime(zrows, G, shift, table, q, pos, end)
        else:
            sig = (zrows[pos:end] @ G.T + shift) % q
            ranks = np.zeros(end - pos, dtype=np.int64)
            for j in range(G.shape[0]):
                ranks = ranks * q + sig[:, j]
            vals = table[ranks]
            row = pos + int(np.argmax(vals))
            v = float(vals[row - pos])
        if v > best:
            best = float(v)
            best_row = int(row)
        pos = end
        if deadline is not None and time.monotonic() > deadline and pos < total:
            return best, best_row, False
    return best, best_row, True
