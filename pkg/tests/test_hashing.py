import itertools
import json
import math

import numpy as np
import pytest
from scipy.stats import chi2

from multibin.estimator import stream_rng
from multibin.field import FieldSpec
from multibin.hashing import (
    HashSampler,
    MultiBinHash,
    accepts,
    evaluate_hash,
    fieldmult_matrix,
    fieldmult_reference,
    pairwise_independence_audit,
    sample_dense,
    sample_fieldmult,
    sample_hash,
    sample_sparse_toeplitz,
    sample_toeplitz,
)

F2 = FieldSpec.of(2)
F3 = FieldSpec.of(3)
F5 = FieldSpec.of(5)


def test_dense_shape_contract():
    h = sample_dense(F5, 2, 3, 2, stream_rng(0, 1, 2, 0))
    assert h.A.shape == (2, 3)
    assert h.b.shape == (2,)
    assert h.random_bits == (2 * 3 + 2) * 3  # ceil(log2 5) = 3


def test_same_seed_same_hash():
    s1 = HashSampler(F5, 2, 3, 2, "dense", seed=99)
    s2 = HashSampler(F5, 2, 3, 2, "dense", seed=99)
    h1, h2 = s1.sample(), s2.sample()
    assert np.array_equal(h1.A, h2.A) and np.array_equal(h1.b, h2.b)


def test_dense_seed_sweep_uniform():
    # (m, n) = (1, 1), q = 3: nine possible (A, b) pairs, checked uniform over
    # an exhaustive 2^16 seed sweep
    counts = np.zeros((3, 3), dtype=np.int64)
    for seed in range(1 << 16):
        h = sample_dense(F3, 1, 1, 1, stream_rng(seed, 1, 1, 0))
        counts[h.A[0, 0], h.b[0]] += 1
    expected = (1 << 16) / 9
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert stat < chi2.ppf(0.999, df=8)


def test_toeplitz_structure():
    for seed in range(20):
        h = sample_toeplitz(F5, 3, 4, 2, stream_rng(seed, 1, 3, 0))
        for i in range(1, 3):
            for j in range(1, 4):
                assert h.A[i, j] == h.A[i - 1, j - 1]


def test_toeplitz_randomness_accounting():
    h = sample_toeplitz(F2, 2, 3, 1, stream_rng(0, 1, 2, 1))
    assert h.random_bits == 6  # 2m + n - 1 at q = 2


def test_fieldmult_randomness_accounting():
    h = sample_fieldmult(F2, 2, 5, 1, stream_rng(0, 1, 2, 2))
    assert h.random_bits == 7  # m + n at q = 2


def test_toeplitz_matvec_uniform_over_matrices():
    # over all 2^(m+n-1) binary Toeplitz matrices, A x hits every y equally
    # often for every fixed x != 0 (m = n = 2)
    m = n = 2
    from multibin.field import enumerate_vectors

    mats = []
    for sym in enumerate_vectors(2, m + n - 1):
        first_row = sym[:n]
        first_col = np.concatenate(([sym[0]], sym[n:]))
        A = np.array([[first_row[0], first_row[1]], [first_col[1], first_row[0]]])
        mats.append(A)
    for x in enumerate_vectors(2, n)[1:]:
        hits = {}
        for A in mats:
            y = tuple((A @ x) % 2)
            hits[y] = hits.get(y, 0) + 1
        assert all(v == len(mats) // 2**m for v in hits.values())


def test_sparse_reduces_to_toeplitz_at_half():
    a_sparse = pairwise_independence_audit("sparse_toeplitz", 2, 1, 2, 2, density=0.5)
    a_plain = pairwise_independence_audit("toeplitz", 2, 1, 2, 2)
    assert a_sparse.max_marginal_deviation == pytest.approx(0.0, abs=1e-12)
    assert a_sparse.max_joint_deviation == pytest.approx(
        a_plain.max_joint_deviation, abs=1e-12
    )


def test_sparse_expected_nonzeros():
    total = 0
    draws = 4000
    for seed in range(draws):
        h = sample_sparse_toeplitz(F2, 4, 16, 1, stream_rng(seed, 1, 4, 0), density=0.1)
        total += int(h.A[:, 0].sum()) + int(h.A[0, 1:].sum())
    mean = total / draws
    assert abs(mean - 1.9) < 0.07  # 3 sigma of the sample mean is ~0.062


def test_sparse_offset_keeps_marginal_uniform():
    # for any fixed matrix, enumerating b shows Pr(h(x) = y) = 2^-m
    h = sample_sparse_toeplitz(F2, 3, 5, 1, stream_rng(7, 1, 3, 0), density=0.2)
    x = np.array([1, 0, 1, 1, 0])
    base = (h.A @ x) % 2
    from multibin.field import enumerate_vectors

    counts = {}
    for b in enumerate_vectors(2, 3):
        y = tuple((base + b) % 2)
        counts[y] = counts.get(y, 0) + 1
    assert all(v == 1 for v in counts.values())


def test_sparse_validation():
    rng = stream_rng(0, 1, 1, 0)
    with pytest.raises(ValueError):
        sample_sparse_toeplitz(F3, 2, 2, 1, rng, density=0.3)  # q != 2
    with pytest.raises(ValueError):
        sample_sparse_toeplitz(F2, 2, 2, 1, rng, density=0.7)  # density > 0.5


# -- field-multiplication construction --------------------------------------


def test_fieldmult_identity_multiplier():
    nu = np.array([1, 0, 0, 0])
    A = fieldmult_matrix(F2, nu)
    assert np.array_equal(A, np.eye(4, dtype=np.int64))


def test_fieldmult_zero_multiplier():
    h_A = fieldmult_matrix(F3, np.zeros(3, dtype=np.int64))
    assert not h_A.any()


def test_fieldmult_shift_example():
    # n = 3 over GF(2), modulus z^3 + z + 1, nu = z: multiplying x = 1 gives z
    from multibin.hashing import _find_irreducible_over

    f = _find_irreducible_over((2, 1, ()), 3)
    assert f == (1, 1, 0, 1)  # z^3 + z + 1 is the smallest irreducible cubic
    out = fieldmult_reference(F2, np.array([0, 1, 0]), np.array([1, 0, 0]), 3)
    assert out.tolist() == [0, 1, 0]


@pytest.mark.parametrize("q,n", [(2, 2), (2, 4), (2, 6), (2, 8), (3, 3), (4, 2)])
def test_fieldmult_affine_form_faithful(q, n):
    # the materialized matrix agrees with an independently coded polynomial
    # pipeline (integer convolution, then reduction) on every (nu, x) pair
    field = FieldSpec.of(q)
    from multibin.field import enumerate_vectors
    from multibin.hashing import _find_irreducible_over

    f = _find_irreducible_over((field.p, field.k, field.modulus), n)

    def reference(nu, x):
        if field.k == 1:
            conv = np.convolve(x, nu) % q
            conv = [int(c) for c in conv]
        else:
            conv = [0] * (2 * n - 1)
            for i in range(n):
                for j in range(n):
                    conv[i + j] = field.add(conv[i + j], field.mul(int(x[i]), int(nu[j])))
        for i in range(2 * n - 2, n - 1, -1):
            lead = conv[i]
            if lead:
                conv[i] = 0
                for t in range(n + 1):
                    conv[i - n + t] = field.sub(conv[i - n + t], field.mul(lead, f[t]))
        return np.array(conv[:n])

    vectors = enumerate_vectors(q, n)
    for nu in vectors:
        A = fieldmult_matrix(field, nu)
        got = (vectors @ A.T) % q if field.k == 1 else None
        for idx, x in enumerate(vectors):
            want = reference(nu, x)
            have = got[idx] if got is not None else field.matvec(A, x)
            assert np.array_equal(have, want)


def test_affinity_identity_char2():
    # over GF(2): h(x) + h(y) + h(z) = h(x + y + z) for every construction
    rng = np.random.default_rng(3)
    for construction in ("dense", "toeplitz", "sparse_toeplitz", "field_mult"):
        h = sample_hash(F2, 3, 5, 1, stream_rng(1, 1, 3, 0), construction,
                        density=0.25 if construction == "sparse_toeplitz" else None)
        for _ in range(50):
            x, y, z = rng.integers(0, 2, size=(3, 5))
            lhs = (evaluate_hash(h, x) + evaluate_hash(h, y) + evaluate_hash(h, z)) % 2
            rhs = evaluate_hash(h, (x + y + z) % 2)
            assert np.array_equal(lhs, rhs)


def test_offset_removed_is_linear():
    # h(x) - h(0) is linear in x for general q
    for construction in ("dense", "toeplitz", "field_mult"):
        h = sample_hash(F5, 2, 4, 2, stream_rng(2, 1, 2, 1), construction)
        h0 = evaluate_hash(h, np.zeros(4, dtype=np.int64))
        rng = np.random.default_rng(4)
        for _ in range(50):
            x, y = rng.integers(0, 5, size=(2, 4))
            lin_x = (evaluate_hash(h, x) - h0) % 5
            lin_y = (evaluate_hash(h, y) - h0) % 5
            lin_xy = (evaluate_hash(h, (x + y) % 5) - h0) % 5
            assert np.array_equal((lin_x + lin_y) % 5, lin_xy)


# -- acceptance predicate -----------------------------------------------------


def test_accepts_empty_conjunction():
    h = MultiBinHash(F3, np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), 1)
    assert accepts(h, np.array([2, 2]))


def test_accepts_matches_definition():
    h = MultiBinHash(F5, np.array([[1, 2], [0, 3]]), np.array([4, 1]), 2)
    for sigma in itertools.product(range(5), repeat=2):
        sigma = np.array(sigma)
        value = (h.A @ sigma + h.b) % 5
        assert accepts(h, sigma) == bool((value < 2).all())


def test_accepts_threshold_vector():
    h = MultiBinHash(F5, np.array([[1, 0], [0, 1]]), np.array([0, 0]), 2)
    sigma = np.array([1, 3])
    assert accepts(h, sigma, thresholds=np.array([2, 4]))
    assert not accepts(h, sigma, thresholds=np.array([2, 3]))
    with pytest.raises(ValueError):
        accepts(h, sigma, thresholds=np.array([2]))


def test_dimension_mismatch():
    h = MultiBinHash(F5, np.array([[1, 2]]), np.array([0]), 2)
    with pytest.raises(ValueError):
        accepts(h, np.array([1, 2, 3]))


# -- exhaustive family audits -------------------------------------------------


def test_audit_dense_small_exact():
    audit = pairwise_independence_audit("dense", 3, 1, 1, 2)
    assert audit.exact
    assert audit.target_marginal == pytest.approx(1 / 3)
    assert audit.max_marginal_deviation == 0.0
    assert audit.max_joint_deviation == 0.0


def test_audit_dense_q5_m2_probability():
    audit = pairwise_independence_audit("dense", 5, 2, 2, 1)
    assert audit.exact
    assert audit.target_marginal == pytest.approx(0.16)


def test_audit_fieldmult_exact():
    audit = pairwise_independence_audit("field_mult", 2, 1, 1, 2)
    assert audit.exact


def test_audit_joint_target():
    audit = pairwise_independence_audit("dense", 2, 1, 2, 2)
    assert audit.target_joint == pytest.approx(1 / 16)
    assert audit.exact


def test_audit_sparse_reports_without_asserting():
    audit = pairwise_independence_audit("sparse_toeplitz", 2, 1, 2, 3, density=0.25)
    assert audit.weighted
    assert not audit.exact  # exactness is never claimed for weighted families
    assert audit.max_joint_deviation >= 0.0


def test_audit_family_size_guard():
    with pytest.raises(ValueError):
        pairwise_independence_audit("dense", 5, 2, 4, 4)


# -- serialization -------------------------------------------------------------


@pytest.mark.parametrize("construction", ["dense", "toeplitz", "field_mult"])
def test_json_round_trip_bit_exact(construction):
    h = sample_hash(F5, 2, 3, 2, stream_rng(11, 1, 2, 5), construction)
    doc = json.loads(json.dumps(h.to_json()))
    g = MultiBinHash.from_json(doc)
    assert np.array_equal(g.A, h.A)
    assert np.array_equal(g.b, h.b)
    assert (g.r, g.construction, g.field) == (h.r, h.construction, h.field)
    for sigma in itertools.product(range(5), repeat=3):
        assert np.array_equal(evaluate_hash(g, np.array(sigma)),
                              evaluate_hash(h, np.array(sigma)))


def test_json_rejects_corrupt_entries():
    h = sample_dense(F3, 1, 2, 1, stream_rng(0, 1, 1, 9))
    doc = h.to_json()
    doc["A"] = [[7, 1]]
    with pytest.raises(ValueError):
        MultiBinHash.from_json(doc)
