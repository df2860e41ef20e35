import itertools

import numpy as np
import pytest

from multibin.field import (
    FieldSpec,
    enumerate_vectors,
    factor_prime_power,
    find_irreducible,
    is_prime,
    rank_vector,
    vector_less,
    vector_rank,
)


def test_factor_prime_power():
    assert factor_prime_power(2) == (2, 1)
    assert factor_prime_power(9) == (3, 2)
    assert factor_prime_power(16) == (2, 4)
    for bad in (1, 6, 12, 100):
        with pytest.raises(ValueError):
            factor_prime_power(bad)


def test_find_irreducible_pinned():
    assert find_irreducible(2, 1) == (0, 1)  # the convention marker "x"
    assert find_irreducible(2, 2) == (1, 1, 1)  # x^2 + x + 1
    assert find_irreducible(3, 2) == (1, 0, 1)  # x^2 + 1


@pytest.mark.parametrize("p,k", [(2, 2), (2, 3), (3, 2), (5, 2), (2, 4)])
def test_find_irreducible_has_no_roots(p, k):
    c = find_irreducible(p, k)
    for x in range(p):
        acc = 0
        for coeff in reversed(c):
            acc = (acc * x + coeff) % p
        assert acc != 0


def test_gf3_add_wraparound():
    f = FieldSpec.of(3)
    assert f.add(1, 2) == 0


def test_gf2_char2():
    f = FieldSpec.of(2)
    for a in range(2):
        assert f.add(a, a) == 0


def test_gf4_add_mul_hand_checked():
    # modulus x^2 + x + 1; indices encode coefficient vectors base 2,
    # least-significant coefficient first: a_2 = x, a_3 = x + 1.
    f = FieldSpec.of(4)
    assert f.modulus == (1, 1, 1)
    assert f.add(2, 3) == 1  # (0,1)+(1,1) = (1,0) -> index 1
    assert f.mul(2, 2) == 3  # x*x = x^2 = x+1 -> index 3


def test_gf5_mul():
    f = FieldSpec.of(5)
    assert f.mul(2, 3) == 1


@pytest.mark.parametrize("q", [2, 3, 4, 5, 7, 8, 9, 16])
def test_field_axioms_exhaustive(q):
    f = FieldSpec.of(q)
    elems = range(q)
    for a, b in itertools.product(elems, repeat=2):
        assert f.add(a, b) == f.add(b, a)
        assert f.mul(a, b) == f.mul(b, a)
    assert all(f.add(a, 0) == a for a in elems)
    assert all(f.mul(a, 1) == a for a in elems)
    assert all(f.mul(a, 0) == 0 for a in elems)
    for a, b, c in itertools.product(elems, repeat=3):
        assert f.add(f.add(a, b), c) == f.add(a, f.add(b, c))
        assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
    for a in range(1, q):
        assert f.mul(a, f.inv(a)) == 1


@pytest.mark.parametrize("q", [4, 8, 9, 16, 25, 27])
def test_no_zero_divisors(q):
    f = FieldSpec.of(q)
    for a in range(1, q):
        for b in range(1, q):
            assert f.mul(a, b) != 0


def test_vector_less():
    assert vector_less(np.array([0, 1]), np.array([2, 2]))
    assert not vector_less(np.array([0, 2]), np.array([2, 2]))  # tie is not less
    assert not vector_less(np.array([1, 1, 1]), np.array([0, 4, 4]))
    with pytest.raises(ValueError):
        vector_less(np.array([0]), np.array([0, 1]))


def test_ordering_consistency():
    # sorting by index yields a_0..a_{q-1}; vector_less agrees with it
    q = 7
    idx = sorted(range(q))
    assert idx == list(range(q))
    assert vector_less(np.array(idx[:-1]), np.array(idx[1:]))


def test_enumerate_vectors_lex_order():
    vs = enumerate_vectors(3, 2)
    assert vs.shape == (9, 2)
    assert vs[0].tolist() == [0, 0]
    assert vs[1].tolist() == [0, 1]
    assert vs[3].tolist() == [1, 0]
    for i in range(len(vs)):
        assert vector_rank(vs[i], 3) == i
        assert rank_vector(i, 3, 2).tolist() == vs[i].tolist()


def test_matvec_prime_and_extension():
    f3 = FieldSpec.of(3)
    A = np.array([[1, 2], [0, 1]])
    x = np.array([2, 2])
    assert f3.matvec(A, x).tolist() == [(2 + 4) % 3, 2]

    f4 = FieldSpec.of(4)
    A = np.array([[2, 0], [0, 3]])
    x = np.array([2, 2])
    out = f4.matvec(A, x)
    assert out.tolist() == [f4.mul(2, 2), f4.mul(3, 2)]


def test_spec_roundtrip():
    for q in (3, 4, 9):
        f = FieldSpec.of(q)
        g = FieldSpec.from_config(f.to_config())
        assert g == f
        assert g.q == q


def test_bad_modulus_rejected():
    with pytest.raises(ValueError):
        FieldSpec.of(4, modulus=(0, 0, 1))  # x^2 is reducible


def test_is_prime_basic():
    assert [n for n in range(2, 20) if is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]
