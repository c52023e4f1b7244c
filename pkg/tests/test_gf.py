import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spacemac import gf

elem = st.integers(0, 255)
nonzero = st.integers(1, 255)


def slow_mul(a, b):
    # shift-and-add with reduction by x^8 + x^4 + x^3 + x + 1
    r = 0
    for i in range(8):
        if (b >> i) & 1:
            r ^= a << i
    for bit in range(14, 7, -1):
        if (r >> bit) & 1:
            r ^= 0x11B << (bit - 8)
    return r


def test_product_table_matches_polynomial_reduction_everywhere():
    expected = np.array([[slow_mul(a, b) for b in range(256)] for a in range(256)], dtype=np.uint8)
    assert np.array_equal(gf.MUL, expected)


def test_known_products():
    assert gf.mul(0x53, 0xCA) == 0x01
    assert gf.mul(0x57, 0x83) == 0xC1
    assert gf.inv(0x53) == 0xCA
    assert gf.mul(0, 0x77) == 0


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        gf.inv(0)


def test_every_nonzero_element_has_inverse():
    for a in range(1, 256):
        assert gf.mul(a, gf.inv(a)) == 1


def test_tables_are_read_only():
    with pytest.raises(ValueError):
        gf.MUL[1, 1] = 0


@given(elem, elem, elem)
def test_field_axioms(a, b, c):
    assert gf.mul(a, b) == gf.mul(b, a)
    assert gf.mul(a, gf.mul(b, c)) == gf.mul(gf.mul(a, b), c)
    assert gf.mul(a, gf.add(b, c)) == gf.add(gf.mul(a, b), gf.mul(a, c))
    assert gf.add(a, a) == 0


def test_dot_length_mismatch():
    with pytest.raises(ValueError):
        gf.dot(np.zeros(3, np.uint8), np.zeros(4, np.uint8))


def test_dot_against_scalar_loop():
    rng = np.random.default_rng(1)
    for _ in range(50):
        u, v = gf.random_vector(rng, 17), gf.random_vector(rng, 17)
        acc = 0
        for a, b in zip(u, v):
            acc ^= slow_mul(int(a), int(b))
        assert gf.dot(u, v) == acc


def test_combine_and_scalar_combine_agree():
    rng = np.random.default_rng(2)
    for _ in range(50):
        c = gf.random_vector(rng, 5)
        rows = rng.integers(0, 256, size=(5, 3), dtype=np.uint8)
        fast = gf.combine(c, rows)
        loop = gf.combine_scalar([int(x) for x in c], [bytes(r) for r in rows])
        assert fast.tobytes() == loop


def test_matmul_against_combine():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 256, size=(4, 6), dtype=np.uint8)
    b = rng.integers(0, 256, size=(6, 5), dtype=np.uint8)
    out = gf.matmul(a, b)
    for i in range(4):
        assert np.array_equal(out[i], gf.combine(a[i], b))


def test_rank_of_known_sets():
    e = np.eye(4, dtype=np.uint8)
    assert gf.rank(e) == 4
    assert gf.rank([e[0], e[0], gf.scale(7, e[0])]) == 1
    assert gf.rank([e[0], e[1], e[0] ^ e[1]]) == 2
    assert gf.rank([]) == 0


def test_basis_contains_combinations_only():
    rng = np.random.default_rng(4)
    vs = rng.integers(0, 256, size=(3, 8), dtype=np.uint8)
    b = gf.Basis.from_vectors(vs)
    assert b.dim == 3
    for _ in range(20):
        assert b.contains(gf.combine(gf.random_vector(rng, 3), vs))
    for _ in range(20):
        v = gf.random_vector(rng, 8)
        assert b.contains(v) == (gf.rank([*vs, v]) == 3)


def test_insert_reports_growth():
    b = gf.Basis(3)
    assert b.insert(np.array([1, 2, 3], np.uint8))
    assert not b.insert(np.array([2, 4, 6], np.uint8))  # 2 * first row in GF(2^8)
    assert b.insert(np.array([0, 1, 0], np.uint8))
    assert b.dim == 2


def test_functional_insert_leaves_input_alone():
    b = gf.Basis(2)
    b2, grew = gf.insert(b, np.array([1, 1], np.uint8))
    assert grew and b.dim == 0 and b2.dim == 1


def test_basis_length_mismatch():
    with pytest.raises(ValueError):
        gf.Basis(3).contains(np.zeros(4, np.uint8))


@settings(max_examples=60)
@given(st.lists(st.lists(elem, min_size=6, max_size=6), min_size=1, max_size=8))
def test_rank_matches_sympy_free_oracle(rows):
    # independent oracle: brute force rank via Gaussian elimination on Python ints
    m = [list(r) for r in rows]
    rank = 0
    for col in range(6):
        piv = next((i for i in range(rank, len(m)) if m[i][col]), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        inv = gf.inv(m[rank][col])
        m[rank] = [slow_mul(inv, x) for x in m[rank]]
        for i in range(len(m)):
            if i != rank and m[i][col]:
                f = m[i][col]
                m[i] = [x ^ slow_mul(f, y) for x, y in zip(m[i], m[rank])]
        rank += 1
    assert gf.rank(np.array(rows, dtype=np.uint8)) == rank


@given(st.lists(nonzero, min_size=1, max_size=4))
def test_scale_is_elementwise_mul(vals):
    v = np.array(vals, dtype=np.uint8)
    assert [int(x) for x in gf.scale(0x1D, v)] == [slow_mul(0x1D, x) for x in vals]
