import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdspir import gf2
from qkdspir.bits import BOTTOM, as_bits, bits_to_int, decode_hex, encode_hex, int_to_bits


def dense_rank(rows, n_cols):
    """Plain Gaussian elimination on a 0/1 matrix, used as an oracle."""
    a = np.array([[(r >> c) & 1 for c in range(n_cols)] for r in rows], dtype=np.uint8).reshape(len(rows), n_cols)
    rank = 0
    for col in range(n_cols):
        pivot = next((i for i in range(rank, a.shape[0]) if a[i, col]), None)
        if pivot is None:
            continue
        a[[rank, pivot]] = a[[pivot, rank]]
        for i in range(a.shape[0]):
            if i != rank and a[i, col]:
                a[i] ^= a[rank]
        rank += 1
    return rank


def test_as_bits_accepts_strings_and_lists():
    assert as_bits("0110").tolist() == [0, 1, 1, 0]
    assert as_bits([1, 0], 2).tolist() == [1, 0]
    with pytest.raises(ValueError):
        as_bits([0, 2])
    with pytest.raises(ValueError):
        as_bits("01", 3)


@given(st.lists(st.integers(0, 1), max_size=70))
def test_hex_roundtrip(bits):
    arr = np.array(bits, dtype=np.uint8)
    back = decode_hex(encode_hex(arr))
    assert back.tolist() == bits


def test_hex_bottom_and_malformed():
    assert encode_hex(None) == BOTTOM
    assert decode_hex(BOTTOM) is None
    for bad in ("zz", "3:zz", "9:ff", "-1:"):
        with pytest.raises(ValueError):
            decode_hex(bad)


@given(st.integers(0, 2**40 - 1))
def test_int_bits_roundtrip(v):
    bits = int_to_bits(v, 40)
    assert bits_to_int(bits) == v
    assert bits[0] == v & 1


@given(st.lists(st.integers(0, 2**12 - 1), max_size=14))
def test_rank_matches_dense_elimination(rows):
    assert gf2.rank(rows) == dense_rank(rows, 12)


@given(st.lists(st.integers(1, 2**10 - 1), min_size=1, max_size=6), st.integers(0, 2**10 - 1))
def test_canonical_is_coset_invariant(vectors, v):
    basis = gf2.Basis(vectors)
    for u in vectors:
        assert basis.canonical(v ^ u) == basis.canonical(v)
    assert basis.contains(v ^ basis.canonical(v))


def test_colspace_member_small():
    # columns e0, e0+e1 span the first two coordinates
    assert gf2.colspace_member([0b01, 0b11], 0b10, 2)
    assert not gf2.colspace_member([0b011], 0b100, 3)
    with pytest.raises(ValueError):
        gf2.colspace_member([0b1000], 0b1, 2)


@given(st.lists(st.integers(0, 2**6 - 1), min_size=1, max_size=5), st.integers(0, 2**6 - 1))
def test_matvec_transpose(rows, v):
    cols = gf2.transpose(rows, 6)
    # A v equals the XOR of the columns selected by v
    expect = 0
    for c in range(6):
        if (v >> c) & 1:
            expect ^= cols[c]
    assert gf2.matvec(rows, v) == expect
