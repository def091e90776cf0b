from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkdspir import b2


def subcube_xor(w, m, sets):
    """Direct sum of w over S1 x S2 x S3 (0-based sets)."""
    cube = w.reshape(m, m, m)
    acc = 0
    for a, b, c in product(*sets):
        acc ^= int(cube[a, b, c])
    return acc


def test_sizes():
    assert b2.free_key_bits(2) == 28
    assert b2.answer_bits(2) == 13
    assert b2.disp_bits(2) == 1 and b2.disp_bits(5) == 3 and b2.disp_bits(8) == 3
    assert b2.query_bits(2) == 9


@pytest.mark.parametrize("m", [2, 3, 4])
def test_flat_index_roundtrip(m):
    seen = set()
    for k in range(m**3):
        x = b2.CubeIndex.from_flat(k, m)
        x.validate(m)
        assert x.flat(m) == k
        seen.add(x.coords())
    assert len(seen) == m**3
    assert b2.CubeIndex(1, 1, 1).flat(m) == 0
    with pytest.raises(ValueError):
        b2.CubeIndex(0, 1, 1).validate(m)


def test_wrap_keeps_representatives_one_to_m():
    assert [b2.wrap(v, 3) for v in range(-3, 5)] == [3, 1, 2, 3, 1, 2, 3, 1]


@given(st.integers(2, 5), st.data())
def test_query_bits_roundtrip(m, data):
    q_s = np.array(data.draw(st.lists(st.integers(0, 1), min_size=3 * m, max_size=3 * m)), np.uint8).reshape(3, m)
    q_d = tuple(data.draw(st.integers(1, m)) for _ in range(3))
    q = b2.B2Query(q_s, q_d)
    bits = q.to_bits()
    assert bits.size == b2.query_bits(m)
    assert b2.B2Query.from_bits(bits, m) == q


def test_derived_queries_differ_in_one_element_per_axis(rng):
    m = 3
    for _ in range(50):
        x = b2.CubeIndex.from_flat(int(rng.integers(27)), m)
        r = b2.UserRandomness.sample(rng, m)
        q1, q2 = b2.derive_queries(x, r, m)
        for i, c in enumerate(x.coords()):
            assert np.flatnonzero(q1.q_s[i] ^ q2.q_s[i]).tolist() == [c - 1]
            assert b2.wrap(q1.q_d[i] + q2.q_d[i], m) == c


def test_cds_key_parity_and_layout(rng):
    m = 3
    bits = rng.integers(0, 2, b2.free_key_bits(m), dtype=np.uint8)
    key = b2.CdsKey.from_free_bits(bits, m)
    assert key.parity_ok()
    assert np.array_equal(key.free_bits(), bits)
    assert key.t[b2.T_PARITY_SLOT] == bits[3:10].sum() % 2
    with pytest.raises(ValueError):
        b2.CdsKey.from_free_bits(bits[:-1], m)
    broken = b2.CdsKey(key.u, key.t ^ np.eye(8, dtype=np.uint8)[0], key.y, key.z)
    with pytest.raises(ValueError):
        broken.validate()


def test_answer_wire_roundtrip(rng):
    m = 3
    w = rng.integers(0, 2, m**3, dtype=np.uint8)
    q = b2.B2Query(rng.integers(0, 2, (3, m), dtype=np.uint8), (1, 3, 2))
    key = b2.CdsKey.sample(rng, m)
    a1, a2 = b2.answer_dc1(q, w, key), b2.answer_dc2(q, w, key)
    assert a1.to_bits().size == b2.answer_bits(m) == a2.to_bits().size
    assert np.array_equal(b2.Dc1Answer.from_bits(a1.to_bits(), m).to_bits(), a1.to_bits())
    assert np.array_equal(b2.Dc2Answer.from_bits(a2.to_bits(), m).to_bits(), a2.to_bits())


def test_a000_is_subcube_xor_under_zero_mask(rng):
    m = 3
    zero = b2.CdsKey.from_free_bits(np.zeros(b2.free_key_bits(m), np.uint8), m)
    for _ in range(20):
        w = rng.integers(0, 2, m**3, dtype=np.uint8)
        q_s = rng.integers(0, 2, (3, m), dtype=np.uint8)
        a = b2.answer_dc1(b2.B2Query(q_s, (1, 1, 1)), w, zero)
        sets = [np.flatnonzero(q_s[i]).tolist() for i in range(3)]
        assert int(a.a000) == subcube_xor(w, m, sets)
        # each a100[j] toggles j in the first set
        for j in range(m):
            s1 = sorted(set(sets[0]) ^ {j})
            assert int(a.a100[j]) == subcube_xor(w, m, [s1, sets[1], sets[2]])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_decode_recovers_entry(m, seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(0, 2, m**3, dtype=np.uint8)
    x = b2.CubeIndex.from_flat(int(rng.integers(m**3)), m)
    r = b2.UserRandomness.sample(rng, m)
    q1, q2 = b2.derive_queries(x, r, m)
    key = b2.CdsKey.sample(rng, m, batch=(16,))
    out = b2.decode(b2.answer_dc1(q1, w, key), b2.answer_dc2(q2, w, key), q1, q2, x, r)
    assert np.all(out == w[x.flat(m)])


def test_decode_needs_every_z_term(rng):
    """Dropping the second and third CDS terms breaks decoding for some keys."""
    m = 2
    w = rng.integers(0, 2, 8, dtype=np.uint8)
    x = b2.CubeIndex(2, 1, 2)
    r = b2.UserRandomness.sample(rng, m)
    q1, q2 = b2.derive_queries(x, r, m)
    key = b2.CdsKey.sample(rng, m, batch=(64,))
    a1, a2 = b2.answer_dc1(q1, w, key), b2.answer_dc2(q2, w, key)
    full = b2.decode(a1, a2, q1, q2, x, r)
    z = a1.a_cds ^ a2.a_cds2
    partial = full ^ z[..., 1] ^ z[..., 2]
    assert np.all(full == w[x.flat(m)])
    assert np.any(partial != w[x.flat(m)])


def test_batched_databases_broadcast(rng):
    m = 2
    w = rng.integers(0, 2, (5, 8), dtype=np.uint8)
    x = b2.CubeIndex(1, 2, 2)
    r = b2.UserRandomness.sample(rng, m)
    q1, q2 = b2.derive_queries(x, r, m)
    key = b2.CdsKey.sample(rng, m, batch=(5,))
    out = b2.decode(b2.answer_dc1(q1, w, key), b2.answer_dc2(q2, w, key), q1, q2, x, r)
    assert np.array_equal(out, w[:, x.flat(m)])


def test_input_validation():
    m = 2
    key = b2.CdsKey.from_free_bits(np.zeros(28, np.uint8), m)
    q = b2.B2Query(np.zeros((3, m), np.uint8), (1, 1, 1))
    with pytest.raises(ValueError):
        b2.answer_dc1(q, np.zeros(9, np.uint8), key)
    with pytest.raises(ValueError):
        b2.answer_dc1(b2.B2Query(np.zeros((3, m), np.uint8), (3, 1, 1)), np.zeros(8, np.uint8), key)
    with pytest.raises(ValueError):
        b2.sym_diff(np.zeros(2, np.uint8), 3)
