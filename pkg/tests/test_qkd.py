import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdspir.qkd import KeyPairOutcome, QkdModelParams, otp, p_fail, sample_keypair, split_key

probs = st.floats(0, 1, allow_nan=False)


def test_params_validation_and_eps():
    p = QkdModelParams(p_abort=0.5, p_mismatch=0.2, p_leak=0.1)
    assert p.eps_cor == pytest.approx(0.1)
    assert p.eps_sec == pytest.approx(0.05)
    assert p.eps == pytest.approx(0.15)
    assert QkdModelParams().ideal and not p.ideal
    for bad in (-0.1, 1.5, float("nan")):
        with pytest.raises(ValueError):
            QkdModelParams(p_leak=bad)


@given(probs, probs, probs)
def test_p_fail_range_and_monotone(a, b, c):
    v = p_fail(a, b, c)
    assert 0.0 <= v <= 1.0
    assert v >= max(a, b, c) - 1e-12


def test_p_fail_values():
    assert p_fail(0, 0, 0) == 0
    assert p_fail(1, 0, 0) == 1
    assert p_fail(0.5, 0.5, 0.5) == pytest.approx(0.875)


def test_sample_keypair_ideal_and_abort(rng):
    ideal = sample_keypair(16, QkdModelParams(), rng)
    assert ideal.matched and ideal.eve_leak is None and ideal.s_a.size == 16
    ab = sample_keypair(16, QkdModelParams(p_abort=1.0), rng)
    assert ab.aborted and ab.s_a is None and ab.s_b is None and not ab.matched
    leak = sample_keypair(16, QkdModelParams(p_leak=1.0), rng)
    assert np.array_equal(leak.eve_leak, leak.s_a)
    with pytest.raises(ValueError):
        sample_keypair(7, QkdModelParams(), rng)


def test_mismatch_rate_matches_surrogate():
    rng = np.random.default_rng(5)
    p = QkdModelParams(p_mismatch=0.3)
    n = 20000
    # s_b is redrawn on mismatch, so equal keys by chance are negligible at 32 bits
    rate = sum(not sample_keypair(32, p, rng).matched for _ in range(n)) / n
    assert abs(rate - 0.3) < 4 * np.sqrt(0.3 * 0.7 / n)


def test_same_seed_same_outcome():
    p = QkdModelParams(0.2, 0.2, 0.2)
    a = [sample_keypair(8, p, np.random.default_rng(s)) for s in range(30)]
    b = [sample_keypair(8, p, np.random.default_rng(s)) for s in range(30)]
    for x, y in zip(a, b):
        assert x.aborted == y.aborted
        if not x.aborted:
            assert np.array_equal(x.s_b, y.s_b)


@given(st.lists(st.integers(0, 1), min_size=2, max_size=40).filter(lambda v: len(v) % 2 == 0))
def test_split_orientation(bits):
    key = np.array(bits, np.uint8)
    user, dc = split_key(key), split_key(key, responder=True)
    assert np.array_equal(user.enc, dc.dec) and np.array_equal(user.dec, dc.enc)
    assert np.array_equal(np.concatenate([user.enc, user.dec]), key)


def test_otp_roundtrip_and_shape(rng):
    m = rng.integers(0, 2, 10, dtype=np.uint8)
    k = rng.integers(0, 2, 10, dtype=np.uint8)
    assert np.array_equal(otp(otp(m, k), k), m)
    with pytest.raises(ValueError):
        otp(m, k[:5])
    with pytest.raises(ValueError):
        split_key(np.zeros(3, np.uint8))


def test_ideal_outcome_copies():
    k = np.array([1, 0, 1, 1], np.uint8)
    out = KeyPairOutcome.ideal(k)
    out.s_b[0] = 0
    assert out.s_a[0] == 1
