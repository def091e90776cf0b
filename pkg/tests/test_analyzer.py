from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkdspir import analyzer as A
from qkdspir import b2
from qkdspir.orchestrator import LINKS, RunConfig, fixed_inputs, random_inputs, run_batch
from qkdspir.qkd import QkdModelParams


def test_distribution_and_tv():
    p = A.Distribution({"a": Fraction(1, 2), "b": Fraction(1, 2)})
    q = A.Distribution.point("a")
    assert A.tv_distance(p, q) == Fraction(1, 2)
    assert A.tv_distance(p, p) == 0
    with pytest.raises(ValueError):
        A.Distribution({"a": 0.3})
    with pytest.raises(ValueError):
        A.Distribution({"a": 1.5, "b": -0.5})
    with pytest.raises(ValueError):
        A.tv_distance(A.Distribution({0: 1}, coset_id=(1,), coset_dim=1), A.Distribution({0: 1}, coset_id=(2,), coset_dim=1))


@given(st.lists(st.integers(0, 4), min_size=1, max_size=30), st.lists(st.integers(0, 4), min_size=1, max_size=30))
def test_tv_symmetry_and_range(a, b):
    p, q = A.Distribution.from_samples(a, exact=True), A.Distribution.from_samples(b, exact=True)
    d = A.tv_distance(p, q)
    assert d == A.tv_distance(q, p) and 0 <= d <= 1


def test_affine_system_matches_answer_functions(rng):
    m = 2
    qs = A.all_queries(m)
    for _ in range(100):
        q1, q2 = qs[rng.integers(len(qs))], qs[rng.integers(len(qs))]
        system = A.build_affine_system(q1, q2, m)
        key = rng.integers(0, 2, b2.free_key_bits(m), dtype=np.uint8)
        w = rng.integers(0, 2, m**3, dtype=np.uint8)
        cds = b2.CdsKey.from_free_bits(key, m)
        direct = np.concatenate([b2.answer_dc1(q1, w, cds).to_bits(), b2.answer_dc2(q2, w, cds).to_bits()])
        assert np.array_equal(system.evaluate(key, w), direct)


def test_honest_pairs_reveal_exactly_the_entry(rng):
    m = 2
    for k in range(8):
        x = b2.CubeIndex.from_flat(k, m)
        q1, q2 = b2.derive_queries(x, b2.UserRandomness.sample(rng, m), m)
        rep = A.db_privacy_check(q1, q2, m)
        assert rep.compliant and rep.witness == k
        assert rep.to_json()["recoverable_dim"] == 1


def test_compliance_rules():
    assert A._compliance_from_functionals([], 8).compliant
    assert A._compliance_from_functionals([0b100], 8).witness == 2
    bad = A._compliance_from_functionals([0b110], 8)
    assert not bad.compliant and bad.offending_pair is not None
    assert not A._compliance_from_functionals([0b1, 0b10], 8).compliant


def test_restricted_toy_systems_agree_with_enumeration(rng):
    """Folding most key bits into the constant can leak; the coset test must track that."""
    m = 2
    qs = A.all_queries(m)
    disagreements = leaky = 0
    for _ in range(6):
        q1, q2 = qs[rng.integers(len(qs))], qs[rng.integers(len(qs))]
        free = sorted(rng.choice(b2.free_key_bits(m), size=int(rng.integers(2, 9)), replace=False).tolist())
        fixed = rng.integers(0, 2, b2.free_key_bits(m), dtype=np.uint8)
        toy = A.restricted_system(A.build_affine_system(q1, q2, m), free, fixed)
        for _ in range(15):
            w, w2 = rng.integers(0, 2, (2, 8), dtype=np.uint8)
            brute = (A.brute_force_answer_distribution(q1, q2, w, free, fixed).probs
                     == A.brute_force_answer_distribution(q1, q2, w2, free, fixed).probs)
            disagreements += brute != toy.indistinguishable(w, w2)
            leaky += not brute
    assert disagreements == 0
    assert leaky > 0


def test_xor_exact_user_privacy():
    cfg = RunConfig(protocol="xor", size=3)
    worst = A.exact_user_privacy(cfg, np.array([1, 0, 1], np.uint8), np.zeros(2, np.uint8))
    assert worst == {"dc1_eve": 0, "dc2_eve": 0}


def test_user_view_does_distinguish_index():
    """Control: the user's own view contains x, so it must separate indices."""
    cfg = RunConfig(protocol="xor", size=2)
    w = np.array([1, 1], np.uint8)
    p = A.view_distribution(cfg, "user_eve", w, np.array([1, 0], np.uint8), shared_key=np.zeros(2, np.uint8))
    q = A.view_distribution(cfg, "user_eve", w, np.array([0, 1], np.uint8), shared_key=np.zeros(2, np.uint8))
    assert A.tv_distance(p, q) == 1


def test_exact_and_sampled_agree_on_support():
    cfg = RunConfig(protocol="xor", size=2)
    w, x = np.array([0, 1], np.uint8), np.array([0, 1], np.uint8)
    ex = A.view_distribution(cfg, "dc1_eve", w, x, vary=("r",), fields=("q1_tilde",), shared_key=np.zeros(2, np.uint8))
    assert all(v == Fraction(1, 4) for v in ex.probs.values())
    sa = A.view_distribution(cfg, "dc1_eve", w, x, vary=("r",), fields=("q1_tilde",), mode="sample", samples=400,
                             shared_key=np.zeros(2, np.uint8))
    assert len(sa.probs) == 4


def test_targets_print_exactly():
    t = A.security_targets(1e-15, 1e-10)
    assert t == {"correctness": 3e-15, "user_privacy": 2e-10, "db_privacy": 2e-10, "protocol_secrecy": 4e-10}
    assert repr(t["correctness"]) == "3e-15"


def test_hoeffding_margin():
    assert A.hoeffding_margin(10**5) == pytest.approx(np.sqrt(np.log(2000) / 2e5))


def _params(**kw):
    return {k: QkdModelParams(**kw) for k in LINKS}


def test_bounds_ideal_keys_all_pass():
    cfg = RunConfig()
    w = np.arange(8, dtype=np.uint8) % 2
    a = run_batch(cfg, 200, fixed_inputs(w, b2.CubeIndex(1, 1, 1)), seed=1)
    b = run_batch(cfg, 200, fixed_inputs(w, b2.CubeIndex(2, 1, 2)), seed=2)
    rep = A.check_theorem_bounds(a, _params(), paired=b)
    assert rep["pass"]
    assert rep["checks"]["user_privacy_dc1"]["empirical"] == 0.0
    assert rep["checks"]["protocol_secrecy"]["empirical"] == 0.0


def test_bounds_catch_planted_decode_fault():
    cfg = RunConfig()
    recs = run_batch(cfg, 50, random_inputs(cfg), seed=4)
    recs[7].w_hat = recs[7].w_hat ^ 1
    rep = A.check_theorem_bounds(recs, _params())
    assert not rep["checks"]["correctness"]["pass"] and not rep["pass"]


def test_bounds_detect_leak_beyond_budget():
    """A leak far above the configured surrogate must fail the secrecy check."""
    cfg = RunConfig(links={"d1_d2": QkdModelParams(), "u_d1": QkdModelParams(p_leak=1.0), "u_d2": QkdModelParams(p_leak=1.0)})
    w = np.zeros(8, np.uint8)
    a = run_batch(cfg, 300, fixed_inputs(w, b2.CubeIndex(1, 1, 1)), seed=1)
    b = run_batch(cfg, 300, fixed_inputs(w, b2.CubeIndex(2, 2, 2)), seed=2)
    rep = A.check_theorem_bounds(a, _params(p_leak=0.01), paired=b)
    assert not rep["checks"]["protocol_secrecy"]["pass"]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_coalition_feature_hides_index_without_leaks(seed):
    cfg = RunConfig()
    recs = run_batch(cfg, 5, random_inputs(cfg), seed=seed)
    for party in ("eve", "dc1_eve", "dc2_eve", "user_eve"):
        assert len({A.coalition_feature(r, party) for r in recs}) == 1
