import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdspir import planner
from qkdspir.planner import BlockStats, EpsilonBudget

mpmath.mp.dps = 50


def h_mp(x):
    x = mpmath.mpf(x)
    if x in (0, 1):
        return mpmath.mpf(0)
    return -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)


def key_length_mp(s: BlockStats, e: EpsilonBudget):
    raw = (mpmath.mpf(s.n_t0) + s.n_t1 * (1 - h_mp(s.e_t1)) - mpmath.mpf("1.16") * s.n_t * h_mp(s.e_t)
           - mpmath.log(8 / mpmath.mpf(e.eps_cor), 2)
           - 2 * mpmath.log(2 / (mpmath.mpf(e.eps_prime) * mpmath.mpf(e.eps_hat)), 2)
           - 2 * mpmath.log(1 / (2 * mpmath.mpf(e.eps_pa)), 2))
    return max(0, int(mpmath.floor(raw)))


def test_binary_entropy_points():
    assert planner.binary_entropy(0) == 0 and planner.binary_entropy(1) == 0
    assert planner.binary_entropy(0.5) == 1
    assert abs(planner.binary_entropy(0.11) - float(h_mp("0.11"))) < 1e-12
    # the high-precision value is 0.4999160; the rounded figure 0.49981 sits 1.06e-4 below it
    assert planner.binary_entropy(0.11) == pytest.approx(0.4999160, abs=1e-6)
    assert abs(planner.binary_entropy(0.11) - 0.49981) < 1.1e-4
    with pytest.raises(ValueError):
        planner.binary_entropy(1.01)


@given(st.floats(0, 1, allow_nan=False))
def test_binary_entropy_symmetry(x):
    assert abs(planner.binary_entropy(x) - planner.binary_entropy(1 - x)) < 1e-12


def test_ec_leakage():
    assert planner.ec_leakage(1e6, 0) == 0
    assert planner.ec_leakage(1e6, 0.5) == pytest.approx(1.16e6)
    assert planner.ec_leakage(1e6, 0.02) == pytest.approx(float(mpmath.mpf("1.16") * 10**6 * h_mp("0.02")), rel=1e-12)
    with pytest.raises(ValueError):
        planner.ec_leakage(10, 0.6)


def test_key_length_reference_case():
    s = BlockStats(1000, 5000, 0.05, 6000, 0.02)
    e = EpsilonBudget(1e-15, 1e-10, 1e-10, 1e-10)
    expected = key_length_mp(s, e)
    assert expected > 0
    assert planner.key_length(s, e) == expected


def test_key_length_clamps_and_validates():
    e = EpsilonBudget(1e-15, 1e-10, 1e-10, 1e-10)
    assert planner.key_length(BlockStats(0, 0, 0, 0, 0), e) == 0
    with pytest.raises(ValueError):
        planner.key_length(BlockStats(-1, 0, 0, 0, 0), e)
    with pytest.raises(ValueError):
        planner.key_length(BlockStats(0, 0, 0, 0, 0), EpsilonBudget(0, 1, 1, 1))


@given(st.floats(0, 0.49), st.floats(0, 0.01))
def test_key_length_monotone_in_phase_error(e1, bump):
    e = EpsilonBudget(1e-15, 1e-10, 1e-10, 1e-10)
    lo = planner.key_length(BlockStats(1e4, 5e4, e1, 6e4, 0.02), e)
    hi = planner.key_length(BlockStats(1e4, 5e4, min(0.5, e1 + bump), 6e4, 0.02), e)
    assert hi <= lo


def test_comm_cost_examples():
    c = planner.comm_cost("b2", 8, 1)
    assert (c.per_link_bits, c.inter_dc_key_bits) == (22, 28)
    assert planner.comm_cost("xor", 4, 1).per_link_bits == 5
    fp = planner.scenario("fingerprint")
    m = 1975
    assert planner.cube_side(fp.n) == m
    # hand evaluation with exact integers
    assert planner.comm_cost("b2", fp.n, fp.entry_bits).per_link_bits == 7 * 4000 + 3 * 11 + (3 + 3 * 4000) * m


@given(st.integers(1, 10**15))
def test_cube_side_exact(n):
    m = planner.cube_side(n)
    assert m**3 >= n and (m - 1) ** 3 < n


def test_max_entry_size_examples():
    assert planner.max_entry_size("b2", 8, 22, 28) == 1
    assert planner.max_entry_size("b2", 8, 21, 28) == 0
    assert planner.max_entry_size("xor", 9, 10, 1) == 1


def _linear_scan(protocol, n, pl, idc):
    L = 0
    while True:
        c = planner.comm_cost(protocol, n, L + 1)
        if c.per_link_bits > pl or c.inter_dc_key_bits > idc:
            return L
        L += 1


def test_max_entry_size_bracketing():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        protocol = ("b2", "xor")[int(rng.integers(2))]
        n = int(rng.integers(1, 3000))
        pl, idc = int(rng.integers(0, 4000)), int(rng.integers(0, 4000))
        L = planner.max_entry_size(protocol, n, pl, idc)
        assert L == _linear_scan(protocol, n, pl, idc)
        if L:
            c = planner.comm_cost(protocol, n, L)
            assert c.per_link_bits <= pl and c.inter_dc_key_bits <= idc


def test_presets_exact():
    got = {s.name: (s.n, s.entry_bits) for s in planner.scenario_presets()}
    assert got == {
        "itunes": (60_000_000, 80_000_000),
        "ehr": (5_700_000, 40_000_000),
        "fingerprint": (7_700_000_000, 4000),
        "genome": (19116, 9_880_000),
    }
    with pytest.raises(ValueError):
        planner.scenario("mp3")


def test_feasibility_curve():
    grid = planner.log_grid(1, 10**9, 25)
    assert all(r["L_max"] == 0 for r in planner.feasibility_curve("b2", 0, 0, grid))
    rows = planner.feasibility_curve("b2", 10**8, 10**9, grid)
    ls = [r["L_max"] for r in rows]
    assert ls == sorted(ls, reverse=True)
    with pytest.raises(ValueError):
        planner.feasibility_curve("b2", 1, 1, [5, 3])
    csv = planner.curve_csv(rows)
    assert csv.splitlines()[0] == "n,L_max,per_link_cost,inter_dc_cost"


@pytest.mark.parametrize("n", [10**6, 10**9])
def test_scaling(n):
    r = planner.comm_cost("b2", 8 * n, 10**6).per_link_bits / planner.comm_cost("b2", n, 10**6).per_link_bits
    assert 1.9 <= r <= 2.1


@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_xor_cost_exact(n, L):
    c = planner.comm_cost("xor", n, L)
    assert (c.per_link_bits, c.inter_dc_key_bits) == (n + L, L)
