"""Key and communication budgeting for SPIR deployments over QKD links.

Costs are in bits. Logarithms are base 2. For the cube protocol the side is
``m = ceil(n ** (1/3))`` (the database is zero-padded to ``m**3`` entries) and
each displacement is sent in ``ceil(log2 m)`` bits.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence, Tuple

EC_EFFICIENCY = 1.16


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class BlockStats:
    """Per-outcome block statistics; obtaining them from a channel model is out of scope."""

    n_t0: float
    n_t1: float
    e_t1: float
    n_t: float
    e_t: float

    def validate(self) -> None:
        for name in ("n_t0", "n_t1", "n_t"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("e_t1", "e_t"):
            if not 0.0 <= getattr(self, name) <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5]")


@dataclass(frozen=True)
class EpsilonBudget:
    eps_cor: float
    eps_prime: float
    eps_hat: float
    eps_pa: float

    def validate(self) -> None:
        for name, value in asdict(self).items():
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    name: str
    n: int
    entry_bits: int
    note: str


def ec_leakage(n_t: float, e_t: float) -> float:
    if n_t < 0:
        raise ValueError("n_t must be non-negative")
    if not 0.0 <= e_t <= 0.5:
        raise ValueError("e_t must lie in [0, 0.5]")
    return EC_EFFICIENCY * n_t * binary_entropy(e_t)


def key_length(stats: BlockStats, eps: EpsilonBudget) -> int:
    """Secret key bits extractable from one measurement-outcome block, floored and clamped at 0."""
    stats.validate()
    eps.validate()
    raw = (
        stats.n_t0
        + stats.n_t1 * (1.0 - binary_entropy(stats.e_t1))
        - ec_leakage(stats.n_t, stats.e_t)
        - math.log2(8.0 / eps.eps_cor)
        - 2.0 * math.log2(2.0 / (eps.eps_prime * eps.eps_hat))
        - 2.0 * math.log2(1.0 / (2.0 * eps.eps_pa))
    )
    return max(0, math.floor(raw))


def cube_side(n: int) -> int:
    """Smallest ``m`` with ``m**3 >= n`` (exact integer arithmetic)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    m = max(1, round(n ** (1.0 / 3.0)))
    while m**3 < n:
        m += 1
    while m > 1 and (m - 1) ** 3 >= n:
        m -= 1
    return m


def log2_ceil(m: int) -> int:
    return (m - 1).bit_length()


@dataclass(frozen=True)
class CostBreakdown:
    per_link_bits: int
    inter_dc_key_bits: int


def comm_cost(protocol: str, n: int, entry_bits: int) -> CostBreakdown:
    if n < 1 or entry_bits < 1:
        raise ValueError("n and entry_bits must be at least 1")
    L = entry_bits
    if protocol == "b2":
        m = cube_side(n)
        return CostBreakdown(7 * L + 3 * log2_ceil(m) + (3 + 3 * L) * m, 9 * L * m + 10 * L)
    if protocol == "xor":
        return CostBreakdown(n + L, L)
    raise ValueError(f"protocol must be 'b2' or 'xor', got {protocol!r}")


def max_entry_size(protocol: str, n: int, per_link_budget: int, inter_dc_budget: int) -> int:
    """Largest L whose cost fits both budgets; 0 when even L = 1 does not fit."""
    if per_link_budget < 0 or inter_dc_budget < 0:
        raise ValueError("budgets must be non-negative")
    if protocol == "b2":
        m = cube_side(n)
        # per_link = L(7 + 3m) + 3 log m + 3m; inter_dc = L(9m + 10).
        fixed = 3 * log2_ceil(m) + 3 * m
        by_link = (per_link_budget - fixed) // (7 + 3 * m) if per_link_budget >= fixed else 0
        by_key = inter_dc_budget // (9 * m + 10)
    elif protocol == "xor":
        by_link = max(0, per_link_budget - n)
        by_key = inter_dc_budget
    else:
        raise ValueError(f"protocol must be 'b2' or 'xor', got {protocol!r}")
    return max(0, min(by_link, by_key))


def scenario_presets() -> List[Scenario]:
    return [
        Scenario("itunes", 60_000_000, 80_000_000, "60 million songs of 10 MB"),
        Scenario("ehr", 5_700_000, 40_000_000, "5.7 million patient charts of 5 MB"),
        Scenario("fingerprint", 7_700_000_000, 4000, "7.7 billion minutiae records of 500 bytes"),
        Scenario("genome", 19116, 9_880_000, "19116 genes of up to 9.88 million bits"),
    ]


def scenario(name: str) -> Scenario:
    for s in scenario_presets():
        if s.name == name.lower():
            return s
    raise ValueError(f"unknown scenario {name!r}; choose from {[s.name for s in scenario_presets()]}")


CURVE_COLUMNS = ("n", "L_max", "per_link_cost", "inter_dc_cost")


def feasibility_curve(protocol: str, per_link_budget: int, inter_dc_budget: int,
                      n_grid: Sequence[int]) -> List[Dict[str, int]]:
    """L_max at each grid point, with the cost of that L (zero cost when L_max = 0)."""
    if list(n_grid) != sorted(n_grid):
        raise ValueError("n_grid must be sorted ascending")
    rows = []
    for n in n_grid:
        L = max_entry_size(protocol, n, per_link_budget, inter_dc_budget)
        cost = comm_cost(protocol, n, L) if L else CostBreakdown(0, 0)
        rows.append({"n": n, "L_max": L, "per_link_cost": cost.per_link_bits,
                     "inter_dc_cost": cost.inter_dc_key_bits})
    return rows


def curve_csv(rows: Sequence[Dict[str, int]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CURVE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def log_grid(lo: int, hi: int, points: int) -> List[int]:
    """Roughly log-spaced integers from ``lo`` to ``hi`` inclusive, deduplicated."""
    if lo < 1 or hi < lo or points < 1:
        raise ValueError("need 1 <= lo <= hi and points >= 1")
    if points == 1:
        return [lo]
    step = (math.log10(hi) - math.log10(lo)) / (points - 1)
    return sorted({int(round(10 ** (math.log10(lo) + i * step))) for i in range(points)})


def scenario_table(protocol: str) -> List[Tuple[Scenario, CostBreakdown]]:
    return [(s, comm_cost(protocol, s.n, s.entry_bits)) for s in scenario_presets()]
