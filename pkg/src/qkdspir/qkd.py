"""Classical surrogate for epsilon-secure QKD key pairs, plus OTP helpers.

A key exchange either aborts or yields two halves ``s_a``/``s_b``. On a
mismatch event ``s_b`` is redrawn uniformly (it can still coincide with
``s_a`` with probability ``2**-len``). On a leak event Eve receives a copy of
``s_a``. Mismatch and leak are independent. This all-or-nothing leak stands in
for quantum side information; its distinguishing advantage is exactly
``p_leak``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bits import as_bits


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class QkdModelParams:
    p_abort: float = 0.0
    p_mismatch: float = 0.0
    p_leak: float = 0.0

    def __post_init__(self):
        for name in ("p_abort", "p_mismatch", "p_leak"):
            _check_prob(name, getattr(self, name))

    @property
    def eps_cor(self) -> float:
        return (1.0 - self.p_abort) * self.p_mismatch

    @property
    def eps_sec(self) -> float:
        return (1.0 - self.p_abort) * self.p_leak

    @property
    def eps(self) -> float:
        return self.eps_cor + self.eps_sec

    @property
    def ideal(self) -> bool:
        return self.p_abort == 0 and self.p_mismatch == 0 and self.p_leak == 0

    def to_dict(self) -> dict:
        return {"p_abort": self.p_abort, "p_mismatch": self.p_mismatch, "p_leak": self.p_leak}


@dataclass(frozen=True, eq=False)
class KeyPairOutcome:
    """``aborted`` outcomes carry no key material at all."""

    aborted: bool
    s_a: Optional[np.ndarray] = None
    s_b: Optional[np.ndarray] = None
    eve_leak: Optional[np.ndarray] = None

    @classmethod
    def abort(cls) -> "KeyPairOutcome":
        return cls(True)

    @classmethod
    def ideal(cls, key: np.ndarray) -> "KeyPairOutcome":
        key = as_bits(key)
        return cls(False, key, key.copy(), None)

    @property
    def matched(self) -> bool:
        return not self.aborted and np.array_equal(self.s_a, self.s_b)


@dataclass(frozen=True, eq=False)
class KeyHalves:
    enc: np.ndarray
    dec: np.ndarray


def sample_keypair(len_bits: int, params: QkdModelParams, rng: np.random.Generator) -> KeyPairOutcome:
    if len_bits <= 0 or len_bits % 2:
        raise ValueError(f"key length must be positive and even, got {len_bits}")
    # Fixed draw order keeps outcomes reproducible for a given stream.
    if rng.random() < params.p_abort:
        return KeyPairOutcome.abort()
    s_a = rng.integers(0, 2, size=len_bits, dtype=np.uint8)
    mismatch = rng.random() < params.p_mismatch
    leak = rng.random() < params.p_leak
    s_b = rng.integers(0, 2, size=len_bits, dtype=np.uint8) if mismatch else s_a.copy()
    return KeyPairOutcome(False, s_a, s_b, s_a.copy() if leak else None)


def split_key(key, responder: bool = False) -> KeyHalves:
    """Split a key into enc/dec halves.

    The initiator encrypts with the first half; the responder's roles are
    swapped so that its ``dec`` half is the initiator's ``enc`` half.
    """
    key = as_bits(key)
    if key.size % 2:
        raise ValueError(f"key length must be even, got {key.size}")
    half = key.size // 2
    first, second = key[:half].copy(), key[half:].copy()
    return KeyHalves(second, first) if responder else KeyHalves(first, second)


def otp(msg, pad) -> np.ndarray:
    msg, pad = as_bits(msg), as_bits(pad)
    if msg.shape != pad.shape:
        raise ValueError(f"message has {msg.size} bits but pad has {pad.size}")
    return msg ^ pad


def p_fail(p1: float, p2: float, p3: float) -> float:
    """Probability that at least one of three independent key exchanges aborts."""
    p1, p2, p3 = (_check_prob("abort probability", p) for p in (p1, p2, p3))
    return 1.0 - (1.0 - p1) * (1.0 - p2) * (1.0 - p3)
