"""Relaxed two-server XOR retrieval: the user learns one XOR of chosen entries.

The user picks a selector ``i`` and learns ``XOR_x i_x w_x``. Each server
masks its one-bit answer with a bit ``k`` shared between the servers, so a
single answer is uniform and only the XOR of the two carries information.
Multi-bit entries run one instance per bit plane with a fresh ``k`` per plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import as_bits


@dataclass(frozen=True, eq=False)
class XorQueryPair:
    q1: np.ndarray
    q2: np.ndarray


def selector(n: int, x: int) -> np.ndarray:
    """Singleton selector for entry ``x`` (0-based)."""
    if not 0 <= x < n:
        raise ValueError(f"entry {x} outside 0..{n - 1}")
    i_vec = np.zeros(n, dtype=np.uint8)
    i_vec[x] = 1
    return i_vec


def xor_queries(i_vec, r) -> XorQueryPair:
    i_vec, r = as_bits(i_vec), as_bits(r)
    if i_vec.shape != r.shape:
        raise ValueError(f"selector has {i_vec.size} bits but randomness has {r.size}")
    return XorQueryPair(r.copy(), r ^ i_vec)


def xor_answer(q, w, k) -> np.ndarray:
    """``(XOR_x q_x w_x) XOR k``; ``w`` may carry leading plane/batch axes, ``k`` broadcasts."""
    q, w = as_bits(q), as_bits(w)
    if q.shape[-1] != w.shape[-1]:
        raise ValueError(f"query has {q.shape[-1]} bits but database has {w.shape[-1]}")
    inner = (w.astype(np.int64) @ q.astype(np.int64)) & 1
    return (inner.astype(np.uint8) ^ np.asarray(k, dtype=np.uint8))


def xor_decode(a1, a2) -> np.ndarray:
    return np.bitwise_xor(np.asarray(a1, dtype=np.uint8), np.asarray(a2, dtype=np.uint8))
