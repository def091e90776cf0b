"""Bit-vector helpers shared by the protocol modules.

Bit vectors are ``numpy.uint8`` arrays holding 0/1 values. Leading axes are
treated as batch axes by the protocol functions that support batching.
"""

from __future__ import annotations

import numpy as np

BOTTOM = "⊥"


def as_bits(values, length: int | None = None) -> np.ndarray:
    """Coerce a sequence of 0/1 values (or a '0101' string) to a bit array."""
    if isinstance(values, str):
        values = [int(ch) for ch in values]
    trusted = isinstance(values, np.ndarray) and values.dtype == np.uint8
    arr = np.asarray(values, dtype=np.uint8)
    # uint8 arrays produced inside the package are already 0/1.
    if not trusted and arr.size and arr.max() > 1:
        raise ValueError("bit vectors may only contain 0 and 1")
    if length is not None and arr.shape[-1:] != (length,):
        raise ValueError(f"expected {length} bits, got shape {arr.shape}")
    return arr


def random_bits(rng: np.random.Generator, length: int) -> np.ndarray:
    return rng.integers(0, 2, size=length, dtype=np.uint8)


def xor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"length mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.bitwise_xor(a, b)


def bits_to_str(bits: np.ndarray) -> str:
    return "".join(str(int(b)) for b in bits)


def encode_hex(bits: np.ndarray | None) -> str:
    """Encode as ``"<nbits>:<hex>"``; bits are packed MSB first. ``None`` -> ⊥."""
    if bits is None:
        return BOTTOM
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    return f"{bits.size}:{np.packbits(bits).tobytes().hex()}"


def decode_hex(text: str) -> np.ndarray | None:
    if text == BOTTOM:
        return None
    try:
        size_s, hex_s = text.split(":", 1)
        size = int(size_s)
        raw = np.frombuffer(bytes.fromhex(hex_s), dtype=np.uint8)
    except ValueError as exc:
        raise ValueError(f"malformed bit vector {text!r}") from exc
    if size < 0 or raw.size != (size + 7) // 8:
        raise ValueError(f"malformed bit vector {text!r}")
    return np.unpackbits(raw)[:size].astype(np.uint8)


def bits_to_int(bits: np.ndarray) -> int:
    """Little-endian packing: bit i of the result is ``bits[i]``."""
    out = 0
    for i in np.flatnonzero(np.asarray(bits).ravel()):
        out |= 1 << int(i)
    return out


def int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> i) & 1 for i in range(length)], dtype=np.uint8)
