"""Cube-indexed two-server SPIR with conditional disclosure of secrets.

Single bit plane. The database of ``n = m**3`` bits is addressed by a
:class:`CubeIndex` ``(x1, x2, x3)`` with coordinates in ``1..m``; the flat
position is ``(x1-1)*m*m + (x2-1)*m + (x3-1)``.

Answer and decode functions accept leading batch axes on the database and on
the CDS key arrays, which lets exhaustive checks evaluate many databases and
keys in one call. Queries are never batched.

All displacement arithmetic is modulo ``m`` with representatives ``1..m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .bits import as_bits

# Y vectors are stored in this sigma order; T bits are indexed by int(sigma, 2).
Y_SIGMAS = ("001", "010", "100", "011", "101", "110")
_Y = {s: i for i, s in enumerate(Y_SIGMAS)}
T_PARITY_SLOT = 0b111


def wrap(value: int, m: int) -> int:
    """Reduce ``value`` mod ``m`` into ``1..m`` (0 maps to m)."""
    return (value - 1) % m + 1


def disp_bits(m: int) -> int:
    """Wire width of one displacement value."""
    return max(1, (m - 1).bit_length())


@dataclass(frozen=True)
class CubeIndex:
    x1: int
    x2: int
    x3: int

    def coords(self) -> Tuple[int, int, int]:
        return (self.x1, self.x2, self.x3)

    def validate(self, m: int) -> None:
        if m < 2:
            raise ValueError(f"m must be at least 2, got {m}")
        for c in self.coords():
            if not 1 <= c <= m:
                raise ValueError(f"coordinate {c} outside 1..{m}")

    def flat(self, m: int) -> int:
        self.validate(m)
        return (self.x1 - 1) * m * m + (self.x2 - 1) * m + (self.x3 - 1)

    @classmethod
    def from_flat(cls, k: int, m: int) -> "CubeIndex":
        if not 0 <= k < m**3:
            raise ValueError(f"flat index {k} outside 0..{m**3 - 1}")
        return cls(k // (m * m) + 1, (k // m) % m + 1, k % m + 1)


@dataclass(frozen=True, eq=False)
class UserRandomness:
    r_s: np.ndarray  # (3, m) subset indicators
    r_d: Tuple[int, int, int]

    @property
    def m(self) -> int:
        return self.r_s.shape[-1]

    @classmethod
    def sample(cls, rng: np.random.Generator, m: int) -> "UserRandomness":
        r_s = rng.integers(0, 2, size=(3, m), dtype=np.uint8)
        r_d = tuple(int(v) for v in rng.integers(1, m + 1, size=3))
        return cls(r_s, r_d)

    @classmethod
    def from_int(cls, value: int, m: int) -> "UserRandomness":
        """Enumerate the randomness space: ``0 <= value < 2**(3m) * m**3``."""
        sets, disp = value % (1 << (3 * m)), value >> (3 * m)
        r_s = np.array([(sets >> i) & 1 for i in range(3 * m)], dtype=np.uint8).reshape(3, m)
        r_d = (disp // (m * m) + 1, (disp // m) % m + 1, disp % m + 1)
        return cls(r_s, r_d)

    def __eq__(self, other):
        return (
            isinstance(other, UserRandomness)
            and self.r_d == other.r_d
            and np.array_equal(self.r_s, other.r_s)
        )


@dataclass(frozen=True, eq=False)
class B2Query:
    q_s: np.ndarray  # (3, m)
    q_d: Tuple[int, int, int]

    @property
    def m(self) -> int:
        return self.q_s.shape[-1]

    def validate(self, m: int) -> None:
        if self.q_s.shape != (3, m):
            raise ValueError(f"set query must have shape (3, {m}), got {self.q_s.shape}")
        if len(self.q_d) != 3 or any(not 1 <= d <= m for d in self.q_d):
            raise ValueError(f"displacements {self.q_d} must be three values in 1..{m}")

    def to_bits(self) -> np.ndarray:
        """Wire form: 3m set bits, then each displacement as ``d-1`` MSB first."""
        width = disp_bits(self.m)
        disp = [(d - 1) >> (width - 1 - k) & 1 for d in self.q_d for k in range(width)]
        return np.concatenate([self.q_s.reshape(-1), np.array(disp, dtype=np.uint8)])

    @classmethod
    def from_bits(cls, bits: np.ndarray, m: int) -> "B2Query":
        """Inverse of :meth:`to_bits`; a displacement field ``v`` decodes to ``v mod m + 1``."""
        width = disp_bits(m)
        bits = as_bits(bits, 3 * m + 3 * width)
        q_s = bits[: 3 * m].reshape(3, m).copy()
        q_d = []
        for i in range(3):
            field = bits[3 * m + i * width : 3 * m + (i + 1) * width]
            v = 0
            for b in field:
                v = (v << 1) | int(b)
            q_d.append(v % m + 1)
        return cls(q_s, tuple(q_d))

    def key(self) -> tuple:
        return (self.q_s.tobytes(), self.q_d)

    def __eq__(self, other):
        return isinstance(other, B2Query) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True, eq=False)
class CdsKey:
    """Shared masks ``(u, t, y, z)``; arrays may carry leading batch axes."""

    u: np.ndarray  # (..., 3)
    t: np.ndarray  # (..., 8), indexed by int(sigma, 2)
    y: np.ndarray  # (..., 6, m), rows in Y_SIGMAS order
    z: np.ndarray  # (..., 3, m)

    @property
    def m(self) -> int:
        return self.y.shape[-1]

    @classmethod
    def from_free_bits(cls, bits: np.ndarray, m: int) -> "CdsKey":
        """Build from ``9m + 10`` free bits laid out as u(3), t-free(7), y(6m), z(3m).

        The free t bits fill sigma slots 000..110; slot 111 is set by parity.
        """
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape[-1] != free_key_bits(m):
            raise ValueError(f"expected {free_key_bits(m)} key bits, got {bits.shape[-1]}")
        u = bits[..., 0:3]
        t_free = bits[..., 3:10]
        parity = np.bitwise_xor.reduce(t_free, axis=-1)[..., None]
        t = np.concatenate([t_free, parity], axis=-1)
        y = bits[..., 10 : 10 + 6 * m].reshape(bits.shape[:-1] + (6, m))
        z = bits[..., 10 + 6 * m :].reshape(bits.shape[:-1] + (3, m))
        return cls(u, t, y, z)

    @classmethod
    def sample(cls, rng: np.random.Generator, m: int, batch: tuple = ()) -> "CdsKey":
        bits = rng.integers(0, 2, size=batch + (free_key_bits(m),), dtype=np.uint8)
        return cls.from_free_bits(bits, m)

    def free_bits(self) -> np.ndarray:
        lead = self.u.shape[:-1]
        return np.concatenate(
            [self.u, self.t[..., :7], self.y.reshape(lead + (-1,)), self.z.reshape(lead + (-1,))],
            axis=-1,
        )

    def parity_ok(self) -> bool:
        return not np.bitwise_xor.reduce(self.t, axis=-1).any()

    def validate(self) -> None:
        if not self.parity_ok():
            raise ValueError("CDS key violates T parity (XOR of all T bits must be 0)")

    def __eq__(self, other):
        return isinstance(other, CdsKey) and all(
            np.array_equal(a, b)
            for a, b in zip((self.u, self.t, self.y, self.z), (other.u, other.t, other.y, other.z))
        )


def free_key_bits(m: int) -> int:
    return 3 + 7 + 9 * m


@dataclass(frozen=True, eq=False)
class Dc1Answer:
    a000: np.ndarray  # (...,)
    a100: np.ndarray  # (..., m)
    a010: np.ndarray
    a001: np.ndarray
    a_cds: np.ndarray  # (..., 3)
    y_extra: np.ndarray  # (..., 3): y011[q_d1], y101[q_d2], y110[q_d3]

    def to_bits(self) -> np.ndarray:
        return np.concatenate(
            [self.a000[..., None], self.a100, self.a010, self.a001, self.a_cds, self.y_extra],
            axis=-1,
        )

    @classmethod
    def from_bits(cls, bits: np.ndarray, m: int) -> "Dc1Answer":
        return cls(*_split_answer(bits, m))


@dataclass(frozen=True, eq=False)
class Dc2Answer:
    a111: np.ndarray
    a011: np.ndarray
    a101: np.ndarray
    a110: np.ndarray
    a_cds2: np.ndarray
    y_extra: np.ndarray  # y100[q_d1], y010[q_d2], y001[q_d3]

    def to_bits(self) -> np.ndarray:
        return np.concatenate(
            [self.a111[..., None], self.a011, self.a101, self.a110, self.a_cds2, self.y_extra],
            axis=-1,
        )

    @classmethod
    def from_bits(cls, bits: np.ndarray, m: int) -> "Dc2Answer":
        return cls(*_split_answer(bits, m))


def answer_bits(m: int) -> int:
    return 3 * m + 7


def query_bits(m: int) -> int:
    return 3 * m + 3 * disp_bits(m)


def _split_answer(bits: np.ndarray, m: int):
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != answer_bits(m):
        raise ValueError(f"answer must have {answer_bits(m)} bits, got {bits.shape[-1]}")
    return (
        bits[..., 0],
        bits[..., 1 : 1 + m],
        bits[..., 1 + m : 1 + 2 * m],
        bits[..., 1 + 2 * m : 1 + 3 * m],
        bits[..., 1 + 3 * m : 4 + 3 * m],
        bits[..., 4 + 3 * m : 7 + 3 * m],
    )


def sym_diff(s: np.ndarray, j: int) -> np.ndarray:
    """Toggle membership of ``j`` (1-based) in the subset indicator ``s``."""
    s = np.asarray(s, dtype=np.uint8)
    if not 1 <= j <= s.shape[-1]:
        raise ValueError(f"element {j} outside 1..{s.shape[-1]}")
    out = s.copy()
    out[..., j - 1] ^= 1
    return out


def derive_queries(x: CubeIndex, r: UserRandomness, m: int) -> Tuple[B2Query, B2Query]:
    x.validate(m)
    if r.r_s.shape != (3, m) or len(r.r_d) != 3:
        raise ValueError(f"randomness does not match m={m}")
    if any(not 1 <= d <= m for d in r.r_d):
        raise ValueError(f"displacements {r.r_d} must lie in 1..{m}")
    q1 = B2Query(r.r_s.copy(), tuple(r.r_d))
    q2_s = np.stack([sym_diff(r.r_s[i], c) for i, c in enumerate(x.coords())])
    q2_d = tuple(wrap(c - d, m) for c, d in zip(x.coords(), r.r_d))
    return q1, B2Query(q2_s, q2_d)


def _check_inputs(q: B2Query, w: np.ndarray, cds: CdsKey) -> Tuple[int, np.ndarray]:
    m = q.m
    q.validate(m)
    w = np.asarray(w, dtype=np.uint8)
    if w.shape[-1] != m**3:
        raise ValueError(f"database must have m**3 = {m**3} bits, got {w.shape[-1]}")
    if cds.m != m:
        raise ValueError(f"CDS key built for m={cds.m}, query uses m={m}")
    return m, w.reshape(w.shape[:-1] + (m, m, m))


def _cube_parts(cube: np.ndarray, q_s: np.ndarray):
    """Sub-cube XOR over q_s[0] x q_s[1] x q_s[2] and its per-axis toggle deltas.

    Toggling ``j`` in axis ``i`` flips the sub-cube XOR by ``plane[i][..., j]``.
    """
    s1, s2, s3 = (q_s[i].astype(np.int64) for i in range(3))
    c = cube.astype(np.int64)
    p1 = np.einsum("...abc,b,c->...a", c, s2, s3) & 1
    p2 = np.einsum("...abc,a,c->...b", c, s1, s3) & 1
    p3 = np.einsum("...abc,a,b->...c", c, s1, s2) & 1
    full = (p1 @ s1) & 1
    return full.astype(np.uint8), [p.astype(np.uint8) for p in (p1, p2, p3)]


def _shifted(vec: np.ndarray, d: int, m: int) -> np.ndarray:
    """``out[..., j-1] = vec[..., wrap(j - d) - 1]`` for j in 1..m."""
    idx = [wrap(j - d, m) - 1 for j in range(1, m + 1)]
    return vec[..., idx]


def _cds_bits(q_s: np.ndarray, cds: CdsKey) -> np.ndarray:
    return ((cds.z.astype(np.int64) * q_s).sum(axis=-1) & 1).astype(np.uint8) ^ cds.u


def answer_dc1(q: B2Query, w: np.ndarray, cds: CdsKey) -> Dc1Answer:
    m, cube = _check_inputs(q, w, cds)
    full, planes = _cube_parts(cube, q.q_s)
    t = cds.t
    a000 = full ^ t[..., 0b000]
    portions = []
    for axis, sigma in enumerate(("100", "010", "001")):
        y = _shifted(cds.y[..., _Y[sigma], :], q.q_d[axis], m)
        portions.append(full[..., None] ^ planes[axis] ^ y ^ t[..., int(sigma, 2), None])
    y_extra = np.stack(
        [cds.y[..., _Y[s], d - 1] for s, d in zip(("011", "101", "110"), q.q_d)], axis=-1
    )
    a_cds = _cds_bits(q.q_s, cds)
    full_b = np.broadcast_shapes(full.shape, t.shape[:-1])
    return Dc1Answer(
        np.broadcast_to(a000, full_b).copy(),
        *portions,
        np.broadcast_to(a_cds, full_b + (3,)).copy(),
        np.broadcast_to(y_extra, full_b + (3,)).copy(),
    )


def answer_dc2(q: B2Query, w: np.ndarray, cds: CdsKey) -> Dc2Answer:
    m, cube = _check_inputs(q, w, cds)
    full, planes = _cube_parts(cube, q.q_s)
    t = cds.t
    a111 = full ^ t[..., 0b111]
    portions = []
    for axis, sigma in enumerate(("011", "101", "110")):
        y = _shifted(cds.y[..., _Y[sigma], :], q.q_d[axis], m)
        portions.append(
            full[..., None] ^ planes[axis] ^ y ^ t[..., int(sigma, 2), None] ^ cds.z[..., axis, :]
        )
    y_extra = np.stack(
        [cds.y[..., _Y[s], d - 1] for s, d in zip(("100", "010", "001"), q.q_d)], axis=-1
    )
    a_cds2 = _cds_bits(q.q_s, cds)
    full_b = np.broadcast_shapes(full.shape, t.shape[:-1])
    return Dc2Answer(
        np.broadcast_to(a111, full_b).copy(),
        *portions,
        np.broadcast_to(a_cds2, full_b + (3,)).copy(),
        np.broadcast_to(y_extra, full_b + (3,)).copy(),
    )


def decode(
    a1: Dc1Answer,
    a2: Dc2Answer,
    q1: B2Query,
    q2: B2Query,
    x: CubeIndex,
    r: UserRandomness,
) -> np.ndarray:
    """Recover ``w_x`` from both answers.

    The CDS answers yield ``z^i_{x^i}`` for every axis, and all three are
    needed: each of the portions 011, 101 and 110 is masked by its own z entry.
    """
    j1, j2, j3 = (c - 1 for c in x.coords())
    z = a1.a_cds ^ a2.a_cds2
    out = (a1.a100[..., j1] ^ a2.y_extra[..., 0]) ^ (a2.a011[..., j1] ^ a1.y_extra[..., 0])
    out = out ^ (a1.a010[..., j2] ^ a2.y_extra[..., 1]) ^ (a2.a101[..., j2] ^ a1.y_extra[..., 1])
    out = out ^ (a1.a001[..., j3] ^ a2.y_extra[..., 2]) ^ (a2.a110[..., j3] ^ a1.y_extra[..., 2])
    out = out ^ z[..., 0] ^ z[..., 1] ^ z[..., 2]
    return out ^ a2.a111 ^ a1.a000
