"""End-to-end protocol runs over three QKD links, with transcripts and views.

Step order follows the generic one-round flow: key exchange D1<->D2, then
U<->D1, then U<->D2; query; OTP transport of both queries; answers; OTP
transport of both answers; decode. If any exchange aborts, nothing after it
runs and every later variable is recorded as ⊥ (``None``).

Key roles: on link ``u_d1`` the data centre holds ``s_a`` (S1) and the user
``s_b`` (S2); on ``u_d2`` DC2 holds S3 and the user S4; on ``d1_d2`` DC1
holds S5 and DC2 S6. The user is the initiator when splitting U-link keys.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import b2, xorpir
from .bits import BOTTOM, decode_hex, encode_hex
from .qkd import KeyPairOutcome, QkdModelParams, otp, sample_keypair, split_key

B2, XOR = "b2", "xor"
PROTOCOLS = (B2, XOR)
LINKS = ("d1_d2", "u_d1", "u_d2")
PARTIES = ("user_eve", "dc1_eve", "dc2_eve", "eve")


class InsufficientKeyMaterial(ValueError):
    pass


@dataclass(frozen=True)
class AdversarySpec:
    """At most one dishonest role per run.

    ``role="user"``: either fixed ``queries`` (wire bits or B2Query pair) or a
    ``query_fn(x, r) -> (q1, q2)``; decoding uses ``decode_as`` when given.
    ``role="dc"``: data centre ``which`` replaces its answer with
    ``answer_fn(honest_bits, received_query_bits, w) -> bits``.
    """

    role: str = "none"
    queries: Optional[tuple] = None
    query_fn: Optional[Callable] = None
    decode_as: object = None
    which: Optional[int] = None
    answer_fn: Optional[Callable] = None

    @classmethod
    def honest(cls) -> "AdversarySpec":
        return cls()

    @classmethod
    def user(cls, queries=None, query_fn=None, decode_as=None) -> "AdversarySpec":
        return cls("user", queries=queries, query_fn=query_fn, decode_as=decode_as)

    @classmethod
    def dc(cls, which: int, answer_fn: Callable) -> "AdversarySpec":
        return cls("dc", which=which, answer_fn=answer_fn)

    def validate(self) -> None:
        if self.role not in ("none", "user", "dc"):
            raise ValueError(f"adversary.role must be none, user or dc, got {self.role!r}")
        if self.role == "user" and (self.queries is None) == (self.query_fn is None):
            raise ValueError("adversary.queries: a dishonest user needs exactly one of queries/query_fn")
        if self.role == "dc":
            if self.which not in (1, 2):
                raise ValueError(f"adversary.which must be 1 or 2, got {self.which!r}")
            if self.answer_fn is None:
                raise ValueError("adversary.answer_fn is required for a dishonest data centre")


@dataclass(frozen=True)
class RunConfig:
    protocol: str = B2
    size: int = 2  # m for b2, n for xor
    entry_bits: int = 1
    links: Dict[str, QkdModelParams] = field(default_factory=lambda: {k: QkdModelParams() for k in LINKS})
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    seed: int = 0

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.protocol == B2 and self.size < 2:
            raise ValueError(f"m must be at least 2, got {self.size}")
        if self.protocol == XOR and self.size < 1:
            raise ValueError(f"n must be at least 1, got {self.size}")
        if self.entry_bits < 1:
            raise ValueError(f"entry_bits must be at least 1, got {self.entry_bits}")
        if set(self.links) != set(LINKS):
            raise ValueError(f"links must configure exactly {LINKS}, got {sorted(self.links)}")
        self.adversary.validate()

    @property
    def n(self) -> int:
        return self.size**3 if self.protocol == B2 else self.size

    @property
    def query_len(self) -> int:
        return b2.query_bits(self.size) if self.protocol == B2 else self.size

    @property
    def answer_len(self) -> int:
        per_plane = b2.answer_bits(self.size) if self.protocol == B2 else 1
        return self.entry_bits * per_plane

    @property
    def cds_len(self) -> int:
        per_plane = b2.free_key_bits(self.size) if self.protocol == B2 else 1
        return self.entry_bits * per_plane

    def key_len(self, link: str) -> int:
        if link == "d1_d2":
            return self.cds_len + self.cds_len % 2
        return 2 * max(self.query_len, self.answer_len)

    def describe(self) -> dict:
        """JSON-friendly summary (adversary callables are named, not serialized)."""
        adv = {"role": self.adversary.role}
        if self.adversary.which is not None:
            adv["which"] = self.adversary.which
        return {
            "protocol": self.protocol,
            "size": self.size,
            "entry_bits": self.entry_bits,
            "links": {k: self.links[k].to_dict() for k in LINKS},
            "adversary": adv,
        }

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def derive_cds_from_key(key: np.ndarray, m: int, entry_bits: int) -> List[b2.CdsKey]:
    """Slice a D1<->D2 key into one CdsKey per bit plane (layout u, t-free, y, z)."""
    per_plane = b2.free_key_bits(m)
    need = per_plane * entry_bits
    key = np.asarray(key, dtype=np.uint8)
    if key.size < need:
        raise InsufficientKeyMaterial(
            f"insufficient key material: need {need} bits for m={m}, L={entry_bits}, have {key.size}"
        )
    return [b2.CdsKey.from_free_bits(key[p * per_plane : (p + 1) * per_plane], m) for p in range(entry_bits)]


@dataclass(eq=False)
class RunRecord:
    """Full classical transcript of one run. ``None`` stands for ⊥."""

    protocol: str
    size: int
    entry_bits: int
    aborted: bool
    w: np.ndarray  # (n, L) entry-major
    x: object  # CubeIndex for b2, selector bits for xor
    w_hat: Optional[np.ndarray] = None
    r: object = None
    q1: Optional[np.ndarray] = None
    q2: Optional[np.ndarray] = None
    a1_tilde: Optional[np.ndarray] = None
    a2_tilde: Optional[np.ndarray] = None
    q1_tilde: Optional[np.ndarray] = None
    q2_tilde: Optional[np.ndarray] = None
    a1: Optional[np.ndarray] = None
    a2: Optional[np.ndarray] = None
    keys: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)  # s1..s6
    c_q1: Optional[np.ndarray] = None
    c_q2: Optional[np.ndarray] = None
    c_a1: Optional[np.ndarray] = None
    c_a2: Optional[np.ndarray] = None
    leaks: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    steps: List[str] = field(default_factory=list)
    trial: Optional[int] = None

    @property
    def outcome(self) -> str:
        return "aborted" if self.aborted else "decoded"

    def expected(self) -> np.ndarray:
        """The value an honest run should decode: ``w_x`` or the selected XOR."""
        if self.protocol == B2:
            return self.w[self.x.flat(self.size)]
        sel = np.asarray(self.x, dtype=np.int64)
        return ((sel @ self.w.astype(np.int64)) & 1).astype(np.uint8)

    def correct(self) -> Optional[bool]:
        if self.aborted:
            return None
        return bool(np.array_equal(self.w_hat, self.expected()))

    # -- serialization -------------------------------------------------
    def to_json(self) -> dict:
        if self.protocol == B2:
            x = list(self.x.coords())
            r = None if self.r is None else {"r_s": encode_hex(self.r.r_s), "r_d": list(self.r.r_d)}
        else:
            x = encode_hex(self.x)
            r = encode_hex(self.r)
        out = {
            "type": "run",
            "trial": self.trial,
            "protocol": self.protocol,
            "size": self.size,
            "entry_bits": self.entry_bits,
            "outcome": self.outcome,
            "w_hat": encode_hex(self.w_hat),
            "x": x,
            "w": encode_hex(self.w),
            "r": BOTTOM if r is None else r,
        }
        for name in ("q1", "q2", "a1_tilde", "a2_tilde", "q1_tilde", "q2_tilde", "a1", "a2",
                     "c_q1", "c_q2", "c_a1", "c_a2"):
            out[name] = encode_hex(getattr(self, name))
        out["keys"] = {k: encode_hex(self.keys.get(k)) for k in KEY_NAMES}
        out["leaks"] = {k: encode_hex(self.leaks.get(k)) for k in LINKS}
        out["steps"] = list(self.steps)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        protocol, size, L = obj["protocol"], int(obj["size"]), int(obj["entry_bits"])
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        n = size**3 if protocol == B2 else size
        w = decode_hex(obj["w"])
        if w is None or w.size != n * L:
            raise ValueError("database field has wrong length")
        if protocol == B2:
            x = b2.CubeIndex(*(int(c) for c in obj["x"]))
            r = None
            if obj["r"] != BOTTOM:
                r = b2.UserRandomness(
                    decode_hex(obj["r"]["r_s"]).reshape(3, size), tuple(int(v) for v in obj["r"]["r_d"])
                )
        else:
            x = decode_hex(obj["x"])
            r = decode_hex(obj["r"])
        if obj["outcome"] not in ("aborted", "decoded"):
            raise ValueError(f"unknown outcome {obj['outcome']!r}")
        kwargs = {
            name: decode_hex(obj[name])
            for name in ("q1", "q2", "a1_tilde", "a2_tilde", "q1_tilde", "q2_tilde", "a1", "a2",
                         "c_q1", "c_q2", "c_a1", "c_a2")
        }
        return cls(
            protocol=protocol,
            size=size,
            entry_bits=L,
            aborted=obj["outcome"] == "aborted",
            w=w.reshape(n, L),
            x=x,
            w_hat=decode_hex(obj["w_hat"]),
            r=r,
            keys={k: decode_hex(v) for k, v in obj["keys"].items()},
            leaks={k: decode_hex(v) for k, v in obj["leaks"].items()},
            steps=list(obj["steps"]),
            trial=obj.get("trial"),
            **kwargs,
        )


KEY_NAMES = ("s1", "s2", "s3", "s4", "s5", "s6")
_LINK_KEYS = {"d1_d2": ("s5", "s6"), "u_d1": ("s1", "s2"), "u_d2": ("s3", "s4")}


def _normalize_db(w, n: int, L: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.uint8)
    if w.ndim == 1 and L == 1:
        w = w[:, None]
    if w.shape != (n, L):
        raise ValueError(f"database must have shape ({n}, {L}) (entries x bits), got {w.shape}")
    return w


def _user_queries(cfg: RunConfig, x, r) -> Tuple[np.ndarray, np.ndarray]:
    adv = cfg.adversary
    if adv.role == "user":
        pair = adv.queries if adv.queries is not None else adv.query_fn(x, r)
        q1, q2 = (q.to_bits() if isinstance(q, b2.B2Query) else np.asarray(q, dtype=np.uint8) for q in pair)
        if q1.shape != (cfg.query_len,) or q2.shape != (cfg.query_len,):
            raise ValueError(f"adversarial queries must have {cfg.query_len} bits each")
        return q1, q2
    if cfg.protocol == B2:
        q1, q2 = b2.derive_queries(x, r, cfg.size)
        return q1.to_bits(), q2.to_bits()
    pair = xorpir.xor_queries(x, r)
    return pair.q1, pair.q2


def _answer(cfg: RunConfig, which: int, q_bits: np.ndarray, w: np.ndarray, shared: np.ndarray) -> np.ndarray:
    L = cfg.entry_bits
    if cfg.protocol == B2:
        m = cfg.size
        q = b2.B2Query.from_bits(q_bits, m)
        fn = b2.answer_dc1 if which == 1 else b2.answer_dc2
        planes = [fn(q, w[:, p], cds).to_bits() for p, cds in enumerate(derive_cds_from_key(shared, m, L))]
        out = np.concatenate(planes)
    else:
        if shared.size < L:
            raise InsufficientKeyMaterial(f"insufficient key material: need {L} shared bits, have {shared.size}")
        out = xorpir.xor_answer(q_bits, w.T, shared[:L])
    adv = cfg.adversary
    if adv.role == "dc" and adv.which == which:
        out = np.asarray(adv.answer_fn(out, q_bits, w), dtype=np.uint8)
        if out.shape != (cfg.answer_len,):
            raise ValueError(f"adversarial answer must have {cfg.answer_len} bits")
    return out


def _decode(cfg: RunConfig, a1: np.ndarray, a2: np.ndarray, q1: np.ndarray, q2: np.ndarray, x, r) -> np.ndarray:
    if cfg.protocol == XOR:
        return xorpir.xor_decode(a1, a2)
    m, L = cfg.size, cfg.entry_bits
    target = cfg.adversary.decode_as if cfg.adversary.role == "user" and cfg.adversary.decode_as else x
    bq1, bq2 = b2.B2Query.from_bits(q1, m), b2.B2Query.from_bits(q2, m)
    n_ans = b2.answer_bits(m)
    out = []
    for p in range(L):
        d1 = b2.Dc1Answer.from_bits(a1[p * n_ans : (p + 1) * n_ans], m)
        d2 = b2.Dc2Answer.from_bits(a2[p * n_ans : (p + 1) * n_ans], m)
        out.append(int(b2.decode(d1, d2, bq1, bq2, target, r)))
    return np.array(out, dtype=np.uint8)


def execute(
    cfg: RunConfig,
    w,
    x,
    r,
    keys: Dict[str, KeyPairOutcome],
) -> RunRecord:
    """Deterministic run given every random input.

    ``keys`` maps link names to outcomes in exchange order; a missing link
    means the exchange never took place because an earlier one aborted.
    """
    w = _normalize_db(w, cfg.n, cfg.entry_bits)
    rec = RunRecord(cfg.protocol, cfg.size, cfg.entry_bits, True, w, x)
    for link in LINKS:
        outcome = keys.get(link)
        if outcome is None:
            break
        rec.steps.append(f"key:{link}")
        if outcome.aborted:
            break
        a_name, b_name = _LINK_KEYS[link]
        rec.keys[a_name], rec.keys[b_name] = outcome.s_a, outcome.s_b
        rec.leaks[link] = outcome.eve_leak
    else:
        rec.aborted = False
    if rec.aborted:
        return rec

    rec.r = r
    rec.steps.append("query")
    q1, q2 = _user_queries(cfg, x, r)
    rec.q1, rec.q2 = q1, q2
    nq, na = cfg.query_len, cfg.answer_len
    user1, dc1 = split_key(rec.keys["s2"]), split_key(rec.keys["s1"], responder=True)
    user2, dc2 = split_key(rec.keys["s4"]), split_key(rec.keys["s3"], responder=True)

    rec.steps.append("otp:u->d1")
    rec.c_q1 = otp(q1, user1.enc[:nq])
    rec.q1_tilde = otp(rec.c_q1, dc1.dec[:nq])
    rec.steps.append("otp:u->d2")
    rec.c_q2 = otp(q2, user2.enc[:nq])
    rec.q2_tilde = otp(rec.c_q2, dc2.dec[:nq])

    rec.steps.append("answer:d1")
    rec.a1 = _answer(cfg, 1, rec.q1_tilde, w, rec.keys["s5"])
    rec.steps.append("answer:d2")
    rec.a2 = _answer(cfg, 2, rec.q2_tilde, w, rec.keys["s6"])

    rec.steps.append("otp:d1->u")
    rec.c_a1 = otp(rec.a1, dc1.enc[:na])
    rec.a1_tilde = otp(rec.c_a1, user1.dec[:na])
    rec.steps.append("otp:d2->u")
    rec.c_a2 = otp(rec.a2, dc2.enc[:na])
    rec.a2_tilde = otp(rec.c_a2, user2.dec[:na])

    rec.steps.append("decode")
    rec.w_hat = _decode(cfg, rec.a1_tilde, rec.a2_tilde, q1, q2, x, r)
    return rec


def sample_user_randomness(cfg: RunConfig, rng: np.random.Generator):
    if cfg.protocol == B2:
        return b2.UserRandomness.sample(rng, cfg.size)
    return rng.integers(0, 2, size=cfg.size, dtype=np.uint8)


def run_protocol(cfg: RunConfig, w, x, rng: np.random.Generator) -> RunRecord:
    cfg.validate()
    w = _normalize_db(w, cfg.n, cfg.entry_bits)
    if cfg.protocol == B2:
        x.validate(cfg.size)
    else:
        x = np.asarray(x, dtype=np.uint8)
        if x.shape != (cfg.n,):
            raise ValueError(f"selector must have {cfg.n} bits")
    keys: Dict[str, KeyPairOutcome] = {}
    for link in LINKS:
        outcome = sample_keypair(cfg.key_len(link), cfg.links[link], rng)
        keys[link] = outcome
        if outcome.aborted:
            break
    r = None if any(k.aborted for k in keys.values()) else sample_user_randomness(cfg, rng)
    return execute(cfg, w, x, r, keys)


def ideal_keys(cfg: RunConfig, rng: np.random.Generator) -> Dict[str, KeyPairOutcome]:
    return {link: KeyPairOutcome.ideal(rng.integers(0, 2, cfg.key_len(link), dtype=np.uint8)) for link in LINKS}


# -- views -------------------------------------------------------------

_CIPHERTEXTS = ("c_q1", "c_q2", "c_a1", "c_a2")
_VIEW_FIELDS = {
    "user_eve": ("x", "r", "q1", "q2", "a1_tilde", "a2_tilde", "s2", "s4"),
    "dc1_eve": ("w", "q1_tilde", "a1", "s1", "s5"),
    "dc2_eve": ("w", "q2_tilde", "a2", "s3", "s6"),
    "eve": (),
}


@dataclass(frozen=True, eq=False)
class View:
    party: str
    fields: Tuple[Tuple[str, object], ...]

    def __getitem__(self, name):
        for k, v in self.fields:
            if k == name:
                return v
        raise KeyError(name)

    def names(self) -> List[str]:
        return [k for k, _ in self.fields]

    def key(self) -> tuple:
        """Hashable canonical form (⊥ kept explicit)."""
        return tuple((k, _encode_value(v)) for k, v in self.fields)

    def bits(self) -> np.ndarray:
        """Concatenated bit form; only for views without ⊥ entries."""
        parts = []
        for k, v in self.fields:
            if k == "leaks":
                for link in LINKS:
                    leak = v.get(link)
                    parts.append(np.array([0 if leak is None else 1], dtype=np.uint8))
                    if leak is not None:
                        parts.append(leak)
                continue
            if v is None:
                raise ValueError(f"view field {k} is ⊥; no bit form")
            parts.append(_value_bits(v))
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


def _value_bits(v) -> np.ndarray:
    if isinstance(v, b2.CubeIndex):
        return np.array(v.coords(), dtype=np.uint8)
    if isinstance(v, b2.UserRandomness):
        return np.concatenate([v.r_s.ravel(), np.array(v.r_d, dtype=np.uint8)])
    return np.asarray(v, dtype=np.uint8).ravel()


def _encode_value(v) -> object:
    if v is None:
        return BOTTOM
    if isinstance(v, dict):
        return tuple((k, _encode_value(v[k])) for k in LINKS if k in v)
    if isinstance(v, b2.CubeIndex):
        return v.coords()
    if isinstance(v, b2.UserRandomness):
        return (encode_hex(v.r_s), v.r_d)
    return encode_hex(v)


def view_of(record: RunRecord, party: str) -> View:
    """Project the variables held by ``party`` (a coalition with Eve, or Eve alone)."""
    if party not in PARTIES:
        raise ValueError(f"party must be one of {PARTIES}, got {party!r}")
    values = []
    for name in _VIEW_FIELDS[party]:
        if name in KEY_NAMES:
            values.append((name, record.keys.get(name)))
        elif name == "w":
            values.append((name, record.w))
        else:
            values.append((name, getattr(record, name)))
    values.extend((name, getattr(record, name)) for name in _CIPHERTEXTS)
    values.append(("leaks", {k: v for k, v in record.leaks.items() if v is not None}))
    return View(party, tuple(values))


def iter_batch(cfg: RunConfig, trials: int, inputs: Callable, seed: Optional[int] = None) -> Iterator[RunRecord]:
    """Yield ``trials`` independent runs; trial ``i`` uses the ``i``-th spawned stream.

    ``inputs(rng, i) -> (w, x)`` draws or fixes the inputs of each trial.
    Streaming keeps memory flat for large batches.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seq = np.random.SeedSequence(cfg.seed if seed is None else seed)
    for i, child in enumerate(seq.spawn(trials)):
        rng = np.random.default_rng(child)
        w, x = inputs(rng, i)
        rec = run_protocol(cfg, w, x, rng)
        rec.trial = i
        yield rec


def run_batch(cfg: RunConfig, trials: int, inputs: Callable, seed: Optional[int] = None) -> List[RunRecord]:
    return list(iter_batch(cfg, trials, inputs, seed))


def random_inputs(cfg: RunConfig) -> Callable:
    """Input generator drawing a uniform database and index per trial."""

    def draw(rng: np.random.Generator, _i: int):
        w = rng.integers(0, 2, size=(cfg.n, cfg.entry_bits), dtype=np.uint8)
        k = int(rng.integers(cfg.n))
        x = b2.CubeIndex.from_flat(k, cfg.size) if cfg.protocol == B2 else xorpir.selector(cfg.n, k)
        return w, x

    return draw


def fixed_inputs(w, x) -> Callable:
    return lambda _rng, _i: (w, x)


def write_transcript(path_or_file, records: Sequence[RunRecord], header: dict) -> None:
    lines = [json.dumps({"type": "header", **header}, sort_keys=True, ensure_ascii=False)]
    lines += [json.dumps(r.to_json(), sort_keys=True, ensure_ascii=False) for r in records]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


class TranscriptError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def read_transcript(path) -> Tuple[dict, List[RunRecord]]:
    header: dict = {}
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if obj.get("type") == "header":
                    header = obj
                    continue
                records.append(RunRecord.from_json(obj))
            except (ValueError, KeyError, TypeError, AttributeError) as exc:
                raise TranscriptError(lineno, str(exc)) from exc
    return header, records
