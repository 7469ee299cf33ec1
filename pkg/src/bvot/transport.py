"""Authenticated broadcast bus and OT point-to-point lane.

Envelopes are Ed25519-signed over their canonical bytes; the bus log is an
append-only list with a running digest chain, identical on every honest party
once a round barrier passes.  A single sequencing point fixes the total order:
the deterministic scheduler here for simulations, the relay for live runs.
OT traffic is the only non-broadcast flow; each lane frame leaves a signed
digest record on the bus for dispute evidence.
"""

from __future__ import annotations

import functools
import hashlib
import json
from collections import deque
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .messages import canonical_bytes


class TransportError(Exception):
    pass


class SignatureError(TransportError):
    pass


class ChainError(TransportError):
    pass


class IncompleteLogError(TransportError):
    pass


# ---------------------------------------------------------------------------
# Signing
# ---------------------------------------------------------------------------

class Signer:
    """Ed25519 over canonical envelope bytes; deterministic signatures keep
    replays byte-identical."""

    def __init__(self, private: Ed25519PrivateKey):
        self._private = private
        public = private.public_key()
        self.verify_key_hex = public.public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw).hex()

    @classmethod
    def from_seed(cls, seed: bytes) -> "Signer":
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def from_seed_material(cls, *parts: str) -> "Signer":
        """Derive a signing key from string material (seeded simulations)."""
        return cls.from_seed(hashlib.sha256(
            ("bvot/signing-key/" + "/".join(parts)).encode()).digest())

    @classmethod
    def generate(cls) -> "Signer":
        return cls(Ed25519PrivateKey.generate())

    def sign(self, data: bytes) -> bytes:
        return self._private.sign(data)

    def private_seed_hex(self) -> str:
        raw = self._private.private_bytes(
            serialization.Encoding.Raw, serialization.PrivateFormat.Raw,
            serialization.NoEncryption())
        return raw.hex()


@functools.lru_cache(maxsize=65536)
def _verify_cached(verify_key_hex: str, data: bytes, signature: bytes) -> bool:
    key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(verify_key_hex))
    try:
        key.verify(signature, data)
        return True
    except InvalidSignature:
        return False


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Envelope:
    election_id: str
    sender_id: str
    seq: int
    round: int
    msg_type: str
    payload: dict
    signature: str = ""

    def signing_bytes(self) -> bytes:
        return canonical_bytes({
            "election_id": self.election_id, "sender_id": self.sender_id,
            "seq": self.seq, "round": self.round, "msg_type": self.msg_type,
            "payload": self.payload})

    def canonical(self) -> bytes:
        return canonical_bytes(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical()).hexdigest()

    def to_dict(self) -> dict:
        return {"election_id": self.election_id, "sender_id": self.sender_id,
                "seq": self.seq, "round": self.round, "msg_type": self.msg_type,
                "payload": self.payload, "signature": self.signature}

    @classmethod
    def from_dict(cls, blob: dict) -> "Envelope":
        return cls(election_id=blob["election_id"], sender_id=blob["sender_id"],
                   seq=blob["seq"], round=blob["round"], msg_type=blob["msg_type"],
                   payload=blob["payload"], signature=blob["signature"])

    def verifies_under(self, verify_key_hex: str) -> bool:
        if not self.signature:
            return False
        return _verify_cached(verify_key_hex, self.signing_bytes(),
                              bytes.fromhex(self.signature))


def make_envelope(election_id: str, sender_id: str, seq: int, round_no: int,
                  msg_type: str, payload: dict, signer: Signer) -> Envelope:
    unsigned = Envelope(election_id=election_id, sender_id=sender_id, seq=seq,
                        round=round_no, msg_type=msg_type, payload=payload)
    blob = unsigned.to_dict()
    blob["signature"] = signer.sign(unsigned.signing_bytes()).hex()
    return Envelope.from_dict(blob)


# ---------------------------------------------------------------------------
# Bus log
# ---------------------------------------------------------------------------

GENESIS_DIGEST = hashlib.sha256(b"bvot/bus-log/genesis").hexdigest()


class BusLog:
    """Append-only envelope list with a running digest chain.

    `roster` maps sender ids to Ed25519 verify keys; envelopes failing
    signature, sequence, or election checks are rejected (never chained).
    """

    def __init__(self, election_id: str, roster: dict[str, str]):
        self.election_id = election_id
        self.roster = dict(roster)
        self.entries: list[Envelope] = []
        self.digests: list[str] = []
        self.rejected: list[tuple[Envelope, str]] = []
        self._last_seq: dict[str, int] = {}

    @property
    def chain_digest(self) -> str:
        return self.digests[-1] if self.digests else GENESIS_DIGEST

    def append(self, env: Envelope) -> None:
        reason = self._check(env)
        if reason:
            self.rejected.append((env, reason))
            raise SignatureError(reason)
        self.entries.append(env)
        prev = self.digests[-1] if self.digests else GENESIS_DIGEST
        self.digests.append(hashlib.sha256(prev.encode() + env.canonical()).hexdigest())
        self._last_seq[env.sender_id] = env.seq

    def _check(self, env: Envelope) -> str | None:
        if env.election_id != self.election_id:
            return f"envelope for foreign election {env.election_id!r}"
        key = self.roster.get(env.sender_id)
        if key is None:
            return f"unknown sender {env.sender_id!r}"
        if not env.verifies_under(key):
            return f"bad signature from {env.sender_id!r}"
        if env.seq <= self._last_seq.get(env.sender_id, 0):
            return f"replayed or stale sequence {env.seq} from {env.sender_id!r}"
        return None

    def verify_chain(self) -> None:
        prev = GENESIS_DIGEST
        for env, digest in zip(self.entries, self.digests):
            expect = hashlib.sha256(prev.encode() + env.canonical()).hexdigest()
            if digest != expect:
                raise ChainError(f"digest chain broken at seq {env.sender_id}/{env.seq}")
            prev = digest

    def to_jsonl(self) -> str:
        lines = [canonical_bytes(env.to_dict()).decode() for env in self.entries]
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_envelopes(cls, election_id: str, roster: dict[str, str],
                       envelopes) -> "BusLog":
        log = cls(election_id, roster)
        for env in envelopes:
            log.append(env)
        return log

    @classmethod
    def load(cls, path: str, election_id: str, roster: dict[str, str]) -> "BusLog":
        envelopes = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    envelopes.append(Envelope.from_dict(json.loads(line)))
        return cls.from_envelopes(election_id, roster, envelopes)


# ---------------------------------------------------------------------------
# Deterministic in-process bus
# ---------------------------------------------------------------------------

class DeadlockError(TransportError):
    pass


class DeterministicBus:
    """Single-threaded scheduler: lane frames drain before broadcasts, each
    committed envelope is delivered to every node in roster order, and the
    commit order within a pending batch is a pluggable policy (the
    within-round reordering sweeps ride on it)."""

    def __init__(self, election_id: str, roster: dict[str, str],
                 pick_next=None):
        self.log = BusLog(election_id, roster)
        self.nodes: dict[str, object] = {}
        self._order: list[str] = []
        self.pending: list[Envelope] = []
        self.lane: deque = deque()
        self.pick_next = pick_next
        self.timed_out = False

    def register(self, node) -> None:
        self.nodes[node.party_id] = node
        self._order.append(node.party_id)

    def _collect(self) -> None:
        for pid in self._order:
            node = self.nodes[pid]
            for env in node.take_outbox():
                self.pending.append(env)
            for to, frame in node.take_lane_outbox():
                self.lane.append((pid, to, frame))

    def run(self, max_steps: int = 1_000_000) -> BusLog:
        for pid in self._order:
            self.nodes[pid].start()
        self._collect()
        for _ in range(max_steps):
            if self.lane:
                frm, to, frame = self.lane.popleft()
                target = self.nodes.get(to)
                if target is not None:
                    target.deliver_frame(frm, frame)
                self._collect()
                continue
            if self.pending:
                # per-sender FIFO mirrors a real transport: only each
                # sender's earliest pending envelope may be scheduled, so a
                # reorder policy can never violate sequence monotonicity
                seen: set[str] = set()
                eligible = []
                for i, env in enumerate(self.pending):
                    if env.sender_id not in seen:
                        seen.add(env.sender_id)
                        eligible.append(i)
                pos = self.pick_next([self.pending[i] for i in eligible]) \
                    if self.pick_next else 0
                env = self.pending.pop(eligible[pos])
                try:
                    self.log.append(env)
                except SignatureError:
                    continue  # rejected envelopes are logged, never delivered
                for pid in self._order:
                    self.nodes[pid].deliver(env)
                self._collect()
                continue
            if all(self.nodes[pid].finished for pid in self._order):
                return self.log
            if self.timed_out:
                raise DeadlockError(
                    "no progress after timeout pass; stuck phases: " +
                    ", ".join(f"{pid}={self.nodes[pid].phase}" for pid in self._order
                              if not self.nodes[pid].finished))
            self.timed_out = True
            for pid in self._order:
                self.nodes[pid].on_timeout()
            self._collect()
        raise DeadlockError("scheduler step budget exhausted")
