"""Oblivious transfer: a 1-out-of-2 base secure against active parties,
extended to 1-out-of-N with a key tree.

Base transfer: the sender fixes a random subgroup element c per instance and
derives the second public key as pk1 = c / pk0, so a receiver can know the
discrete log of at most one of pk0, pk1 regardless of how it builds pk0.
N-way transfer: the sender draws ceil(log2 N) key pairs, encrypts string i
under a key derived from the bit-indexed selection of pair halves, and runs
one base transfer per bit of the receiver's index.  N symmetric blobs plus
log N base transfers instead of N transfers.

Blob encryption is a SHA-256 counter keystream with an HMAC tag, so decrypting
under the wrong key is detected, never silently garbled.
"""

from __future__ import annotations

import hashlib
import hmac
import random
from dataclasses import dataclass, field

from .group import (
    GroupElement,
    GroupParams,
    Scalar,
    element_from_bytes,
    exp_bucket,
    mod_exp,
    mod_inv,
    mod_mul,
    random_scalar,
)


class OTError(ValueError):
    pass


class AuthenticationError(OTError):
    """Blob failed its integrity tag (wrong key or tampering)."""


MAX_STRING_LEN = 4096
KEY_LEN = 32
TAG_LEN = 32


# ---------------------------------------------------------------------------
# Symmetric layer
# ---------------------------------------------------------------------------

def kdf(domain: str, *parts: bytes) -> bytes:
    h = hashlib.sha256(b"bvot/ot/" + domain.encode())
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


def _keystream(key: bytes, length: int) -> bytes:
    out = bytearray()
    block = 0
    while len(out) < length:
        out += hashlib.sha256(key + b"/ks/" + block.to_bytes(8, "big")).digest()
        block += 1
    return bytes(out[:length])


def seal(key: bytes, plaintext: bytes) -> bytes:
    """Encrypt-then-MAC under a single-use key."""
    ct = bytes(a ^ b for a, b in zip(plaintext, _keystream(key, len(plaintext))))
    tag = hmac.new(key, b"bvot/ot/tag" + ct, hashlib.sha256).digest()
    return ct + tag


def open_sealed(key: bytes, blob: bytes) -> bytes:
    if len(blob) < TAG_LEN:
        raise OTError("blob too short")
    ct, tag = blob[:-TAG_LEN], blob[-TAG_LEN:]
    expect = hmac.new(key, b"bvot/ot/tag" + ct, hashlib.sha256).digest()
    if not hmac.compare_digest(tag, expect):
        raise AuthenticationError("blob authentication failed")
    return bytes(a ^ b for a, b in zip(ct, _keystream(key, len(ct))))


def _pad_frame(data: bytes, width: int) -> bytes:
    return len(data).to_bytes(4, "big") + data + bytes(width - len(data))


def _unpad_frame(framed: bytes) -> bytes:
    size = int.from_bytes(framed[:4], "big")
    return framed[4:4 + size]


# ---------------------------------------------------------------------------
# 1-out-of-2 base transfer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OTChoice:
    index: int
    n: int

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.index < self.n:
            raise OTError(f"choice {self.index} outside [0, {self.n})")


@dataclass(frozen=True)
class OTSenderSetup:
    c: GroupElement
    instance_id: str
    # sender-side discrete log of c; never transmitted, kept for the
    # receiver-privacy transplant tests
    dlog: Scalar | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class OTReceiverKeys:
    pk0: GroupElement
    instance_id: str


@dataclass(frozen=True)
class OT2Payload:
    u0: GroupElement
    u1: GroupElement
    blob0: bytes
    blob1: bytes
    instance_id: str


def ot2_sender_setup(params: GroupParams, rng: random.Random,
                     instance_id: str = "") -> OTSenderSetup:
    with exp_bucket("ot"):
        t = random_scalar(params, rng)
        c = mod_exp(params.generator(), t)
    return OTSenderSetup(c=c, instance_id=instance_id, dlog=t)


def ot2_receiver_choose(setup: OTSenderSetup, b: int, rng: random.Random,
                        k: Scalar | None = None) -> tuple[OTReceiverKeys, Scalar]:
    """Build pk_b = g^k; transmit pk0 directly for b=0, else c/g^k."""
    if b not in (0, 1):
        raise OTError(f"branch {b} not in {{0, 1}}")
    params = setup.c.params
    if k is None:
        k = random_scalar(params, rng)
    with exp_bucket("ot"):
        gk = mod_exp(params.generator(), k)
    pk0 = gk if b == 0 else mod_mul(setup.c, mod_inv(gk))
    return OTReceiverKeys(pk0=pk0, instance_id=setup.instance_id), k


def ot2_sender_transfer(setup: OTSenderSetup, keys: OTReceiverKeys,
                        s0: bytes, s1: bytes, rng: random.Random) -> OT2Payload:
    if max(len(s0), len(s1)) > MAX_STRING_LEN:
        raise OTError(f"string exceeds {MAX_STRING_LEN} bytes")
    if keys.instance_id != setup.instance_id:
        raise OTError("receiver keys from a different instance")
    params = setup.c.params
    width = max(len(s0), len(s1))
    pk = [keys.pk0, mod_mul(setup.c, mod_inv(keys.pk0))]
    out = []
    with exp_bucket("ot"):
        for i, s in enumerate((s0, s1)):
            y = random_scalar(params, rng)
            u = mod_exp(params.generator(), y)
            shared = mod_exp(pk[i], y)
            key = kdf("branch-key", setup.instance_id.encode(),
                      bytes([i]), shared.to_bytes())
            out.append((u, seal(key, _pad_frame(s, width))))
    return OT2Payload(u0=out[0][0], u1=out[1][0],
                      blob0=out[0][1], blob1=out[1][1],
                      instance_id=setup.instance_id)


def ot2_receiver_recover(payload: OT2Payload, b: int, k: Scalar) -> bytes:
    if b not in (0, 1):
        raise OTError(f"branch {b} not in {{0, 1}}")
    u = payload.u0 if b == 0 else payload.u1
    blob = payload.blob0 if b == 0 else payload.blob1
    with exp_bucket("ot"):
        shared = mod_exp(u, k)
    key = kdf("branch-key", payload.instance_id.encode(), bytes([b]), shared.to_bytes())
    return _unpad_frame(open_sealed(key, blob))


# ---------------------------------------------------------------------------
# 1-out-of-N extension (key tree over the base transfer)
# ---------------------------------------------------------------------------

def _bit_count(n: int) -> int:
    return 0 if n == 1 else (n - 1).bit_length()


def _leaf_key(instance_id: str, index: int, halves: list[bytes]) -> bytes:
    return kdf("leaf-key", instance_id.encode(), index.to_bytes(4, "big"), *halves)


class OTNSenderSession:
    """Sender side of one N-string session, driven by received frames.

    Frames are plain dicts so the transport layer can ship them as-is;
    `handle` returns the reply frame.
    """

    def __init__(self, params: GroupParams, strings: list[bytes],
                 instance_id: str, rng: random.Random):
        if not strings:
            raise OTError("no strings to transfer")
        if any(len(s) > MAX_STRING_LEN for s in strings):
            raise OTError(f"string exceeds {MAX_STRING_LEN} bytes")
        self.params = params
        self.strings = list(strings)
        self.instance_id = instance_id
        self.rng = rng
        self.n = len(strings)
        self.ell = _bit_count(self.n)
        self.key_pairs = [(rng.randbytes(KEY_LEN), rng.randbytes(KEY_LEN))
                          for _ in range(self.ell)]
        self.setups: list[OTSenderSetup] = []
        self.done = False

    def handle(self, frame: dict) -> dict:
        kind = frame.get("ot")
        if kind == "init":
            if frame.get("n") != self.n:
                raise OTError(f"receiver expects {frame.get('n')} strings, have {self.n}")
            self.setups = [ot2_sender_setup(self.params, self.rng,
                                            f"{self.instance_id}/{j}")
                           for j in range(self.ell)]
            return {"ot": "setup", "instance": self.instance_id, "n": self.n,
                    "ell": self.ell,
                    "c": [s.c.to_bytes().hex() for s in self.setups]}
        if kind == "keys":
            return self._transfer(frame)
        raise OTError(f"unexpected frame {kind!r} for sender")

    def _transfer(self, frame: dict) -> dict:
        pk0s = frame["pk0"]
        if len(pk0s) != self.ell:
            raise OTError("wrong number of receiver keys")
        base = []
        for j, (setup, pk0_hex) in enumerate(zip(self.setups, pk0s)):
            keys = OTReceiverKeys(
                pk0=element_from_bytes(bytes.fromhex(pk0_hex), self.params),
                instance_id=setup.instance_id)
            payload = ot2_sender_transfer(setup, keys,
                                          self.key_pairs[j][0],
                                          self.key_pairs[j][1], self.rng)
            base.append({"u0": payload.u0.to_bytes().hex(),
                         "u1": payload.u1.to_bytes().hex(),
                         "blob0": payload.blob0.hex(),
                         "blob1": payload.blob1.hex()})
        width = max(len(s) for s in self.strings)
        blobs = []
        for i, s in enumerate(self.strings):
            halves = [self.key_pairs[j][(i >> j) & 1] for j in range(self.ell)]
            blobs.append(seal(_leaf_key(self.instance_id, i, halves),
                              _pad_frame(s, width)).hex())
        self.done = True
        return {"ot": "transfer", "instance": self.instance_id,
                "base": base, "blobs": blobs}


class OTNReceiverSession:
    """Receiver side: start() emits the opening frame, handle() consumes
    replies; `result` holds the chosen string when the session completes."""

    def __init__(self, params: GroupParams, choice: OTChoice,
                 instance_id: str, rng: random.Random,
                 forced_ks: list[Scalar] | None = None):
        self.params = params
        self.choice = choice
        self.instance_id = instance_id
        self.rng = rng
        self.ell = _bit_count(choice.n)
        self.ks: list[Scalar] = []
        self._forced_ks = forced_ks
        self.result: bytes | None = None
        # key-pair halves recovered from the base transfers, for the
        # sender-security tests
        self.recovered_halves: list[bytes] = []

    def start(self) -> dict:
        return {"ot": "init", "instance": self.instance_id, "n": self.choice.n}

    def handle(self, frame: dict) -> dict | None:
        kind = frame.get("ot")
        if kind == "setup":
            if frame["ell"] != self.ell or frame["n"] != self.choice.n:
                raise OTError("setup geometry does not match the choice")
            pk0s = []
            for j, c_hex in enumerate(frame["c"]):
                setup = OTSenderSetup(
                    c=element_from_bytes(bytes.fromhex(c_hex), self.params),
                    instance_id=f"{self.instance_id}/{j}")
                bit = (self.choice.index >> j) & 1
                forced = self._forced_ks[j] if self._forced_ks else None
                keys, k = ot2_receiver_choose(setup, bit, self.rng, k=forced)
                self.ks.append(k)
                pk0s.append(keys.pk0.to_bytes().hex())
            return {"ot": "keys", "instance": self.instance_id, "pk0": pk0s}
        if kind == "transfer":
            self._finish(frame)
            return None
        raise OTError(f"unexpected frame {kind!r} for receiver")

    def _finish(self, frame: dict) -> None:
        if len(frame["blobs"]) != self.choice.n:
            raise OTError("blob count does not match advertised n")
        halves = []
        for j, entry in enumerate(frame["base"]):
            bit = (self.choice.index >> j) & 1
            payload = OT2Payload(
                u0=element_from_bytes(bytes.fromhex(entry["u0"]), self.params),
                u1=element_from_bytes(bytes.fromhex(entry["u1"]), self.params),
                blob0=bytes.fromhex(entry["blob0"]),
                blob1=bytes.fromhex(entry["blob1"]),
                instance_id=f"{self.instance_id}/{j}")
            halves.append(ot2_receiver_recover(payload, bit, self.ks[j]))
        self.recovered_halves = halves
        blob = bytes.fromhex(frame["blobs"][self.choice.index])
        key = _leaf_key(self.instance_id, self.choice.index, halves)
        self.result = _unpad_frame(open_sealed(key, blob))


def otn_run(params: GroupParams, strings: list[bytes], choice: OTChoice,
            sender_rng: random.Random, receiver_rng: random.Random,
            instance_id: str = "local",
            transcript: list | None = None) -> bytes:
    """Drive a full session in-process; `transcript` collects (direction,
    frame) pairs when provided."""
    if len(strings) != choice.n:
        raise OTError(f"{len(strings)} strings but choice ranges over {choice.n}")
    sender = OTNSenderSession(params, strings, instance_id, sender_rng)
    receiver = OTNReceiverSession(params, choice, instance_id, receiver_rng)
    frame = receiver.start()
    while frame is not None:
        if transcript is not None:
            transcript.append(("r->s", frame))
        reply = sender.handle(frame)
        if transcript is not None:
            transcript.append(("s->r", reply))
        frame = receiver.handle(reply)
    assert receiver.result is not None
    return receiver.result
