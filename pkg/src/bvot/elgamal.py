"""n-party threshold ElGamal and the hash commitments used at setup.

Every party holds a private exponent d_i; the joint public key is the product
of all g^{d_i}.  A ciphertext (g^x, M e^x) decrypts only when every key holder
contributes its share (g^x)^{-d_i}: the shares cancel e^x exactly, leaving M.
There is no verifiable decryption here by design; a wrong share surfaces as a
tally that fails to factor.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .group import (
    GroupElement,
    GroupParams,
    ParamsMismatch,
    Scalar,
    exp_bucket,
    mod_exp,
    mod_mul,
    mod_product,
    random_scalar,
)


class ThresholdError(ValueError):
    """Contract violation in key aggregation or share combination."""


@dataclass(frozen=True)
class PrivateShare:
    """One party's private exponent.  Never leaves its owner's process."""

    d: Scalar
    owner_id: str


@dataclass(frozen=True)
class PublicShare:
    value: GroupElement
    owner_id: str


@dataclass(frozen=True)
class AggregatePublicKey:
    e: GroupElement
    contributors: tuple[str, ...]


@dataclass(frozen=True)
class Ciphertext:
    a: GroupElement  # g^x
    b: GroupElement  # M * e^x


@dataclass(frozen=True)
class EncryptionRecord:
    """Ciphertext plus the material needed to prove what was encrypted."""

    ciphertext: Ciphertext
    x: Scalar
    plaintext: GroupElement


@dataclass(frozen=True)
class DecryptionShare:
    value: GroupElement
    owner_id: str
    target: bytes  # digest binding the exact product this share decrypts


def keygen(params: GroupParams, rng: random.Random, owner_id: str,
           d: Scalar | None = None) -> tuple[PrivateShare, PublicShare]:
    """Draw a private exponent and publish g^d.  `d` is a test hook."""
    if d is None:
        d = random_scalar(params, rng)
    private = PrivateShare(d=d, owner_id=owner_id)
    return private, public_share(private, params)


def public_share(private: PrivateShare, params: GroupParams) -> PublicShare:
    return PublicShare(value=mod_exp(params.generator(), private.d), owner_id=private.owner_id)


def aggregate(shares: list[PublicShare]) -> AggregatePublicKey:
    if not shares:
        raise ThresholdError("no public shares to aggregate")
    params = shares[0].value.params
    owners = [s.owner_id for s in shares]
    if len(set(owners)) != len(owners):
        raise ThresholdError("duplicate owner in public shares")
    for s in shares[1:]:
        if s.value.params != params:
            raise ParamsMismatch("public shares from different groups")
    e = mod_product((s.value for s in shares), params)
    return AggregatePublicKey(e=e, contributors=tuple(owners))


def encrypt(m: GroupElement, key: AggregatePublicKey, rng: random.Random,
            x: Scalar | None = None) -> EncryptionRecord:
    """(g^x, m e^x).  The nonce power g^x books as precomputable."""
    params = m.params
    if key.e.params != params:
        raise ParamsMismatch("plaintext and key from different groups")
    if x is None:
        x = random_scalar(params, rng)
    with exp_bucket("precompute"):
        a = mod_exp(params.generator(), x)
    b = mod_mul(m, mod_exp(key.e, x))
    return EncryptionRecord(ciphertext=Ciphertext(a=a, b=b), x=x, plaintext=m)


def reencrypts_to(record: EncryptionRecord, key: AggregatePublicKey,
                  expected: Ciphertext) -> bool:
    """Check that (plaintext, x) reproduces `expected` under `key`."""
    redo = encrypt(record.plaintext, key, random.Random(), x=record.x)
    return redo.ciphertext == expected


def product_target(a_values: list[GroupElement], context: str = "") -> bytes:
    """Digest binding a decryption share to the exact product it decrypts."""
    params = a_values[0].params
    h = hashlib.sha256(b"bvot/share-target/" + context.encode())
    h.update(mod_product(a_values, params).to_bytes())
    return h.digest()


def share_for_product(a_values: list[GroupElement], private: PrivateShare,
                      context: str = "") -> DecryptionShare:
    """(prod a_k)^{-d} for the owner's d, bound to the product digest."""
    if not a_values:
        raise ThresholdError("empty ciphertext-component list")
    params = a_values[0].params
    product = mod_product(a_values, params)
    value = mod_exp(product, private.d.negate())
    return DecryptionShare(value=value, owner_id=private.owner_id,
                           target=product_target(a_values, context))


def combine(b_product: GroupElement, shares: list[DecryptionShare],
            key: AggregatePublicKey, require_complete: bool = True) -> GroupElement:
    """b_product times all shares; with a complete share set this is the
    plaintext product.  `require_complete=False` evaluates partial sets for
    the threshold property tests and returns whatever the math gives."""
    owners = [s.owner_id for s in shares]
    if len(set(owners)) != len(owners):
        raise ThresholdError("duplicate contributor share")
    if require_complete:
        missing = set(key.contributors) - set(owners)
        extra = set(owners) - set(key.contributors)
        if missing or extra:
            raise ThresholdError(f"share set mismatch: missing={sorted(missing)} "
                                 f"unexpected={sorted(extra)}")
        if shares and len({s.target for s in shares}) != 1:
            raise ThresholdError("shares bind different targets")
    result = b_product
    for s in shares:
        result = mod_mul(result, s.value)
    return result


# ---------------------------------------------------------------------------
# Hash commitments with an explicit 256-bit nonce.  The committed payloads
# (prime assignment, mask exponent) have bounded entropy, so hiding needs the
# nonce; binding rests on SHA-256 collision resistance.
# ---------------------------------------------------------------------------

NONCE_LEN = 32


@dataclass(frozen=True)
class Commitment:
    digest: bytes


@dataclass(frozen=True)
class CommitmentOpening:
    payload: bytes
    nonce: bytes


def commit(payload: bytes, rng: random.Random) -> tuple[Commitment, CommitmentOpening]:
    nonce = rng.randbytes(NONCE_LEN)
    return (Commitment(digest=_commit_digest(nonce, payload)),
            CommitmentOpening(payload=payload, nonce=nonce))


def verify_commitment(commitment: Commitment, opening: CommitmentOpening) -> bool:
    if len(opening.nonce) != NONCE_LEN:
        return False
    return _commit_digest(opening.nonce, opening.payload) == commitment.digest


def _commit_digest(nonce: bytes, payload: bytes) -> bytes:
    return hashlib.sha256(nonce + payload).digest()
