"""Canonical wire encoding: compact JSON with sorted keys, group values as
fixed-width lowercase hex.  Every digest, signature, and commitment in the
protocol is computed over these bytes, so the encoding must be deterministic.
"""

from __future__ import annotations

import json

from .elgamal import Ciphertext, Commitment, CommitmentOpening, DecryptionShare
from .group import GroupElement, GroupParams, Scalar, element_from_bytes


def canonical_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def enc_element(el: GroupElement) -> str:
    return el.to_bytes().hex()


def dec_element(text: str, params: GroupParams) -> GroupElement:
    return element_from_bytes(bytes.fromhex(text), params)


def enc_scalar(s: Scalar) -> str:
    return format(s.value, "x")


def dec_scalar(text: str, params: GroupParams) -> Scalar:
    return Scalar(int(text, 16), params)


def enc_ciphertext(ct: Ciphertext) -> dict:
    return {"a": enc_element(ct.a), "b": enc_element(ct.b)}


def dec_ciphertext(blob: dict, params: GroupParams) -> Ciphertext:
    return Ciphertext(a=dec_element(blob["a"], params), b=dec_element(blob["b"], params))


def enc_share(share: DecryptionShare) -> dict:
    return {"value": enc_element(share.value), "owner": share.owner_id,
            "target": share.target.hex()}


def dec_share(blob: dict, params: GroupParams) -> DecryptionShare:
    return DecryptionShare(value=dec_element(blob["value"], params),
                           owner_id=blob["owner"],
                           target=bytes.fromhex(blob["target"]))


def enc_commitment(c: Commitment) -> str:
    return c.digest.hex()


def dec_commitment(text: str) -> Commitment:
    return Commitment(digest=bytes.fromhex(text))


def enc_opening(o: CommitmentOpening) -> dict:
    return {"payload": o.payload.hex(), "nonce": o.nonce.hex()}


def dec_opening(blob: dict) -> CommitmentOpening:
    return CommitmentOpening(payload=bytes.fromhex(blob["payload"]),
                             nonce=bytes.fromhex(blob["nonce"]))


# Broadcast round assignment.  Round 0 is non-round traffic (OT frame digests
# and abort records); rounds 1-5 are the five election rounds.
ROUND_OF_TYPE = {
    "public_key_share": 1,
    "setup_commitments": 1,
    "encrypted_vote": 2,
    "distributor_share": 3,
    "voter_share": 3,
    "mapping_reveal": 4,
    "audit_receipt": 4,
    "allegation": 4,
    "unmask_reveal": 5,
    "ot_digest": 0,
    "abort": 0,
}
