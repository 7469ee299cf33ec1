"""Arbitrary-precision arithmetic over the multiplicative group Z_q*.

The modulus q is a safe prime (q = 2r + 1 with r prime), so q - 1 carries the
large factor r, and the generator g is a quadratic residue generating the
order-r subgroup.  Exponents live in [0, q-2] and are reduced mod q - 1, which
keeps every cancellation identity exact for arbitrary elements of Z_q*.

Arithmetic is plain Python big-int `pow`; it is NOT constant time.  The threat
model is a covert desk-scale adversary, so side channels are out of scope.
"""

from __future__ import annotations

import json
import random
import threading
from contextlib import contextmanager
from dataclasses import dataclass


class GroupError(ValueError):
    """Invalid group parameters or values."""


class ParamsMismatch(GroupError):
    """Operation attempted between values of different groups."""


# ---------------------------------------------------------------------------
# Exponentiation accounting
#
# Every mod_exp call ticks the thread-active counter under the thread-active
# bucket.  Buckets used by the protocol layer:
#   core       - run-time exponentiations that depend on other parties'
#                election messages (key shares, e^x, decryption shares,
#                mask and unmask powers)
#   precompute - message-independent powers a party could compute offline
#                (the ElGamal nonce power g^x)
#   ot         - everything inside oblivious-transfer sessions
# ---------------------------------------------------------------------------

class ExpCounter:
    """Per-party tally of modular exponentiations, split into named buckets."""

    def __init__(self):
        self.buckets: dict[str, int] = {}

    def tick(self, bucket: str) -> None:
        self.buckets[bucket] = self.buckets.get(bucket, 0) + 1

    def get(self, bucket: str) -> int:
        return self.buckets.get(bucket, 0)

    def total(self) -> int:
        return sum(self.buckets.values())

    def snapshot(self) -> dict[str, int]:
        return dict(self.buckets)

    def reset(self) -> None:
        self.buckets.clear()


_counting = threading.local()


@contextmanager
def use_counter(counter: ExpCounter | None, bucket: str = "core"):
    """Make `counter` receive all mod_exp ticks on this thread."""
    prev = (getattr(_counting, "counter", None), getattr(_counting, "bucket", "core"))
    _counting.counter, _counting.bucket = counter, bucket
    try:
        yield counter
    finally:
        _counting.counter, _counting.bucket = prev


@contextmanager
def exp_bucket(bucket: str):
    """Redirect ticks to a different bucket of the active counter."""
    prev = getattr(_counting, "bucket", "core")
    _counting.bucket = bucket
    try:
        yield
    finally:
        _counting.bucket = prev


def _tick_exp() -> None:
    counter = getattr(_counting, "counter", None)
    if counter is not None:
        counter.tick(getattr(_counting, "bucket", "core"))


# ---------------------------------------------------------------------------
# Primality
# ---------------------------------------------------------------------------

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)

# 64 Miller-Rabin rounds: error probability < 4^-64, well under the 2^-80
# budget the parameter contract demands.
MR_ROUNDS = 64


def is_probable_prime(n: int, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin with witnesses drawn from an n-seeded stream.

    Seeding from n makes validation reproducible run to run; the covert
    adversary of the threat model does not get to grind moduli against a
    known witness schedule.
    """
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = random.Random(n ^ 0x9E3779B97F4A7C15)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# Parameters and values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupParams:
    """Safe-prime group: modulus q, generator g of the order-(q-1)/2 subgroup."""

    q: int
    g: int
    bit_length: int

    @property
    def exponent_modulus(self) -> int:
        return self.q - 1

    @property
    def element_width(self) -> int:
        """Canonical encoding width in bytes."""
        return (self.bit_length + 7) // 8

    def generator(self) -> "GroupElement":
        return GroupElement(self.g, self)

    def one(self) -> "GroupElement":
        return GroupElement(1, self)

    def element(self, value: int) -> "GroupElement":
        return GroupElement(value % self.q, self)

    def scalar(self, value: int) -> "Scalar":
        return Scalar(value % self.exponent_modulus, self)


@dataclass(frozen=True)
class GroupElement:
    """A value in [1, q-1], tied to its GroupParams."""

    value: int
    params: GroupParams

    def __post_init__(self):
        if not 1 <= self.value <= self.params.q - 1:
            raise GroupError(f"element {self.value} outside [1, q-1]")

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return mod_mul(self, other)

    def to_bytes(self) -> bytes:
        """Canonical encoding: big-endian, zero-padded to the modulus width."""
        return self.value.to_bytes(self.params.element_width, "big")

    def __repr__(self):
        return f"GroupElement({self.value:#x})"


@dataclass(frozen=True)
class Scalar:
    """An exponent in [0, q-2]; arithmetic is mod q-1."""

    value: int
    params: GroupParams

    def __post_init__(self):
        if not 0 <= self.value < self.params.exponent_modulus:
            raise GroupError(f"scalar {self.value} outside [0, q-2]")

    def negate(self) -> "Scalar":
        return Scalar((-self.value) % self.params.exponent_modulus, self.params)

    def __add__(self, other: "Scalar") -> "Scalar":
        _require_same(self.params, other.params)
        return Scalar((self.value + other.value) % self.params.exponent_modulus, self.params)

    def __mul__(self, other: "Scalar") -> "Scalar":
        _require_same(self.params, other.params)
        return Scalar((self.value * other.value) % self.params.exponent_modulus, self.params)

    def __repr__(self):
        return f"Scalar({self.value:#x})"


def _require_same(a: GroupParams, b: GroupParams) -> None:
    if a != b:
        raise ParamsMismatch("values belong to different groups")


def element_from_bytes(data: bytes, params: GroupParams) -> GroupElement:
    if len(data) != params.element_width:
        raise GroupError(f"expected {params.element_width} bytes, got {len(data)}")
    return GroupElement(int.from_bytes(data, "big"), params)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def mod_exp(base: GroupElement, exp: Scalar | int) -> GroupElement:
    """base^exp mod q.  Counts toward the active exponentiation bucket."""
    if isinstance(exp, Scalar):
        _require_same(base.params, exp.params)
        e = exp.value
    else:
        e = exp % base.params.exponent_modulus
    _tick_exp()
    return GroupElement(pow(base.value, e, base.params.q), base.params)


def mod_mul(a: GroupElement, b: GroupElement) -> GroupElement:
    _require_same(a.params, b.params)
    return GroupElement(a.value * b.value % a.params.q, a.params)


def mod_inv(a: GroupElement) -> GroupElement:
    return GroupElement(pow(a.value, -1, a.params.q), a.params)


def mod_product(elements, params: GroupParams) -> GroupElement:
    """Product of elements (identity for the empty sequence)."""
    acc = 1
    for el in elements:
        _require_same(el.params, params)
        acc = acc * el.value % params.q
    return GroupElement(acc if acc else 1, params)


def random_scalar(params: GroupParams, rng: random.Random) -> Scalar:
    return Scalar(rng.randrange(0, params.exponent_modulus), params)


def random_element(params: GroupParams, rng: random.Random) -> GroupElement:
    """Uniform over Z_q* (not restricted to the subgroup)."""
    return GroupElement(rng.randrange(1, params.q), params)


def random_subgroup_element(params: GroupParams, rng: random.Random) -> GroupElement:
    """Uniform over <g>, sampled as g^t with t discarded."""
    return mod_exp(params.generator(), random_scalar(params, rng))


# ---------------------------------------------------------------------------
# Parameter generation and validation
# ---------------------------------------------------------------------------

MIN_BIT_LENGTH = 32


def generate_params(bit_length: int, rng: random.Random | None = None,
                    max_candidates: int = 500_000) -> GroupParams:
    """Search for a safe prime q = 2r + 1 of the requested size.

    Practical up to a couple hundred bits; beyond that use the shipped
    presets (fresh 2048-bit safe primes take minutes of search).
    """
    if bit_length < MIN_BIT_LENGTH:
        raise GroupError(f"bit_length {bit_length} below floor {MIN_BIT_LENGTH}")
    rng = rng or random.SystemRandom()
    for _ in range(max_candidates):
        r = rng.getrandbits(bit_length - 1) | (1 << (bit_length - 2)) | 1
        q = 2 * r + 1
        if q.bit_length() != bit_length:
            continue
        # cheap screens on q first; full MR on both only when q survives
        if not is_probable_prime(q, rounds=2):
            continue
        if not is_probable_prime(r) or not is_probable_prime(q):
            continue
        return GroupParams(q=q, g=_find_generator(q), bit_length=bit_length)
    raise GroupError(f"no safe prime of {bit_length} bits found "
                     f"within {max_candidates} candidates")


def _find_generator(q: int) -> int:
    # h^2 is a quadratic residue; in a safe-prime group any QR != 1 generates
    # the whole order-r subgroup.
    for h in range(2, 1000):
        g = h * h % q
        if g != 1:
            return g
    raise GroupError("no generator found")  # pragma: no cover


def validate_params(params: GroupParams) -> list[str]:
    """Return the list of violated invariants (empty when valid)."""
    errors = []
    q, g = params.q, params.g
    if q.bit_length() != params.bit_length:
        errors.append("bit length mismatch")
    if not is_probable_prime(q):
        errors.append("modulus not prime")
        return errors
    r = (q - 1) // 2
    if not is_probable_prime(r):
        errors.append("modulus not a safe prime")
    if not 2 <= g <= q - 1:
        errors.append("trivial generator" if g == 1 else "generator out of range")
    elif pow(g, r, q) != 1:
        # g = q-1 lands here too: (-1)^r = -1 for odd r
        errors.append("generator does not generate the quadratic-residue subgroup")
    return errors


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

# 64-bit toy group for fast tests: q = 2r + 1 with r prime, g = 2^2.
TOY_64 = GroupParams(q=9990341303051090783, g=4, bit_length=64)

# RFC 3526 group 14 (2048-bit MODP).  The modulus is a safe prime and, since
# q = 7 mod 8, g = 2 is a quadratic residue generating the order-r subgroup.
RFC3526_2048 = GroupParams(
    q=int(
        "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
        "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
        "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
        "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
        "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
        "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
        "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
        "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
        16,
    ),
    g=2,
    bit_length=2048,
)

PRESETS: dict[str, GroupParams] = {
    "toy-64": TOY_64,
    "rfc3526-2048": RFC3526_2048,
}


def save_params(params: GroupParams, path: str) -> None:
    """Preset file: modulus and generator as lowercase hex strings."""
    with open(path, "w") as fh:
        json.dump({"modulus": f"{params.q:x}", "generator": f"{params.g:x}"}, fh)
        fh.write("\n")


def load_params(path: str) -> GroupParams:
    with open(path) as fh:
        blob = json.load(fh)
    q = int(blob["modulus"], 16)
    return GroupParams(q=q, g=int(blob["generator"], 16), bit_length=q.bit_length())
