"""Candidate prime tables, masked-prime ballots, and the factoring tally.

Candidates are encoded as small primes: lam primes per candidate, assigned to
index blocks of size lam (indices [c*lam, (c+1)*lam) belong to candidate c).
The secret is which prime value sits at which index; votes travel as primes
masked by g^s.  The tally is the product of all chosen primes, recovered as an
ordinary integer (the b^n < q constraint guarantees no wrap) and trial-divided
back into per-prime vote counts.  Anything that does not factor cleanly is an
anomaly, not an exception.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .elgamal import AggregatePublicKey, Ciphertext, DecryptionShare, product_target
from .group import (
    GroupElement,
    GroupParams,
    Scalar,
    mod_exp,
    mod_inv,
    mod_mul,
    mod_product,
    random_scalar,
)


class BallotError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Prime tables
# ---------------------------------------------------------------------------

def primes_below(limit: int) -> list[int]:
    """Sieve of Eratosthenes over [2, limit)."""
    if limit < 3:
        return []
    flags = bytearray([1]) * limit
    flags[0] = flags[1] = 0
    for p in range(2, int(limit ** 0.5) + 1):
        if flags[p]:
            flags[p * p::p] = bytearray(len(range(p * p, limit, p)))
    return [i for i, f in enumerate(flags) if f]


def first_primes(count: int) -> list[int]:
    limit = 16
    while True:
        found = primes_below(limit)
        if len(found) >= count:
            return found[:count]
        limit *= 2


@dataclass(frozen=True)
class PrimeTable:
    lam: int
    m: int
    primes: tuple[int, ...]  # table order: ascending by default

    @property
    def b(self) -> int:
        return max(self.primes)

    def index_of(self, prime: int) -> int:
        return self.primes.index(prime)

    def __len__(self):
        return len(self.primes)


def select_primes(lam: int, m: int, n: int, params: GroupParams) -> PrimeTable:
    """The lam*m smallest primes, rejected unless b^n < q."""
    if min(lam, m, n) < 1:
        raise BallotError("lam, m, n must all be >= 1")
    primes = first_primes(lam * m)
    b = primes[-1]
    if b ** n >= params.q:
        need_bits = (b ** n).bit_length() + 1
        raise BallotError(
            f"b^n = {b}^{n} wraps the {params.bit_length}-bit modulus; "
            f"need a modulus of at least {need_bits} bits")
    return PrimeTable(lam=lam, m=m, primes=tuple(primes))


@dataclass(frozen=True)
class PolicyCheck:
    ok: bool
    warning: str | None = None


def check_lambda_policy(lam: int, m: int, n: int, ea_trusted: bool = False) -> PolicyCheck:
    """The distributor's index uncertainty requires lam*m > n; a trusted
    non-voting authority may run with lam = 1."""
    if ea_trusted:
        return PolicyCheck(ok=True)
    if lam * m <= n:
        return PolicyCheck(ok=False,
                           warning=f"lam*m = {lam * m} <= n = {n}: the distributor "
                                   f"can narrow down chosen primes")
    return PolicyCheck(ok=True)


# ---------------------------------------------------------------------------
# Assignment, blocks, masking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimeAssignment:
    """Bijection index -> prime value over the table's primes."""

    primes_by_index: tuple[int, ...]

    def prime_at(self, index: int) -> int:
        return self.primes_by_index[index]

    def __len__(self):
        return len(self.primes_by_index)


def shuffle_assignment(table: PrimeTable, rng: random.Random) -> PrimeAssignment:
    order = list(table.primes)
    rng.shuffle(order)
    return PrimeAssignment(primes_by_index=tuple(order))


def assignment_payload(assignment: PrimeAssignment, lam: int, m: int,
                       election_id: str) -> bytes:
    """Commitment payload: decimal primes in index order, then lam, m, id."""
    primes = ",".join(str(p) for p in assignment.primes_by_index)
    return f"assignment:{primes};lam={lam};m={m};election={election_id}".encode()


def parse_assignment_payload(payload: bytes) -> tuple[PrimeAssignment, int, int, str]:
    text = payload.decode()
    if not text.startswith("assignment:"):
        raise BallotError("not an assignment payload")
    body, lam_part, m_part, eid_part = text[len("assignment:"):].split(";")
    primes = tuple(int(p) for p in body.split(","))
    return (PrimeAssignment(primes_by_index=primes),
            int(lam_part.removeprefix("lam=")),
            int(m_part.removeprefix("m=")),
            eid_part.removeprefix("election="))


@dataclass(frozen=True)
class CandidateBlockMap:
    lam: int
    m: int

    def candidate_of(self, index: int) -> int:
        if not 0 <= index < self.lam * self.m:
            raise BallotError(f"index {index} outside [0, {self.lam * self.m})")
        return index // self.lam

    def block_indices(self, candidate: int) -> range:
        if not 0 <= candidate < self.m:
            raise BallotError(f"candidate {candidate} outside [0, {self.m})")
        return range(candidate * self.lam, (candidate + 1) * self.lam)


@dataclass(frozen=True)
class Mask:
    s: Scalar
    g_s: GroupElement


def make_mask(params: GroupParams, rng: random.Random) -> Mask:
    s = random_scalar(params, rng)
    return Mask(s=s, g_s=mod_exp(params.generator(), s))


def mask_from_scalar(s: Scalar, params: GroupParams) -> Mask:
    return Mask(s=s, g_s=mod_exp(params.generator(), s))


def mask_payload(mask: Mask, election_id: str) -> bytes:
    return f"mask:s={mask.s.value};election={election_id}".encode()


def parse_mask_payload(payload: bytes, params: GroupParams) -> Mask:
    text = payload.decode()
    if not text.startswith("mask:s="):
        raise BallotError("not a mask payload")
    s_part, eid_part = text[len("mask:"):].split(";")
    return mask_from_scalar(Scalar(int(s_part.removeprefix("s=")), params), params)


def mask_all(assignment: PrimeAssignment, mask: Mask,
             params: GroupParams) -> tuple[GroupElement, ...]:
    """Per-index p * g^s mod q."""
    return tuple(mod_mul(params.element(p), mask.g_s)
                 for p in assignment.primes_by_index)


def unmask_factor(masked_votes: int, mask: Mask) -> GroupElement:
    """g^{-(masked vote count) * s}: n-1 masked votes normally, n with a
    non-voting authority."""
    if masked_votes < 0:
        raise BallotError("masked vote count cannot be negative")
    params = mask.s.params
    exponent = (-masked_votes * mask.s.value) % params.exponent_modulus
    return mod_exp(params.generator(), Scalar(exponent, params))


# ---------------------------------------------------------------------------
# Tally
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TallyProduct:
    value: GroupElement


@dataclass(frozen=True)
class ExponentVector:
    a: tuple[int, ...]
    residue: int  # 1 on a clean factoring

    @property
    def total(self) -> int:
        return sum(self.a)


@dataclass(frozen=True)
class AnomalyReport:
    kind: str  # nonunit-residue | negative-exponent-found | sum-mismatch
    details: str
    exponents: tuple[int, ...] | None = None
    residue: int | None = None


def compute_product(votes: list[Ciphertext], shares: list[DecryptionShare],
                    unmask: GroupElement, key: AggregatePublicKey,
                    context: str = "") -> TallyProduct:
    """P = (prod of b components) * unmask * (prod of decryption shares)."""
    if len(shares) != len(key.contributors):
        raise BallotError(f"{len(shares)} shares for {len(key.contributors)} key holders")
    owners = {s.owner_id for s in shares}
    if owners != set(key.contributors):
        raise BallotError("share owners do not match the key contributors")
    params = unmask.params
    expected_target = product_target([v.a for v in votes], context)
    for share in shares:
        if share.target != expected_target:
            raise BallotError(f"share from {share.owner_id} binds a different product")
    value = mod_product((v.b for v in votes), params)
    value = mod_mul(value, unmask)
    for share in shares:
        value = mod_mul(value, share.value)
    return TallyProduct(value=value)


def _trial_divide(value: int, primes: tuple[int, ...], cap: int) -> tuple[list[int], int]:
    exponents = []
    for p in primes:
        e = 0
        while e < cap and value % p == 0:
            value //= p
            e += 1
        exponents.append(e)
    return exponents, value


def factor_tally(product: TallyProduct, table: PrimeTable, n: int,
                 subset_budget: int = 2,
                 max_candidates: int = 200_000) -> ExponentVector | AnomalyReport:
    """Trial-divide the tally product; anomalies are data, not failures.

    On a nonunit residue, search for a representation with negative
    exponents: multiply P by small prime powers (subsets up to
    `subset_budget`, exponents up to n) until the result factors over the
    table with vote total n + the borrowed exponents.
    """
    q = product.value.params.q
    p_int = product.value.value
    exponents, residue = _trial_divide(p_int, table.primes, n)
    if residue == 1:
        if sum(exponents) == n:
            return ExponentVector(a=tuple(exponents), residue=1)
        return AnomalyReport(
            kind="sum-mismatch",
            details=f"product factors over the table but vote total is "
                    f"{sum(exponents)}, expected {n}",
            exponents=tuple(exponents), residue=1)

    tried = 0
    for size in range(1, subset_budget + 1):
        for subset in itertools.combinations(range(len(table.primes)), size):
            for powers in itertools.product(range(1, n + 1), repeat=size):
                tried += 1
                if tried > max_candidates:
                    return AnomalyReport(
                        kind="nonunit-residue",
                        details=f"residue {residue} after trial division; "
                                f"negative-exponent search budget exhausted",
                        residue=residue)
                boost = 1
                for idx, e in zip(subset, powers):
                    boost = boost * table.primes[idx] ** e % q
                candidate = p_int * boost % q
                cand_exp, cand_res = _trial_divide(candidate, table.primes,
                                                   n + max(powers))
                if cand_res != 1 or sum(cand_exp) != n + sum(powers):
                    continue
                net = list(cand_exp)
                for idx, e in zip(subset, powers):
                    net[idx] -= e
                if min(net) >= 0 or any(abs(v) > n for v in net):
                    continue
                negatives = {table.primes[i]: v for i, v in enumerate(net) if v < 0}
                return AnomalyReport(
                    kind="negative-exponent-found",
                    details=f"tally admits negative votes {negatives}; "
                            f"vote total {sum(net)}",
                    exponents=tuple(net), residue=residue)
    return AnomalyReport(
        kind="nonunit-residue",
        details=f"residue {residue} after trial division; no bounded "
                f"negative-exponent representation found",
        residue=residue)


def candidate_totals(vec: ExponentVector, assignment: PrimeAssignment,
                     blocks: CandidateBlockMap, table: PrimeTable) -> list[int]:
    """Sum the exponents of each candidate's assigned primes."""
    if vec.residue != 1:
        raise BallotError("cannot total an unfactored tally")
    totals = []
    for candidate in range(blocks.m):
        totals.append(sum(vec.a[table.index_of(assignment.prime_at(idx))]
                          for idx in blocks.block_indices(candidate)))
    return totals


# ---------------------------------------------------------------------------
# Two-colluder unmasking (the reason one voter must never hold two masked
# primes): the ratio of two masked primes equals the ratio of the underlying
# primes, and the table is small enough to search all ordered pairs.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollusionFinding:
    g_s: GroupElement
    prime_i: int
    prime_j: int


def collusion_unmask_demo(masked_i: GroupElement, masked_j: GroupElement,
                          table: PrimeTable) -> CollusionFinding | None:
    """Recover g^s from two distinct leaked masked primes, or None when the
    pair ratio is not unique in the table."""
    if masked_i == masked_j:
        return None
    params = masked_i.params
    ratio = mod_mul(masked_i, mod_inv(masked_j))
    matches = []
    for p_i, p_j in itertools.permutations(table.primes, 2):
        if mod_mul(params.element(p_i), mod_inv(params.element(p_j))) == ratio:
            matches.append((p_i, p_j))
    if len(matches) != 1:
        return None
    p_i, p_j = matches[0]
    g_s = mod_mul(masked_i, mod_inv(params.element(p_i)))
    return CollusionFinding(g_s=g_s, prime_i=p_i, prime_j=p_j)
