"""The five-round broadcast election.

Round 1: every voter broadcasts its key share; the distributor also
broadcasts its two setup commitments (assignment, mask).  Between rounds 1
and 2 each voter runs a 1-out-of-(lam*m) OT with the distributor on the
point-to-point lane.  Round 2: encrypted votes.  Round 3: decryption shares,
distributor's first.  Round 4: the distributor opens the assignment
commitment and publishes the masked-prime list; every other voter answers
with an audit receipt or an allegation before any tally is computable.
Round 5: the distributor opens the mask, after which anyone can tally from
the bus log alone.

Each party is a single-threaded state machine fed one envelope at a time in
bus order; gates only consume messages at or past the current phase, so
out-of-order traffic is buffered in the log, never dropped.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import defaultdict
from dataclasses import dataclass

from . import ballot
from .ballot import (
    CandidateBlockMap,
    check_lambda_policy,
    mask_all,
    make_mask,
    select_primes,
    shuffle_assignment,
    unmask_factor,
)
from .elgamal import (
    EncryptionRecord,
    aggregate,
    commit,
    encrypt,
    keygen,
    product_target,
    share_for_product,
    verify_commitment,
)
from .group import ExpCounter, GroupParams, PRESETS, exp_bucket, use_counter
from .messages import (
    ROUND_OF_TYPE,
    canonical_bytes,
    dec_ciphertext,
    dec_commitment,
    dec_element,
    dec_opening,
    dec_scalar,
    dec_share,
    enc_ciphertext,
    enc_commitment,
    enc_element,
    enc_opening,
    enc_scalar,
    enc_share,
)
from .ot import OTChoice, OTNReceiverSession, OTNSenderSession
from .transport import BusLog, Envelope, IncompleteLogError, Signer, make_envelope

AWAIT_KEYS = "AwaitKeys"
AWAIT_SETUP = "AwaitSetup"
SELECTING = "Selecting"
VOTED = "Voted"
AWAIT_SHARES = "AwaitShares"
AWAIT_MAPPING = "AwaitMapping"
AWAIT_UNMASK = "AwaitUnmask"
DONE = "Done"
ABORTED = "Aborted"

PHASE_ORDER = [AWAIT_KEYS, AWAIT_SETUP, SELECTING, VOTED, AWAIT_SHARES,
               AWAIT_MAPPING, AWAIT_UNMASK, DONE]


class ProtocolError(Exception):
    pass


class ConfigError(ProtocolError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ElectionConfig:
    election_id: str
    params: GroupParams
    m: int
    lam: int
    candidate_names: list[str]
    voter_ids: list[str]
    distributor_id: str
    roster: dict[str, str]  # party id -> Ed25519 verify key (hex)
    params_name: str = "custom"
    ea_mode: bool = False
    strict_lambda: bool = False
    round_timeout: float | None = None

    @property
    def n(self) -> int:
        return len(self.voter_ids)

    @property
    def masked_vote_count(self) -> int:
        # the distributor votes its raw prime in normal mode
        return self.n if self.ea_mode else self.n - 1

    def party_ids(self) -> list[str]:
        if self.ea_mode:
            return [self.distributor_id] + list(self.voter_ids)
        return list(self.voter_ids)

    def validate(self) -> None:
        if self.m < 1 or self.m != len(self.candidate_names):
            raise ConfigError("candidate names must match m")
        if self.lam < 1:
            raise ConfigError("lam must be >= 1")
        if len(set(self.voter_ids)) != len(self.voter_ids):
            raise ConfigError("duplicate voter ids")
        if self.ea_mode:
            if self.n < 1:
                raise ConfigError("need at least one voter")
            if self.distributor_id in self.voter_ids:
                raise ConfigError("a non-voting authority cannot also vote")
        else:
            if self.n < 2:
                raise ConfigError("need at least two voters")
            if self.distributor_id not in self.voter_ids:
                raise ConfigError("distributor must be one of the voters")
        missing = [pid for pid in self.party_ids() if pid not in self.roster]
        if missing:
            raise ConfigError(f"roster missing verify keys for {missing}")
        policy = check_lambda_policy(self.lam, self.m, self.n, ea_trusted=self.ea_mode)
        if self.strict_lambda and not policy.ok:
            raise ConfigError(f"strict lambda policy: {policy.warning}")

    def to_dict(self) -> dict:
        return {
            "election_id": self.election_id,
            "params": self.params_name if self.params_name in PRESETS else {
                "modulus": f"{self.params.q:x}", "generator": f"{self.params.g:x}"},
            "m": self.m, "lam": self.lam,
            "candidate_names": list(self.candidate_names),
            "voter_ids": list(self.voter_ids),
            "distributor_id": self.distributor_id,
            "roster": dict(self.roster),
            "ea_mode": self.ea_mode,
            "strict_lambda": self.strict_lambda,
            "round_timeout": self.round_timeout,
        }

    @classmethod
    def from_dict(cls, blob: dict) -> "ElectionConfig":
        params_spec = blob["params"]
        if isinstance(params_spec, str):
            params = PRESETS[params_spec]
            params_name = params_spec
        else:
            q = int(params_spec["modulus"], 16)
            params = GroupParams(q=q, g=int(params_spec["generator"], 16),
                                 bit_length=q.bit_length())
            params_name = "custom"
        return cls(election_id=blob["election_id"], params=params,
                   params_name=params_name, m=blob["m"], lam=blob["lam"],
                   candidate_names=list(blob["candidate_names"]),
                   voter_ids=list(blob["voter_ids"]),
                   distributor_id=blob["distributor_id"],
                   roster=dict(blob["roster"]),
                   ea_mode=blob.get("ea_mode", False),
                   strict_lambda=blob.get("strict_lambda", False),
                   round_timeout=blob.get("round_timeout"))

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "ElectionConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Election result document
# ---------------------------------------------------------------------------

@dataclass
class ElectionResult:
    election_id: str
    status: str  # complete | flagged | aborted
    totals: dict[str, int] | None
    exponents: list[int] | None
    vote_total: int | None
    anomalies: list[dict]
    allegations: list[dict]
    flags: list[str]
    counters: dict
    bus: dict

    def to_dict(self) -> dict:
        return {"election_id": self.election_id, "status": self.status,
                "totals": self.totals, "exponents": self.exponents,
                "vote_total": self.vote_total, "anomalies": self.anomalies,
                "allegations": self.allegations, "flags": self.flags,
                "counters": self.counters, "bus": self.bus}

    def outcome_dict(self) -> dict:
        """Everything except the transcript digest (which necessarily
        reflects delivery order)."""
        out = self.to_dict()
        out.pop("bus")
        return out

    def text(self) -> str:
        return canonical_bytes(self.to_dict()).decode()


# ---------------------------------------------------------------------------
# Party state machines
# ---------------------------------------------------------------------------

class _LogIndex:
    """First envelope per (type, sender), in bus order."""

    def __init__(self):
        self.by_type: dict[str, list[Envelope]] = defaultdict(list)
        self.first: dict[tuple[str, str], Envelope] = {}

    def add(self, env: Envelope) -> None:
        self.by_type[env.msg_type].append(env)
        self.first.setdefault((env.msg_type, env.sender_id), env)

    def senders(self, msg_type: str) -> set[str]:
        return {e.sender_id for e in self.by_type[msg_type]}

    def get(self, msg_type: str, sender: str) -> Envelope | None:
        return self.first.get((msg_type, sender))


class Node:
    """Base party: owns its signer, RNG, exponentiation counter, and a local
    copy of the bus log."""

    def __init__(self, config: ElectionConfig, party_id: str, signer: Signer,
                 rng: random.Random, choice: int | None = None):
        config.validate()
        self.config = config
        self.party_id = party_id
        self.signer = signer
        self.rng = rng
        self.choice = choice
        self.phase = AWAIT_KEYS
        self.exp = ExpCounter()
        self.log = BusLog(config.election_id, config.roster)
        self.index = _LogIndex()
        self._outbox: list[Envelope] = []
        self._lane_outbox: list[tuple[str, dict]] = []
        self._seq = 0
        self._lane_frame_no = 0
        self.result: ElectionResult | None = None
        self.record: EncryptionRecord | None = None
        self.chosen_index: int | None = None
        self.received_masked = None
        self.audit_verdict: str | None = None
        self.key = None  # aggregate public key once round 1 closes
        self._private = None
        self._commitments = None  # (assignment Commitment, mask Commitment)

    # -- plumbing ------------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.phase in (DONE, ABORTED)

    @property
    def is_distributor(self) -> bool:
        return self.party_id == self.config.distributor_id

    @property
    def votes_here(self) -> bool:
        return self.party_id in self.config.voter_ids

    def take_outbox(self) -> list[Envelope]:
        out, self._outbox = self._outbox, []
        return out

    def take_lane_outbox(self) -> list[tuple[str, dict]]:
        out, self._lane_outbox = self._lane_outbox, []
        return out

    def _broadcast(self, msg_type: str, payload: dict) -> None:
        self._seq += 1
        env = make_envelope(self.config.election_id, self.party_id, self._seq,
                            ROUND_OF_TYPE[msg_type], msg_type, payload, self.signer)
        self._outbox.append(env)

    def _lane_send(self, to: str, frame: dict) -> None:
        self._lane_frame_no += 1
        self._lane_outbox.append((to, frame))
        self._broadcast("ot_digest", {
            "instance": frame.get("instance", ""),
            "frame_no": self._lane_frame_no,
            "to": to,
            "digest": hashlib.sha256(canonical_bytes(frame)).hexdigest()})

    def deliver(self, env: Envelope) -> None:
        if self.finished:
            return
        try:
            self.log.append(env)
        except Exception:
            return  # rejected envelopes never reach the protocol layer
        self.index.add(env)
        with use_counter(self.exp):
            self._react(env)
            self._advance()

    def deliver_frame(self, frm: str, frame: dict) -> None:
        if self.finished:
            return
        with use_counter(self.exp):
            self._handle_lane(frm, frame)
            self._advance()

    def start(self) -> None:
        with use_counter(self.exp):
            self._start()
            self._advance()

    def on_timeout(self) -> None:
        if self.finished:
            return
        missing = sorted(self._awaiting())
        self._broadcast("abort", {"phase": self.phase, "missing": missing,
                                  "reason": "round timeout"})
        self.phase = ABORTED

    # -- hooks implemented by roles -------------------------------------------

    def _start(self) -> None:
        raise NotImplementedError

    def _handle_lane(self, frm: str, frame: dict) -> None:
        raise NotImplementedError

    def _react(self, env: Envelope) -> None:
        if env.msg_type == "abort":
            self.phase = ABORTED

    # -- shared gates -----------------------------------------------------------

    def _advance(self) -> None:
        progressed = True
        while progressed and not self.finished:
            progressed = self._step()

    def _step(self) -> bool:
        raise NotImplementedError

    def _keys_complete(self) -> bool:
        return set(self.config.voter_ids) <= self.index.senders("public_key_share")

    def _build_key(self) -> None:
        shares = []
        for vid in self.config.voter_ids:
            env = self.index.get("public_key_share", vid)
            from .elgamal import PublicShare
            shares.append(PublicShare(
                value=dec_element(env.payload["value"], self.config.params),
                owner_id=vid))
        self.key = aggregate(shares)

    def _votes_complete(self) -> bool:
        return set(self.config.voter_ids) <= self.index.senders("encrypted_vote")

    def _vote_components(self):
        votes = []
        for vid in self.config.voter_ids:
            env = self.index.get("encrypted_vote", vid)
            votes.append(dec_ciphertext(env.payload["ciphertext"], self.config.params))
        return votes

    def _shares_complete(self) -> bool:
        have = self.index.senders("voter_share") | self.index.senders("distributor_share")
        return set(self.config.voter_ids) <= have

    def _round4_responses(self) -> dict[str, str]:
        """voter id -> 'ok' | receipt verdict | 'allegation'."""
        out = {}
        for env in self.index.by_type["audit_receipt"]:
            out.setdefault(env.sender_id, env.payload["verdict"])
        for env in self.index.by_type["allegation"]:
            out[env.sender_id] = "allegation"
        return out

    def _auditors(self) -> list[str]:
        return [vid for vid in self.config.voter_ids if vid != self.party_id] \
            if self.is_distributor else \
            [vid for vid in self.config.voter_ids if vid != self.config.distributor_id]

    def _round4_complete(self) -> bool:
        auditors = [vid for vid in self.config.voter_ids
                    if vid != self.config.distributor_id]
        return set(auditors) <= set(self._round4_responses())

    def _round4_clean(self) -> bool:
        return all(v == "ok" for v in self._round4_responses().values())

    def _broadcast_own_share(self) -> None:
        a_vals = [v.a for v in self._vote_components()]
        share = share_for_product(a_vals, self._private, self.config.election_id)
        msg_type = "distributor_share" if self.is_distributor else "voter_share"
        self._broadcast(msg_type, {"share": enc_share(share)})

    def _awaiting(self) -> set[str]:
        voters = set(self.config.voter_ids)
        if self.phase == AWAIT_KEYS:
            return voters - self.index.senders("public_key_share")
        if self.phase == AWAIT_SETUP:
            return {self.config.distributor_id}
        if self.phase == SELECTING:
            return {self.party_id if self.choice is None else self.config.distributor_id}
        if self.phase == VOTED:
            return voters - self.index.senders("encrypted_vote")
        if self.phase == AWAIT_SHARES:
            have = self.index.senders("voter_share") | self.index.senders("distributor_share")
            return voters - have
        if self.phase == AWAIT_MAPPING:
            if not self.index.by_type["mapping_reveal"]:
                return {self.config.distributor_id}
            auditors = {vid for vid in voters if vid != self.config.distributor_id}
            return auditors - set(self._round4_responses())
        if self.phase == AWAIT_UNMASK:
            if self._round4_complete():
                return {self.config.distributor_id}
            auditors = {vid for vid in voters if vid != self.config.distributor_id}
            return auditors - set(self._round4_responses())
        return set()

    # -- finishing ----------------------------------------------------------------

    def _finish(self) -> None:
        with exp_bucket("audit"):
            self.result = finalize_log(self.log, self.config)
        self.phase = DONE

    def exp_report(self) -> dict:
        snap = self.exp.snapshot()
        snap.pop("audit", None)
        return snap


class VoterNode(Node):
    """A non-distributor voter (and the base for the voting distributor)."""

    def _start(self) -> None:
        self._private, public = keygen(self.config.params, self.rng, self.party_id)
        self._broadcast("public_key_share", {"value": enc_element(public.value)})

    def request_cast(self, candidate: int) -> bool:
        """UI entry point; idempotent, refused outside the selection phase."""
        if self.phase != SELECTING or self.choice is not None:
            return False
        if not 0 <= candidate < self.config.m:
            raise ProtocolError(f"candidate {candidate} out of range")
        self.choice = candidate
        with use_counter(self.exp):
            self._begin_selection()
            self._advance()
        return True

    def _step(self) -> bool:
        if self.phase == AWAIT_KEYS and self._keys_complete():
            self._build_key()
            self.phase = AWAIT_SETUP
            return True
        if self.phase == AWAIT_SETUP and \
                self.index.get("setup_commitments", self.config.distributor_id):
            env = self.index.get("setup_commitments", self.config.distributor_id)
            self._commitments = (dec_commitment(env.payload["assignment_commitment"]),
                                 dec_commitment(env.payload["mask_commitment"]))
            self.phase = SELECTING
            if self.choice is not None:
                self._begin_selection()
            return True
        if self.phase == VOTED and self._votes_complete() and \
                self._distributor_led_shares() and not self._own_share_sent():
            # round gate: release the share only after the distributor's
            # (no distributor share exists when the authority does not vote)
            self._broadcast_own_share()
            self.phase = AWAIT_SHARES
            return True
        if self.phase == AWAIT_SHARES and self._shares_complete():
            self.phase = AWAIT_MAPPING
            return True
        if self.phase == AWAIT_MAPPING and self.index.by_type["mapping_reveal"]:
            self._audit_mapping()
            self.phase = AWAIT_UNMASK
            return True
        if self.phase == AWAIT_UNMASK and self._round4_complete():
            if not self._round4_clean():
                self.phase = ABORTED
                return False
            if self.index.by_type["unmask_reveal"]:
                self._finish()
            return False
        return False

    def _distributor_led_shares(self) -> bool:
        if self.config.ea_mode:
            return True
        return self.index.get("distributor_share", self.config.distributor_id) is not None

    def _own_share_sent(self) -> bool:
        if self.index.get("voter_share", self.party_id):
            return True
        return any(env.msg_type == "voter_share" and env.sender_id == self.party_id
                   for env in self._outbox)

    def _begin_selection(self) -> None:
        blocks = CandidateBlockMap(lam=self.config.lam, m=self.config.m)
        self.chosen_index = self.rng.choice(list(blocks.block_indices(self.choice)))
        pool = self.config.lam * self.config.m
        self._ot = OTNReceiverSession(
            self.config.params, OTChoice(self.chosen_index, pool),
            f"{self.config.election_id}/ot/{self.party_id}", self.rng)
        self._lane_send(self.config.distributor_id, self._ot.start())

    def _handle_lane(self, frm: str, frame: dict) -> None:
        if frm != self.config.distributor_id or self.phase != SELECTING:
            return
        reply = self._ot.handle(frame)
        if reply is not None:
            self._lane_send(self.config.distributor_id, reply)
        if self._ot.result is not None:
            from .group import element_from_bytes
            self.received_masked = element_from_bytes(self._ot.result, self.config.params)
            self._cast_vote()

    def _vote_plaintext(self):
        """What this voter encrypts; fault subclasses override."""
        return self.received_masked

    def _cast_vote(self) -> None:
        if self.phase != SELECTING or self.record is not None:
            raise ProtocolError("duplicate vote cast rejected")
        self.record = encrypt(self._vote_plaintext(), self.key, self.rng)
        self._broadcast("encrypted_vote",
                        {"ciphertext": enc_ciphertext(self.record.ciphertext)})
        self.phase = VOTED

    def _audit_mapping(self) -> None:
        env = self.index.by_type["mapping_reveal"][0]
        opening = dec_opening(env.payload["assignment_opening"])
        if not verify_commitment(self._commitments[0], opening):
            self.audit_verdict = "commitment-mismatch"
            self._broadcast("audit_receipt", {"verdict": self.audit_verdict,
                                              "exp_report": self.exp_report()})
            return
        masked_values = [dec_element(v, self.config.params)
                         for v in env.payload["masked_values"]]
        blocks = CandidateBlockMap(lam=self.config.lam, m=self.config.m)
        ok = (self.chosen_index is not None
              and masked_values[self.chosen_index] == self.received_masked
              and blocks.candidate_of(self.chosen_index) == self.choice)
        if ok:
            self.audit_verdict = "ok"
            self._broadcast("audit_receipt", {"verdict": "ok",
                                              "exp_report": self.exp_report()})
        else:
            self.audit_verdict = "mismatch"
            self._broadcast("allegation", {
                "claim": "received masked prime does not match the revealed mapping",
                "received_value": enc_element(self.received_masked)})

    def file_allegation(self, text: str) -> bool:
        """Manual allegation from the UI; meaningful once the mapping is
        revealed (the automatic audit already alleges on a mismatch)."""
        if self.received_masked is None or self.audit_verdict is None:
            return False
        self._broadcast("allegation", {
            "claim": text,
            "received_value": enc_element(self.received_masked)})
        return True

    def prove_vote(self) -> tuple[str, str]:
        """Release (plaintext, randomness); any verifier can re-encrypt and
        match the broadcast ciphertext.  This is the coercion weakness, shown
        deliberately."""
        if self.record is None:
            raise ProtocolError("no vote cast yet")
        return enc_element(self.record.plaintext), enc_scalar(self.record.x)


class DistributorNode(VoterNode):
    """The distributor: runs setup, answers OT sessions, votes its raw prime
    (normal mode), and opens the commitments in rounds 4 and 5."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.table = None
        self.assignment = None
        self.mask = None
        self.masked = None
        self._openings = None
        self._ot_sessions: dict[str, OTNSenderSession] = {}
        self._unmask_sent = False

    def _start(self) -> None:
        policy = check_lambda_policy(self.config.lam, self.config.m, self.config.n,
                                     ea_trusted=self.config.ea_mode)
        if self.config.strict_lambda and not policy.ok:
            raise ConfigError(f"strict lambda policy: {policy.warning}")
        self.table = select_primes(self.config.lam, self.config.m,
                                   self.config.n, self.config.params)
        self.assignment = shuffle_assignment(self.table, self.rng)
        self.mask = make_mask(self.config.params, self.rng)
        self.masked = mask_all(self.assignment, self.mask, self.config.params)
        payload_a = ballot.assignment_payload(self.assignment, self.config.lam,
                                              self.config.m, self.config.election_id)
        payload_m = ballot.mask_payload(self.mask, self.config.election_id)
        commit_a, open_a = commit(payload_a, self.rng)
        commit_m, open_m = commit(payload_m, self.rng)
        self._openings = (open_a, open_m)
        self._commitments = (commit_a, commit_m)
        if self.votes_here:
            self._private, public = keygen(self.config.params, self.rng, self.party_id)
            self._broadcast("public_key_share", {"value": enc_element(public.value)})
        self._broadcast("setup_commitments", {
            "assignment_commitment": enc_commitment(commit_a),
            "mask_commitment": enc_commitment(commit_m),
            "lam": self.config.lam, "m": self.config.m})

    def _begin_selection(self) -> None:
        self._select_own_prime()

    def _ot_strings(self) -> list[bytes]:
        """The OT payload table; fault subclasses override."""
        return [el.to_bytes() for el in self.masked]

    def _handle_lane(self, frm: str, frame: dict) -> None:
        instance = frame.get("instance", "")
        expected = f"{self.config.election_id}/ot/{frm}"
        if instance != expected:
            return
        session = self._ot_sessions.get(instance)
        if session is None:
            session = OTNSenderSession(self.config.params, self._ot_strings(),
                                       instance, self.rng)
            self._ot_sessions[instance] = session
        reply = session.handle(frame)
        if reply is not None:
            self._lane_send(frm, reply)

    def _select_own_prime(self) -> None:
        blocks = CandidateBlockMap(lam=self.config.lam, m=self.config.m)
        self.chosen_index = self.rng.choice(list(blocks.block_indices(self.choice)))
        # the distributor holds the assignment: it votes the raw prime
        self.received_masked = self.config.params.element(
            self.assignment.prime_at(self.chosen_index))
        self._cast_vote()

    def _step(self) -> bool:
        if self.phase == AWAIT_KEYS and self._keys_complete():
            self._build_key()
            self.phase = AWAIT_SETUP
            return True
        if self.phase == AWAIT_SETUP and \
                self.index.get("setup_commitments", self.party_id):
            self.phase = SELECTING
            if self.votes_here and self.choice is not None:
                self._select_own_prime()
            elif not self.votes_here:
                self.phase = VOTED  # non-voting authority skips selection
            return True
        if self.phase == SELECTING and self.votes_here and self.choice is not None \
                and self.record is None:
            self._select_own_prime()
            return True
        if self.phase == VOTED and self._votes_complete() and self.votes_here \
                and not self.index.get("distributor_share", self.party_id) \
                and not any(e.msg_type == "distributor_share" for e in self._outbox):
            self._broadcast_own_share()
            self.phase = AWAIT_SHARES
            return True
        if self.phase == VOTED and self._votes_complete() and not self.votes_here:
            self.phase = AWAIT_SHARES
            return True
        if self.phase == AWAIT_SHARES and self._shares_complete():
            self._reveal_mapping()
            self.phase = AWAIT_MAPPING
            return True
        if self.phase == AWAIT_MAPPING and self._round4_complete():
            if not self._round4_clean():
                self.phase = ABORTED
                return False
            self._reveal_unmask()
            self.phase = AWAIT_UNMASK
            return True
        if self.phase == AWAIT_UNMASK and self.index.by_type["unmask_reveal"]:
            self._finish()
            return False
        return False

    def _reveal_mapping(self) -> None:
        self._broadcast("mapping_reveal", {
            "masked_values": [enc_element(el) for el in self.masked],
            "assignment_opening": enc_opening(self._openings[0])})

    def _reveal_unmask(self) -> None:
        if self._unmask_sent:
            return
        self._unmask_sent = True
        factor = unmask_factor(self.config.masked_vote_count, self.mask)
        self._broadcast("unmask_reveal", {
            "unmask_value": enc_element(factor),
            "s": enc_scalar(self.mask.s),
            "mask_opening": enc_opening(self._openings[1]),
            "exp_report": self.exp_report()})


class ObserverNode(Node):
    """Log-only party: follows the bus and tallies once the log is complete.

    Messages may arrive in any interleaving that respects per-sender order;
    the observer buffers everything in its log and acts only when the whole
    election is present."""

    def _start(self) -> None:
        pass

    def _handle_lane(self, frm: str, frame: dict) -> None:
        pass

    def _log_complete(self) -> bool:
        voters = set(self.config.voter_ids)
        return (voters <= self.index.senders("public_key_share")
                and voters <= self.index.senders("encrypted_vote")
                and self._shares_complete()
                and self.index.get("mapping_reveal", self.config.distributor_id) is not None
                and bool(self.index.by_type["unmask_reveal"]))

    def _step(self) -> bool:
        if self._log_complete():
            self._finish()
            return False
        if self.index.by_type["abort"]:
            self.phase = ABORTED
            return False
        if self._round4_complete() and not self._round4_clean():
            self.phase = ABORTED
        return False


# ---------------------------------------------------------------------------
# Self-tallying finalizer: a pure function of the bus log
# ---------------------------------------------------------------------------

def finalize_log(log: BusLog, config: ElectionConfig) -> ElectionResult:
    """Tally, audit, and counters from public messages alone."""
    log.verify_chain()
    params = config.params
    flags: list[str] = []
    anomalies: list[dict] = []
    allegations: list[dict] = []

    index = _LogIndex()
    positions: dict[str, list[int]] = defaultdict(list)
    for pos, env in enumerate(log.entries):
        index.add(env)
        positions[env.msg_type].append(pos)

    aborts = index.by_type["abort"]
    for env in index.by_type["allegation"]:
        allegations.append({"voter": env.sender_id, "claim": env.payload["claim"],
                            "received_value": env.payload["received_value"]})
    for env in index.by_type["audit_receipt"]:
        if env.payload["verdict"] != "ok":
            flags.append(f"audit receipt from {env.sender_id}: {env.payload['verdict']}")

    counters = _derive_counters(log, index, config)

    if aborts:
        for env in aborts:
            flags.append(f"abort by {env.sender_id} in {env.payload.get('phase')}: "
                         f"missing {env.payload.get('missing', [])}")
        return ElectionResult(config.election_id, "aborted", None, None, None,
                              anomalies, allegations, flags, counters,
                              _bus_summary(log))

    # round 1: key shares
    missing_keys = set(config.voter_ids) - index.senders("public_key_share")
    if missing_keys:
        raise IncompleteLogError(f"missing key shares from {sorted(missing_keys)}")
    key = aggregate([_public_share_of(index, vid, params) for vid in config.voter_ids])

    setup_env = index.get("setup_commitments", config.distributor_id)
    if setup_env is None:
        raise IncompleteLogError("no setup commitments on the bus")
    commit_a = dec_commitment(setup_env.payload["assignment_commitment"])
    commit_m = dec_commitment(setup_env.payload["mask_commitment"])

    # round 2: votes
    missing_votes = set(config.voter_ids) - index.senders("encrypted_vote")
    if missing_votes:
        raise IncompleteLogError(f"missing votes from {sorted(missing_votes)}")
    votes = [dec_ciphertext(index.get("encrypted_vote", vid).payload["ciphertext"], params)
             for vid in config.voter_ids]
    for vid in config.voter_ids:
        if len([e for e in index.by_type["encrypted_vote"] if e.sender_id == vid]) > 1:
            flags.append(f"duplicate vote envelopes from {vid} (first taken)")

    # fairness: every vote precedes every share on the bus
    share_positions = positions["distributor_share"] + positions["voter_share"]
    if positions["encrypted_vote"] and share_positions:
        if max(positions["encrypted_vote"]) > min(share_positions):
            flags.append("a decryption share was released before all votes were cast")

    # round 3: shares, distributor-first in normal mode
    shares = []
    share_senders = index.senders("voter_share") | index.senders("distributor_share")
    missing_shares = set(config.voter_ids) - share_senders
    if missing_shares:
        raise IncompleteLogError(f"missing decryption shares from {sorted(missing_shares)}")
    expected_target = product_target([v.a for v in votes], config.election_id)
    for vid in config.voter_ids:
        env = index.get("distributor_share", vid) or index.get("voter_share", vid)
        share = dec_share(env.payload["share"], params)
        if share.owner_id != vid:
            flags.append(f"share from {vid} claims owner {share.owner_id}")
        if share.target != expected_target:
            flags.append(f"share from {vid} binds a different ciphertext product")
        shares.append(share)
    if not config.ea_mode and positions["distributor_share"] and positions["voter_share"]:
        if min(positions["voter_share"]) < min(positions["distributor_share"]):
            flags.append("a voter released its share before the distributor")

    # round 4: mapping reveal and audit responses
    mapping_env = index.get("mapping_reveal", config.distributor_id)
    if mapping_env is None:
        raise IncompleteLogError("mapping never revealed")
    opening_a = dec_opening(mapping_env.payload["assignment_opening"])
    masked_values = [dec_element(v, params) for v in mapping_env.payload["masked_values"]]
    assignment = None
    if not verify_commitment(commit_a, opening_a):
        flags.append("assignment commitment opening failed")
    else:
        assignment, lam, m, eid = ballot.parse_assignment_payload(opening_a.payload)
        if (lam, m, eid) != (config.lam, config.m, config.election_id):
            flags.append("assignment opening geometry does not match the election")
            assignment = None
        elif sorted(assignment.primes_by_index) != \
                sorted(select_primes(config.lam, config.m, config.n, params).primes):
            flags.append("assignment primes differ from the agreed table")
            assignment = None

    # round 5: unmask reveal
    unmask_env = index.get("unmask_reveal", config.distributor_id)
    if unmask_env is None:
        if allegations or flags:
            return ElectionResult(config.election_id, "flagged", None, None, None,
                                  anomalies, allegations, flags, counters,
                                  _bus_summary(log))
        raise IncompleteLogError("no unmask reveal and no allegations: log truncated")
    opening_m = dec_opening(unmask_env.payload["mask_opening"])
    unmask_value = dec_element(unmask_env.payload["unmask_value"], params)
    s_published = dec_scalar(unmask_env.payload["s"], params)
    mask = None
    if not verify_commitment(commit_m, opening_m):
        flags.append("mask commitment opening failed")
    else:
        mask = ballot.parse_mask_payload(opening_m.payload, params)
        if mask.s != s_published:
            flags.append("published s does not match the mask opening")
            mask = None

    if mask is not None and assignment is not None:
        recomputed = mask_all(assignment, mask, params)
        if list(recomputed) != list(masked_values):
            flags.append("masked-prime list does not match the opened primes and s")
        if unmask_factor(config.masked_vote_count, mask) != unmask_value:
            flags.append("unmask value inconsistent with the opened s")

    if allegations or flags:
        return ElectionResult(config.election_id, "flagged", None, None, None,
                              anomalies, allegations, flags, counters,
                              _bus_summary(log))

    # tally
    table = select_primes(config.lam, config.m, config.n, params)
    product = ballot.compute_product(votes, shares, unmask_value, key,
                                     config.election_id)
    outcome = ballot.factor_tally(product, table, config.n)
    if isinstance(outcome, ballot.AnomalyReport):
        anomalies.append({"kind": outcome.kind, "details": outcome.details,
                          "exponents": list(outcome.exponents) if outcome.exponents else None})
        return ElectionResult(config.election_id, "flagged", None,
                              list(outcome.exponents) if outcome.exponents else None,
                              None, anomalies, allegations, flags, counters,
                              _bus_summary(log))
    blocks = CandidateBlockMap(lam=config.lam, m=config.m)
    totals_list = ballot.candidate_totals(outcome, assignment, blocks, table)
    totals = {name: count for name, count in zip(config.candidate_names, totals_list)}
    return ElectionResult(config.election_id, "complete", totals,
                          list(outcome.a), outcome.total, anomalies, allegations,
                          flags, counters, _bus_summary(log))


def _public_share_of(index: _LogIndex, vid: str, params):
    from .elgamal import PublicShare
    env = index.get("public_key_share", vid)
    return PublicShare(value=dec_element(env.payload["value"], params), owner_id=vid)


def _bus_summary(log: BusLog) -> dict:
    return {"entries": len(log.entries), "digest": log.chain_digest}


def _derive_counters(log: BusLog, index: _LogIndex, config: ElectionConfig) -> dict:
    rounds = {env.round for env in log.entries if env.round >= 1}
    ot_instances = {env.payload.get("instance") for env in index.by_type["ot_digest"]}
    ot_instances.discard(None)
    exponentiations: dict[str, int] = {}
    reports = [env.payload.get("exp_report", {}) for env in index.by_type["audit_receipt"]]
    reports += [env.payload.get("exp_report", {}) for env in index.by_type["unmask_reveal"]]
    for report in reports:
        for bucket, count in report.items():
            exponentiations[bucket] = exponentiations.get(bucket, 0) + count
    core = exponentiations.get("core", 0)
    # reference cost model: three run-time exponentiations per voter (key
    # share, key-dependent encryption half, decryption share); the constant
    # offset is the distributor's mask and unmask powers
    reference = 3 * config.n
    return {
        "broadcast_rounds": len(rounds),
        "ot_sessions": len(ot_instances),
        "exponentiations": {k: exponentiations[k] for k in sorted(exponentiations)},
        "core_cost": {"reference_3n": reference,
                      "measured": core,
                      "offset": core - reference},
    }


def replay(log: BusLog, config: ElectionConfig) -> ElectionResult:
    """Re-tally a persisted log; bit-identical to the live result."""
    return finalize_log(log, config)
