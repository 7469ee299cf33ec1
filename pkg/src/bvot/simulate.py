"""Deterministic in-process elections.

One master seed derives every party's RNG and signing key, so the same spec
produces a byte-identical bus log and result document on every run.  Fault
scripts swap in misbehaving party classes to drive the detection paths.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .group import PRESETS, mod_inv, mod_mul
from .protocol import (
    DistributorNode,
    ElectionConfig,
    ElectionResult,
    ObserverNode,
    VoterNode,
    finalize_log,
)
from .transport import BusLog, DeterministicBus, Signer

FAULTS = ("negative-vote", "distributor-swap", "withhold-share", "corrupt-opening")


@dataclass
class SimulationSpec:
    n: int
    m: int
    lam: int
    seed: int
    choices: list[int] | None = None  # None: drawn from the seed
    fault: str | None = None
    ea_mode: bool = False
    strict_lambda: bool = False
    params_name: str = "toy-64"
    election_id: str = ""

    def __post_init__(self):
        if self.fault is not None and self.fault not in FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}; know {FAULTS}")
        if not self.election_id:
            self.election_id = f"sim-{self.seed}"
        if self.choices is not None and len(self.choices) != self.n:
            raise ValueError(f"{len(self.choices)} choices for {self.n} voters")


@dataclass
class SimulationRun:
    result: ElectionResult
    log: BusLog
    config: ElectionConfig
    nodes: dict
    choices: list[int]


def party_rng(seed: int, party_id: str) -> random.Random:
    return random.Random(f"{seed}/{party_id}")


def party_signer(seed: int, party_id: str) -> Signer:
    return Signer.from_seed_material(str(seed), party_id)


def resolve_choices(spec: SimulationSpec) -> list[int]:
    if spec.choices is not None:
        return list(spec.choices)
    rng = random.Random(f"{spec.seed}/choices")
    # keep one candidate unvoted under the negative-vote fault so the
    # borrowed prime is guaranteed detectable
    pool = spec.m - 1 if (spec.fault == "negative-vote" and spec.m > 1) else spec.m
    return [rng.randrange(pool) for _ in range(spec.n)]


def build_config(spec: SimulationSpec) -> tuple[ElectionConfig, dict[str, Signer]]:
    voter_ids = [f"v{i + 1}" for i in range(spec.n)]
    distributor_id = "ea" if spec.ea_mode else voter_ids[0]
    party_ids = ([distributor_id] + voter_ids) if spec.ea_mode else voter_ids
    signers = {pid: party_signer(spec.seed, pid) for pid in party_ids}
    config = ElectionConfig(
        election_id=spec.election_id,
        params=PRESETS[spec.params_name],
        params_name=spec.params_name,
        m=spec.m, lam=spec.lam,
        candidate_names=[f"candidate-{c + 1}" for c in range(spec.m)],
        voter_ids=voter_ids,
        distributor_id=distributor_id,
        roster={pid: s.verify_key_hex for pid, s in signers.items()},
        ea_mode=spec.ea_mode,
        strict_lambda=spec.strict_lambda,
    )
    config.validate()
    return config, signers


# ---------------------------------------------------------------------------
# Fault parties
# ---------------------------------------------------------------------------

class NegativeVoteVoter(VoterNode):
    """Casts (p_r g^s)^2 (p_j g^s)^{-1} instead of its masked prime.

    Knowing a second masked prime is exactly what an honest voter cannot do;
    the harness leaks the distributor's masked list to model two-voter
    collusion.  The net mask exponent stays one, so the cheat surfaces purely
    in the prime exponents at tally time.
    """

    leaked_distributor = None  # wired by the harness
    borrow_index: int = 0

    def _vote_plaintext(self):
        masked = self.leaked_distributor.masked
        own = self.received_masked
        return mod_mul(mod_mul(own, own), mod_inv(masked[self.borrow_index]))


class SwappingDistributor(DistributorNode):
    """Serves OT from a table with two candidate blocks swapped while
    publishing the honest list at mapping reveal."""

    swap_blocks: tuple[int, int] = (0, 1)

    def _ot_strings(self) -> list[bytes]:
        strings = [el.to_bytes() for el in self.masked]
        a, b = self.swap_blocks
        lam = self.config.lam
        for off in range(lam):
            i, j = a * lam + off, b * lam + off
            strings[i], strings[j] = strings[j], strings[i]
        return strings


class WithholdingVoter(VoterNode):
    """Never releases its decryption share (the classic liveness attack)."""

    def _broadcast_own_share(self) -> None:
        pass


class CorruptOpeningDistributor(DistributorNode):
    """Publishes a mapping opening that does not match its commitment."""

    def _reveal_mapping(self) -> None:
        from .messages import enc_element, enc_opening
        opening = self._openings[0]
        bad_nonce = bytes([opening.nonce[0] ^ 1]) + opening.nonce[1:]
        self._broadcast("mapping_reveal", {
            "masked_values": [enc_element(el) for el in self.masked],
            "assignment_opening": enc_opening(
                type(opening)(payload=opening.payload, nonce=bad_nonce))})


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def build_nodes(spec: SimulationSpec, config: ElectionConfig,
                signers: dict[str, Signer], choices: list[int]) -> dict:
    choice_of = dict(zip(config.voter_ids, choices))
    nodes = {}
    cheater_id = None
    if spec.fault in ("negative-vote", "withhold-share"):
        candidates = [v for v in config.voter_ids if v != config.distributor_id]
        cheater_id = candidates[0]

    for pid in config.party_ids():
        rng = party_rng(spec.seed, pid)
        signer = signers[pid]
        if pid == config.distributor_id:
            cls = DistributorNode
            if spec.fault == "distributor-swap":
                cls = SwappingDistributor
            elif spec.fault == "corrupt-opening":
                cls = CorruptOpeningDistributor
            node = cls(config, pid, signer, rng,
                       choice=choice_of.get(pid))
            if spec.fault == "distributor-swap":
                victim = [v for v in config.voter_ids if v != pid][0]
                node.swap_blocks = (choice_of[victim],
                                    (choice_of[victim] + 1) % config.m)
        elif pid == cheater_id and spec.fault == "negative-vote":
            node = NegativeVoteVoter(config, pid, signer, rng, choice=choice_of[pid])
        elif pid == cheater_id and spec.fault == "withhold-share":
            node = WithholdingVoter(config, pid, signer, rng, choice=choice_of[pid])
        else:
            node = VoterNode(config, pid, signer, rng, choice=choice_of[pid])
        nodes[pid] = node

    if spec.fault == "negative-vote":
        cheater = nodes[cheater_id]
        cheater.leaked_distributor = nodes[config.distributor_id]
        unvoted = [c for c in range(config.m) if c not in choices]
        if not unvoted:
            raise ValueError("negative-vote fault needs an unvoted candidate block")
        cheater.borrow_index = unvoted[0] * config.lam
    return nodes


def run_simulation(spec: SimulationSpec, pick_next=None,
                   observer: bool = False) -> SimulationRun:
    config, signers = build_config(spec)
    choices = resolve_choices(spec)
    nodes = build_nodes(spec, config, signers, choices)
    bus = DeterministicBus(config.election_id, config.roster, pick_next=pick_next)
    for pid in config.party_ids():
        bus.register(nodes[pid])
    obs = None
    if observer:
        obs_signer = party_signer(spec.seed, "observer")
        roster = dict(config.roster)
        obs = ObserverNode(config, "observer", obs_signer,
                           party_rng(spec.seed, "observer"))
        # observers receive but never send; they need no roster entry
        bus.nodes["observer"] = obs
        bus._order.append("observer")
    log = bus.run()
    result = finalize_log(log, config)
    if obs is not None:
        nodes = dict(nodes)
        nodes["observer"] = obs
    return SimulationRun(result=result, log=log, config=config,
                         nodes=nodes, choices=choices)
