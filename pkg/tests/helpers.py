"""Shared test machinery: within-round delivery-order plans for the
deterministic bus."""

import itertools

from bvot.simulate import SimulationSpec, run_simulation


def reorder_policy(plan):
    """Build a pick_next callback from {round: [(msg_type, sender), ...]}.

    Rounds absent from the plan (and round-0 lane digests) deliver FIFO.
    Raises if a planned item is expected but will never become deliverable,
    which would mean the plan violates an emission dependency.
    """
    cursor = {r: 0 for r in plan}

    def pick(pending):
        lowest = min(env.round for env in pending)
        want = plan.get(lowest)
        if want is not None and cursor[lowest] < len(want):
            key = want[cursor[lowest]]
            for idx, env in enumerate(pending):
                if env.round == lowest and (env.msg_type, env.sender_id) == key:
                    cursor[lowest] += 1
                    return idx
            others = [e for e in pending if e.round != lowest]
            if not others:
                raise AssertionError(
                    f"plan wants {key} in round {lowest} but pending holds "
                    f"{[(e.msg_type, e.sender_id) for e in pending]}")
            return pending.index(others[0])
        for idx, env in enumerate(pending):
            if env.round == lowest:
                return idx
        return 0

    return pick


def round_layers(config):
    """The permutable delivery layers of an honest election.

    Entries are lists of (msg_type, sender) whose elements are all pending
    simultaneously; fixed prefixes (the distributor's share, the mapping) are
    returned separately because the round gate pins them first.
    """
    d = config.distributor_id
    voters = list(config.voter_ids)
    auditors = [v for v in voters if v != d]
    layers = {
        1: {"prefix": [], "free": [("public_key_share", v) for v in voters]
            + [("setup_commitments", d)]},
        2: {"prefix": [], "free": [("encrypted_vote", v) for v in voters]},
        3: {"prefix": [] if config.ea_mode else [("distributor_share", d)],
            "free": [("voter_share", v) for v in auditors]
            if not config.ea_mode else [("voter_share", v) for v in voters]},
        4: {"prefix": [("mapping_reveal", d)],
            "free": [("audit_receipt", v) for v in auditors]},
        5: {"prefix": [("unmask_reveal", d)], "free": []},
    }
    return layers


def sender_fifo_orders(free):
    """Permutations that keep each sender's messages in emission order (the
    only reorderings a FIFO-per-party transport can produce)."""
    emission = {}
    for msg_type, sender in free:
        emission.setdefault(sender, []).append(msg_type)
    for order in itertools.permutations(free):
        per_sender = {}
        for msg_type, sender in order:
            per_sender.setdefault(sender, []).append(msg_type)
        if per_sender == emission:
            yield order


def run_with_round_order(spec: SimulationSpec, round_no: int, order):
    """Run a simulation delivering round `round_no` in the given order."""
    from bvot.simulate import build_config
    config, _ = build_config(spec)
    layers = round_layers(config)[round_no]
    plan = {round_no: layers["prefix"] + list(order)}
    return run_simulation(spec, pick_next=reorder_policy(plan))
