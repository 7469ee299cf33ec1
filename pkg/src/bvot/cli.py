"""Operator entry points.

Exit codes: 0 clean result, 1 flagged/aborted/incomplete election or failed
audit, 2 usage and configuration errors.  Every error path prints a single
machine-parseable line `error[slug]: reason` on stderr.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import random
import sys

from . import ballot
from .group import PRESETS, generate_params, save_params, validate_params
from .node import LiveNode
from .protocol import ElectionConfig, ProtocolError, finalize_log
from .relay import run_relay
from .simulate import (
    FAULTS,
    SimulationSpec,
    build_config,
    party_rng,
    run_simulation,
)
from .transport import BusLog, ChainError, IncompleteLogError, Signer, TransportError


def fail(slug: str, message: str, code: int = 2) -> int:
    print(f"error[{slug}]: {message}", file=sys.stderr)
    return code


def _log_destination(path: str | None, election_id: str,
                     suffix: str = "") -> str | None:
    """A directory target gets the canonical name embedding the election id."""
    if path is not None and os.path.isdir(path):
        return os.path.join(path, f"bus-{election_id}{suffix}.jsonl")
    return path


def _parse_choices(text: str, n: int) -> list[int] | None:
    if text == "random":
        return None
    parts = [int(p) for p in text.split(",")]
    if len(parts) != n:
        raise ValueError(f"need {n} choices, got {len(parts)}")
    return parts


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        choices = _parse_choices(args.choices, args.n)
        spec = SimulationSpec(n=args.n, m=args.m, lam=args.lam, seed=args.seed,
                              choices=choices, fault=args.fault,
                              ea_mode=args.ea_mode,
                              strict_lambda=args.strict_lambda,
                              params_name=args.params)
        run = run_simulation(spec)
    except (ValueError, ProtocolError, TransportError) as exc:
        return fail("simulation", str(exc))
    if args.log:
        run.log.save(_log_destination(args.log, run.config.election_id))
    print(run.result.text())
    return 0 if run.result.status == "complete" else 1


def cmd_setup(args) -> int:
    try:
        choices_probe = SimulationSpec(n=args.n, m=args.m, lam=args.lam,
                                       seed=args.seed, ea_mode=args.ea_mode,
                                       strict_lambda=args.strict_lambda,
                                       params_name=args.params,
                                       election_id=args.election_id or "")
        config, signers = build_config(choices_probe)
    except (ValueError, ProtocolError) as exc:
        return fail("setup", str(exc))
    os.makedirs(args.out, exist_ok=True)
    config.save(os.path.join(args.out, "config.json"))
    for pid, signer in signers.items():
        with open(os.path.join(args.out, f"{pid}.key"), "w") as fh:
            json.dump({"party_id": pid, "signing_seed": signer.private_seed_hex()}, fh)
            fh.write("\n")
    print(json.dumps({"config": os.path.join(args.out, "config.json"),
                      "parties": sorted(signers)}))
    return 0


def cmd_relay(args) -> int:
    try:
        asyncio.run(run_relay(args.host, args.port))
    except KeyboardInterrupt:
        pass
    return 0


def _load_key(path: str) -> tuple[str, Signer]:
    with open(path) as fh:
        blob = json.load(fh)
    return blob["party_id"], Signer.from_seed(bytes.fromhex(blob["signing_seed"]))


def _run_live(args, role: str) -> int:
    try:
        config = ElectionConfig.load(args.config)
        party_id, signer = _load_key(args.key)
    except (OSError, KeyError, ValueError) as exc:
        return fail("config", str(exc))
    if signer.verify_key_hex != config.roster.get(party_id):
        return fail("config", f"key file for {party_id} does not match the roster")
    rng = party_rng(args.seed, party_id) if args.seed is not None \
        else random.SystemRandom()
    choice = args.choice
    node = LiveNode(config, party_id, signer, rng, choice=choice, role=role,
                    ui_port=args.ui_port,
                    log_path=_log_destination(args.log, config.election_id,
                                              suffix=f"-{party_id}"),
                    round_timeout=args.timeout,
                    fault=getattr(args, "fault", None))
    try:
        asyncio.run(node.run(args.relay_host, args.relay_port))
    except ConnectionError as exc:
        return fail("relay", f"relay unreachable: {exc}")
    if node.party.result is not None and node.party.result.status == "complete":
        return 0
    return 1


def cmd_distributor(args) -> int:
    return _run_live(args, "distributor")


def cmd_voter(args) -> int:
    return _run_live(args, "voter")


def cmd_tally(args) -> int:
    try:
        config = ElectionConfig.load(args.config)
        log = BusLog.load(args.log, config.election_id, config.roster)
        result = finalize_log(log, config)
    except IncompleteLogError as exc:
        return fail("incomplete-log", str(exc), code=1)
    except (OSError, ChainError, TransportError, ProtocolError, ValueError) as exc:
        return fail("tally", str(exc))
    print(result.text())
    return 0 if result.status == "complete" else 1


def cmd_audit(args) -> int:
    try:
        config = ElectionConfig.load(args.config)
        log = BusLog.load(args.log, config.election_id, config.roster)
    except (OSError, TransportError, ValueError) as exc:
        return fail("audit", str(exc))
    checks = {}
    try:
        log.verify_chain()
        checks["digest_chain"] = "ok"
    except ChainError as exc:
        checks["digest_chain"] = f"fail: {exc}"
    try:
        result = finalize_log(log, config)
        checks["election_status"] = result.status
        checks["flags"] = result.flags
        checks["allegations"] = len(result.allegations)
        checks["anomalies"] = [a["kind"] for a in result.anomalies]
    except IncompleteLogError as exc:
        checks["election_status"] = "incomplete"
        checks["flags"] = [str(exc)]
        checks["allegations"] = 0
        checks["anomalies"] = []
    passed = (checks["digest_chain"] == "ok"
              and checks["election_status"] == "complete")
    checks["verdict"] = "pass" if passed else "fail"
    print(json.dumps(checks, sort_keys=True))
    return 0 if passed else 1


def cmd_attack_demo(args) -> int:
    if args.which == "collusion":
        return _demo_collusion(args.seed)
    if args.which == "negative-vote":
        return _demo_fault("negative-vote", args.seed,
                           "two colluding voters inflate one prime and borrow "
                           "another; detection happens at tally time and no "
                           "message identifies the culprit")
    if args.which == "distributor-swap":
        return _demo_fault("distributor-swap", args.seed,
                           "the distributor served a masked prime from the "
                           "wrong candidate block; the wronged voter catches "
                           "it against the revealed mapping before any tally "
                           "exists")
    return fail("attack-demo", f"unknown scenario {args.which!r}")


def _demo_collusion(seed: int) -> int:
    run = run_simulation(SimulationSpec(n=4, m=3, lam=3, seed=seed,
                                        choices=[0, 1, 2, 0]))
    distributor = run.nodes[run.config.distributor_id]
    masked = distributor.masked
    finding = ballot.collusion_unmask_demo(masked[2], masked[7], distributor.table)
    report = {
        "scenario": "collusion",
        "leaked_masked_values": [masked[2].to_bytes().hex(), masked[7].to_bytes().hex()],
        "recovered_g_s": finding.g_s.to_bytes().hex() if finding else None,
        "true_g_s": distributor.mask.g_s.to_bytes().hex(),
        "identified_primes": [finding.prime_i, finding.prime_j] if finding else None,
        "mask_recovered": bool(finding and finding.g_s == distributor.mask.g_s),
        "note": "any voter holding two masked primes strips the mask by "
                "searching prime-pair ratios; this is why the transfer must "
                "be oblivious",
    }
    print(json.dumps(report, sort_keys=True))
    return 0 if report["mask_recovered"] else 1


def _demo_fault(fault: str, seed: int, note: str) -> int:
    run = run_simulation(SimulationSpec(n=4, m=3, lam=3, seed=seed, fault=fault))
    report = {
        "scenario": fault,
        "status": run.result.status,
        "anomalies": run.result.anomalies,
        "allegations": run.result.allegations,
        "flags": run.result.flags,
        "detected": run.result.status != "complete",
        "note": note,
    }
    print(json.dumps(report, sort_keys=True))
    return 0 if report["detected"] else 1


def cmd_gen_params(args) -> int:
    if args.preset:
        params = PRESETS.get(args.preset)
        if params is None:
            return fail("params", f"unknown preset {args.preset!r}; "
                                  f"have {sorted(PRESETS)}")
    else:
        try:
            params = generate_params(args.bits)
        except ValueError as exc:
            return fail("params", str(exc))
    problems = validate_params(params)
    if problems:
        return fail("params", "; ".join(problems))
    if args.out:
        save_params(params, args.out)
    print(json.dumps({"modulus": f"{params.q:x}", "generator": f"{params.g:x}",
                      "bits": params.bit_length}))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvot",
        description="Self-tallying boardroom voting: simulate, run live "
                    "roles, tally, audit, and demonstrate the known attacks.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a full election in-process")
    sim.add_argument("--n", type=int, default=4)
    sim.add_argument("--m", type=int, default=3)
    sim.add_argument("--lam", type=int, default=3)
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--choices", default="random",
                     help="comma-separated candidate indices, or 'random'")
    sim.add_argument("--fault", choices=FAULTS, default=None)
    sim.add_argument("--ea-mode", action="store_true")
    sim.add_argument("--strict-lambda", action="store_true")
    sim.add_argument("--params", default="toy-64", choices=sorted(PRESETS))
    sim.add_argument("--log", help="persist the bus log to this path")
    sim.set_defaults(func=cmd_simulate)

    setup = sub.add_parser("setup", help="write a config file and party keys")
    setup.add_argument("--out", required=True)
    setup.add_argument("--n", type=int, default=3)
    setup.add_argument("--m", type=int, default=3)
    setup.add_argument("--lam", type=int, default=3)
    setup.add_argument("--seed", type=int, default=1)
    setup.add_argument("--election-id", default="")
    setup.add_argument("--ea-mode", action="store_true")
    setup.add_argument("--strict-lambda", action="store_true")
    setup.add_argument("--params", default="toy-64", choices=sorted(PRESETS))
    setup.set_defaults(func=cmd_setup)

    relay = sub.add_parser("relay", help="run the ordering relay")
    relay.add_argument("--host", default="127.0.0.1")
    relay.add_argument("--port", type=int, default=7690)
    relay.set_defaults(func=cmd_relay)

    for role in ("distributor", "voter"):
        live = sub.add_parser(role, help=f"run a live {role}")
        live.add_argument("--config", required=True)
        live.add_argument("--key", required=True)
        live.add_argument("--relay-host", default="127.0.0.1")
        live.add_argument("--relay-port", type=int, default=7690)
        live.add_argument("--choice", type=int, default=None)
        live.add_argument("--seed", type=int, default=None)
        live.add_argument("--ui-port", type=int, default=None)
        live.add_argument("--log", default=None)
        live.add_argument("--timeout", type=float, default=None)
        if role == "distributor":
            live.add_argument("--fault", default=None,
                              choices=["distributor-swap", "corrupt-opening"],
                              help="misbehave on purpose (detection demos)")
        live.set_defaults(func=cmd_distributor if role == "distributor" else cmd_voter)

    tally = sub.add_parser("tally", help="re-tally a persisted bus log")
    tally.add_argument("--log", required=True)
    tally.add_argument("--config", required=True)
    tally.set_defaults(func=cmd_tally)

    audit = sub.add_parser("audit", help="re-verify a persisted bus log")
    audit.add_argument("--log", required=True)
    audit.add_argument("--config", required=True)
    audit.set_defaults(func=cmd_audit)

    demo = sub.add_parser("attack-demo", help="run a known-attack scenario")
    demo.add_argument("--which", required=True,
                      choices=["collusion", "negative-vote", "distributor-swap"])
    demo.add_argument("--seed", type=int, default=1)
    demo.set_defaults(func=cmd_attack_demo)

    params = sub.add_parser("gen-params", help="generate or export group parameters")
    params.add_argument("--bits", type=int, default=64)
    params.add_argument("--preset", default=None)
    params.add_argument("--out", default=None)
    params.set_defaults(func=cmd_gen_params)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
