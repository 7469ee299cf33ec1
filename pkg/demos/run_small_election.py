#!/usr/bin/env python3
"""A four-voter, three-candidate election from end to end.

Walks the whole protocol in-process and narrates what lands on the bus:
key shares and commitments, the oblivious hand-out of masked primes, the
encrypted votes, the share round, both reveals, and the factored tally.
"""

from bvot.simulate import SimulationSpec, run_simulation

spec = SimulationSpec(n=4, m=3, lam=3, seed=2024, choices=[1, 2, 1, 0])
run = run_simulation(spec)

print(f"election {run.config.election_id}: {run.config.n} voters, "
      f"{run.config.m} candidates, {run.config.lam} primes per candidate\n")

print("bus traffic, in total order:")
for env in run.log.entries:
    tag = f"r{env.round}" if env.round else "--"
    print(f"  {tag}  {env.msg_type:18s} from {env.sender_id}")

distributor = run.nodes[run.config.distributor_id]
print(f"\nprime table: {distributor.table.primes}")
print(f"secret assignment (index -> prime): {distributor.assignment.primes_by_index}")
print(f"ballots cast (candidate indices): {run.choices}")

result = run.result
print(f"\nexponent vector over the table: {result.exponents}")
print(f"vote total: {result.vote_total}")
print("totals:")
for name, count in result.totals.items():
    print(f"  {name}: {count}")
print(f"\ncounters: {result.counters}")
assert result.status == "complete"
