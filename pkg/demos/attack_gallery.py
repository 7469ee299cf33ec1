#!/usr/bin/env python3
"""The three known attacks, run one after another.

1. Collusion: two voters pool their masked primes and strip the mask.
2. Negative vote: a cheater casts p^2 q^{-1}; the tally refuses to factor
   and the search pins the -1.
3. Distributor swap: the OT hands out a prime from the wrong candidate
   block; the wronged voter alleges before any tally exists.
"""

from bvot.ballot import collusion_unmask_demo
from bvot.simulate import SimulationSpec, run_simulation

print("=" * 72)
print("1. two-voter collusion against the mask")
print("=" * 72)
honest = run_simulation(SimulationSpec(n=4, m=3, lam=3, seed=99, choices=[0, 1, 2, 0]))
distributor = honest.nodes[honest.config.distributor_id]
leak_a, leak_b = distributor.masked[2], distributor.masked[7]
finding = collusion_unmask_demo(leak_a, leak_b, distributor.table)
print(f"leaked masked values: {leak_a.value:#x}, {leak_b.value:#x}")
print(f"ratio search identifies primes ({finding.prime_i}, {finding.prime_j})")
print(f"recovered g^s = {finding.g_s.value:#x}")
print(f"distributor's real g^s = {distributor.mask.g_s.value:#x}")
print(f"mask recovered: {finding.g_s == distributor.mask.g_s}")
print("moral: the transfer must be oblivious; one voter must never hold two\n")

print("=" * 72)
print("2. negative vote (p^2 q^{-1})")
print("=" * 72)
cheat = run_simulation(SimulationSpec(n=4, m=3, lam=3, seed=99, fault="negative-vote"))
anomaly = cheat.result.anomalies[0]
print(f"election status: {cheat.result.status}")
print(f"anomaly: {anomaly['kind']}")
print(f"reconstructed exponents: {anomaly['exponents']}")
print(f"details: {anomaly['details']}")
print("no allegation names a voter: detection works, attribution does not\n")

print("=" * 72)
print("3. distributor swaps candidate blocks in the OT table")
print("=" * 72)
swap = run_simulation(SimulationSpec(n=4, m=3, lam=3, seed=99, fault="distributor-swap"))
print(f"election status: {swap.result.status}")
for allegation in swap.result.allegations:
    print(f"allegation from {allegation['voter']}: {allegation['claim']}")
tally_published = any(e.msg_type == "unmask_reveal" for e in swap.log.entries)
print(f"tally published: {tally_published} (the reveal never happened)")
