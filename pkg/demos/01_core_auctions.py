"""Single-round auctions and their structural properties.

Walks through the three mechanisms, then pokes the individual-rationality,
coalition (core), and monotone bang-per-buck predicates on small profiles.

Run: python demos/01_core_auctions.py
"""

import numpy as np

from pacesim import (
    allocate,
    check_core,
    check_ir,
    check_mbb,
    first_price,
    gsp,
    second_price,
)

print("== one round, three mechanisms ==")
bids = [3.0, 2.0, 1.0]
for mech, name in [
    (first_price(), "first price (single slot)"),
    (second_price(), "second price (single slot)"),
    (gsp([1.0, 0.5]), "GSP with click rates (1, 0.5)"),
]:
    out = allocate(mech, bids)
    print(f"{name}: bids {bids}")
    print(f"   allocations {out.allocations}  payments {out.payments}")

print()
print("== individual rationality: nobody pays above declared welfare ==")
out = allocate(gsp([1.0, 0.5]), bids)
print("IR holds:", check_ir(out, bids))

print()
print("== the coalition condition ==")
# Agent 2 (bidding 1) teams up with the seller and asks for the whole slot.
# Seller revenue from the others plus the coalition's current declared
# welfare must already beat that deviation.
ok = check_core(second_price(), [2.0, 1.0], {1}, [0.0, 1.0])
print("second-price outcome resists {agent 2} grabbing the slot:", ok)

print()
print("== monotone bang-per-buck ==")
# Raising the bid from 0.4 to 0.6 against an opponent at 0.5 flips the
# win; the extra payment (0.5) must cover the old bid per extra unit (0.4).
print("second price, 0.4 -> 0.6 vs opponent 0.5:", check_mbb(second_price(), 0, 0.4, 0.6, [0.5]))
print("GSP, outsider 0.5 -> 3.0 vs opponents (2, 1):", check_mbb(gsp([1, 0.5]), 2, 0.5, 3.0, [2.0, 1.0]))

print()
print("== deterministic ties ==")
print("equal bids go to the lowest index:", allocate(second_price(), [1.5, 1.5]).allocations)

print()
print("== a quick randomized sanity sweep ==")
rng = np.random.default_rng(0)
clean = True
for _ in range(500):
    profile = rng.uniform(0, 2, rng.integers(2, 5)).tolist()
    outcome = allocate(first_price(), profile)
    clean &= check_ir(outcome, profile)
print("500 random first-price rounds all IR:", clean)
