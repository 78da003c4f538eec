"""
Three parties, one multiplication
=================================

Each party holds two of three additive components of every value, so any
single party sees only uniformly random ring elements.  Here we share two
numbers, multiply them, and count what went over the wire.
"""
import numpy as np

from deepmpc import FixedConfig
from deepmpc import secmath as sm
from deepmpc.backend import MPCBackend
from deepmpc.transport import run_parties

cfg = FixedConfig()


def party(session):
    be = MPCBackend(session, cfg, "prob", seed=1)
    # party 0 owns x, party 1 owns y; the others pass only a shape
    x = be.input_fixed(0, np.array([1.5, -2.25]) if be.holds_input(0) else None, (2,))
    y = be.input_fixed(1, np.array([4.0, 0.5]) if be.holds_input(1) else None, (2,))
    view = [p.copy() for p in x.parts]

    start = be.comm()
    z = sm.fxmul(be, x, y)
    cost = be.comm() - start

    neg = be.open_bin(sm.ltz(be, z))
    return view, be.reveal(z), cost, neg


results = run_parties(party)

# party 1's view of x: one component is zero (the owner sent a single value)
# and the other is uniformly random, so x itself stays hidden
print("party 1 components of x:", results[1][0])

# every party opens the same product
print("x * y =", results[0][1])
print("x * y < 0:", results[0][3])

# one product plus one probabilistic truncation, per party
for i, (_, _, cost, _) in enumerate(results):
    print(f"party {i} sent {cost.bits_sent} bits in {cost.rounds} rounds")
