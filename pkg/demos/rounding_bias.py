"""
Why products are rounded at random
==================================

Rounding each product to the nearest fixed-point value can bias a sum in
one direction.  Here every product has fractional part exactly 1/4, so
nearest rounding always drops it, while probabilistic rounding keeps the
expected value.
"""
from deepmpc import roundlab as rl

w = rl.nearest_bias_witness(rl.RoundingExperiment(trials=10_000))
print(f"nearest rounding:       mean deviation {w['nearest_bias']:+.4f}")
print(f"probabilistic rounding: mean deviation {w['prob_bias']:+.4f}")
print(f"  (standard error {w['standard_error']:.4f})")

# the three properties of probabilistic rounding, at reduced trial counts
for which, setup in [
    ("prop1", rl.RoundingExperiment(8, 8, 8, trials=20_000)),
    ("prop2", rl.RoundingExperiment(16, 16, 16, trials=200)),
    ("prop3", rl.RoundingExperiment(32, 32, 32, trials=500)),
]:
    print(rl.summary_line(rl.run_rounding_experiment(setup, which)))
