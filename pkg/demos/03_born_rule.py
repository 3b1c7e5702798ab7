# Pointer frequencies from a fair martingale on sector powers, against |xi|^2.
from fractions import Fraction

import numpy as np

from quasistate import PreparedSystem, fine_grain, monte_carlo, rationalize

for powers in [(0.5, 0.5), (0.7, 0.2, 0.1), (0.4, 0.3, 0.2, 0.1)]:
    prep = PreparedSystem.from_powers(powers)
    res = monte_carlo(prep, pointer_map=list(range(1, len(powers) + 1)), trials=50_000, seed=3)
    z = np.abs(res.frequencies - res.analytic) / np.maximum(res.stderr, 1e-300)
    print(powers, "->", np.round(res.frequencies[1:], 4), "max |z| =", round(float(z[1:].max()), 2),
          "unfixated", res.unfixated_rate)

# counter fine-graining: each slot carries one unit of probability
ca = fine_grain(rationalize([0.7, 0.2, 0.1], 10))
print("counter slots", ca.counts, "unit", ca.unit, "sums back to", ca.probabilities())
assert sum(ca.probabilities()) == Fraction(1)
