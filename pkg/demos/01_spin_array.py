# Eight spins watched over long windows: which regimes leave a classical trace?
import numpy as np

from quasistate import spin_array, spin_array_quasi_state, windows

M, steps, window = 8, 5000, 1000

for regime in ["random-fast", "balanced", "pure"]:
    spins = spin_array(regime, M, steps, dt=1.0, seed=1)
    qs = [spin_array_quasi_state(spins, w, alpha_min=2.0) for w in windows(spins[0], window)]
    dims = [0 if q is None else q.N for q in qs]
    print(f"{regime:12s} quasi-state dimension per window: {dims}")

# three pure spins hidden among five that sit just off the equator
spins = spin_array("mixed", M, steps, 1.0, seed=1, n_pure=3, pure_positions=(0, 3, 5))
q = spin_array_quasi_state(spins, windows(spins[0], window)[0], alpha_min=2.0)
print("mixed: spins picked out", sorted({k // 2 for k in q.indices}))
print("normalized weights", np.round(q.normalized_weights(), 4))
