"""
Checking the exchange terms with Monte Carlo collisions
=======================================================

The weak form of the collision operator is an expectation over pre-
collision velocities drawn from the two maximizers and a random impact
direction.  Sampling it gives an estimate that knows nothing about the
closed-form exchange rates, which makes it a fair referee.
"""
import numpy as np

from maxent_ms.collisions import mc_weak_form, weak_form_closed
from maxent_ms.model import CellState, MixtureSpec

spec = MixtureSpec([1.0, 1.0], [[0, 1 / np.pi], [1 / np.pi, 0]], m0=1.0)
state = CellState([1.0, 1.0], [[0, 0, 0], [1, 0, 0]], 1.0)

for i, j, psi in [(0, 1, "speed-squared"), (0, 1, "velocity"), (0, 1, "unit"),
                  (0, 0, "velocity"), (0, 0, "speed-squared")]:
    est = mc_weak_form(spec, state, 1.0, i, j, psi, n=400_000, seed=1)
    exact = weak_form_closed(spec, state, 1.0, i, j, psi)
    print(f"({i + 1},{j + 1}) {psi:>13}: MC {np.round(est.mean, 4)} +- "
          f"{np.round(est.stderr, 4)}   closed form {np.round(exact, 4)}")

# The mono-species rows vanish to round-off: every sampled collision
# conserves momentum and energy exactly.
