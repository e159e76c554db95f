"""
Solving the inner maximization exactly
======================================

For a fixed decision x the perturbed Lagrangian is, in each multiplier,
gamma * G + W * log(1 + gamma): linear plus a concave log term. Its
maximizer on [0, y_max] has a closed form, so the minimax oracle only has
to search over x.
"""

import numpy as np

from ftdpl.core import DualPerturbationSchedule
from ftdpl.oracle import dual_argmax, dual_objective

y_max = 100.0
grid = np.linspace(0.0, y_max, 100_001)

# W grows with the period through the dual perturbation schedule.
sched = DualPerturbationSchedule(lam=100.0)
for t in (1, 2, 10, 100):
    W = sched.weight_at(t)
    for G in (-2000.0, -50.0, 0.0, 3.0):
        closed = dual_argmax(np.array([G]), W, y_max)[0]
        brute = grid[np.argmax(dual_objective(grid, G, W))]
        print(f"t={t:3d} W={W:8.2f} G={G:8.1f}  closed form {closed:8.4f}  grid {brute:8.4f}")

# Without the perturbation (W = 0) the multiplier jumps between 0 and y_max.
print(dual_argmax(np.array([-1.0, 0.0, 1e-9, 5.0]), 0.0, y_max))
