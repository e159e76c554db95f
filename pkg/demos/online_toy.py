"""
The online algorithm on a one-dimensional toy
=============================================

Each period brings a quadratic loss with a drifting target and the
long-term constraint that x should average at most 0.4. We run the
doubly perturbed leader and its unconstrained counterpart, then compare
regret against the best fixed decision in hindsight.
"""

import numpy as np

from ftdpl.core import InstanceSpec, PrimalBox
from ftdpl.online import AlgorithmParams, regret_checkpoints, run_replication
from ftdpl.oracle import GlobalSearchConfig

T = 120
targets = 0.55 + 0.35 * np.sin(np.arange(1, T + 1) / 7.0)


def evaluator(X, periods):
    m = targets[np.asarray(periods) - 1]
    F = (X[:, :1] - m[None, :]) ** 2
    C = np.broadcast_to(X[:, :1], F.shape)[:, None, :]
    return F, C


spec = InstanceSpec(T, evaluator, thresholds=[0.4], primal_box=PrimalBox([0.0], [1.0]), y_max=100.0)
cfg = GlobalSearchConfig(population_size=32, generations=30, restarts=1)
checkpoints = regret_checkpoints(T, 20)

# The dual perturbation weight grows like lam * t**(8/9). With the default
# lam = 100 it dwarfs these unit-scale losses, every multiplier sits at
# y_max and the played Lagrangian drifts away from the hindsight value.
# Scaling lam to the losses restores the intended behaviour.
for lam in (100.0, 0.1):
    params = AlgorithmParams.for_horizon(T, M=1, lam=lam)
    ftdpl = run_replication(spec, params, cfg, seed=7, checkpoints=checkpoints)
    print(f"lam={lam}: mean x {ftdpl.x.mean():.3f}, mean multiplier {ftdpl.y.mean():.2f}")
    for n in checkpoints[::2]:
        print(f"   n={n:4d}  R_n={ftdpl.regret[n - 1]:9.3f}  R_n/n={ftdpl.average_regret[n - 1]:.4f}")

# The unconstrained baseline ignores the budget on x entirely.
ftpl = run_replication(spec, params, cfg, seed=7, method="ftpl")
print("unconstrained mean x:", ftpl.x.mean().round(3))
