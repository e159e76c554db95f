"""
Finding the pollution source from streaming readings
====================================================

The full application at a short horizon: readings arrive one per
period, and after each one the online algorithm updates its estimate of
the released mass, the release location and the release time. The
entropic-risk constraint keeps the squared errors from spreading out.
"""

import numpy as np

from ftdpl import experiments as ex
from ftdpl.config import ExperimentConfig, apply_overrides

# Short horizon and a lighter search so the script finishes in seconds.
cfg = apply_overrides(
    ExperimentConfig(),
    ["T=120", "cross_sections=[60, 120]", "solver.generations=30", "solver.restarts=1"],
).validate("oos")
traces, seeds, timings = ex.paired_traces(cfg, cfg.T)
print("seeds", seeds, "wall clock (s)", timings)

truth = ex.true_source(cfg).as_array()
for n in (10, 30, 60, 120):
    x = traces["ftdpl"].x[n - 1]
    err = ex.relative_errors(x, truth)
    print(f"period {n:3d}: s={x[0]:10.0f} l={x[1]:9.1f} t={x[2]:7.2f}  rel err {np.round(err, 3)}")

# Out-of-sample squared errors on a fresh 200-reading test set.
for period, method, mean, var in ex.oos_table(cfg, traces, cfg.cross_sections):
    print(f"period {period:3d} {method:>13}: mean {mean:.4f} variance {var:.4f}")
