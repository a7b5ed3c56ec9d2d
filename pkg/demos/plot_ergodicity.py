"""
Time averages versus ensemble averages
======================================

Along one realization, the running mean of ``|phi(s, x0)|^2`` approaches
``D(x0, x0)``. Correlated (AR1) signals get there more slowly.
"""

import numpy as np

from clickfield import GridSpec, TemporalModel, build_pure_source, ergodicity_check

grid = GridSpec((8,))
psi = grid.uniform_mode()
deltas = [10**3, 10**4, 10**5, 10**6]

for temporal in (TemporalModel.white(), TemporalModel.ar1(0.9)):
    source = build_pure_source(psi, 2.0, temporal=temporal, seed=2, grid=grid)
    rep = ergodicity_check(source, 0, deltas, replicas=4)
    devs = ", ".join(f"{r['delta']:.0e}: {r['rel_dev']:.4f}" for r in rep.tables["ergodicity"])
    print(f"{temporal.variant:6s} mean relative deviation  {devs}")
