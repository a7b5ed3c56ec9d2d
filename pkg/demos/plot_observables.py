"""
Observables and POVMs
=====================

Antennas along the eigenvectors of an observable turn clicks into samples
of its eigenvalues. Effects of a POVM can be measured the same way.
"""

import math

import numpy as np

from clickfield import GridSpec, Povm, build_mixed_source, build_pure_source, observable_experiment
from clickfield.experiment import partition_experiment

grid = GridSpec((2,), dV=1.0)
t = 0.4
e1 = np.array([math.cos(t), math.sin(t)], dtype=complex)
e2 = np.array([-math.sin(t), math.cos(t)], dtype=complex)
psi = math.sqrt(0.8) * e1 + math.sqrt(0.2) * e2
source = build_pure_source(psi, 1.0, seed=8, grid=grid)
rep = observable_experiment(source, [1.0, -1.0], [e1, e2], T=100_000)
m = rep.metrics
print(f"average={m['empirical_average']:.4f}  expected={m['target_average']:.4f}  SE={m['stderr']:.1e}")

# %%
# A two-outcome POVM on a mixed state. The default effect functional
# ``<Q phi, phi>`` reproduces ``Tr rho Q``. The literal ``||Q phi||^2``
# follows ``Tr rho Q^2`` and is normalized only after the fact.

mixed = build_mixed_source(np.eye(2), [0.8, 0.2], seed=9, grid=grid)
q0 = np.array([[0.7, 0.2], [0.2, 0.4]])
for mode in ("sqrt", "literal"):
    parts = [Povm(q0, mode=mode, name="Q0"), Povm(np.eye(2) - q0, mode=mode, name="Q1")]
    rep = partition_experiment(mixed, parts, T=100_000)
    print(f"{mode:8s} p_hat={np.round(rep.p_hat, 4)}  Tr(rho Q)={[round(r.target, 4) for r in rep.rows]}"
          f"  TV={rep.metrics['tv']:.3f}")
