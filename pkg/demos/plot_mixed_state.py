"""
Mixed states
============

Independent modes with weights ``p_k`` give the covariance
``sum_k p_k |psi_k><psi_k|``; click frequencies follow its diagonal.
"""

import numpy as np

from clickfield import GridSpec, born_experiment, build_mixed_source, empirical_covariance

grid = GridSpec((4,))
source = build_mixed_source(grid.standard_basis(), [0.4, 0.3, 0.2, 0.1], seed=4, grid=grid)
report = born_experiment(source, T=200_000)
print("p_hat ", np.round(report.p_hat, 4))
print("target", [r.target for r in report.rows])
print(f"TV={report.metrics['tv']:.2e}  tolerance={report.metrics['tv_tolerance']:.2e}")

# %%
# The sampled covariance reproduces the kernel ``D(x, y)``.

est, se = empirical_covariance(source, 50_000, return_stderr=True)
print("max |D_hat - D| / SE:", float(np.max(np.abs(est - source.covariance.kernel_matrix()) / se)))
