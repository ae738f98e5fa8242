"""Solve one forward problem and score it against the analytic potential.

Run with ``python3 demos/01_forward_solve.py``.
"""

import numpy as np

from mfstune.geometry import DEFAULT_HEAD, ThetaVector
from mfstune.harness.checks import oracle_checks
from mfstune.mfs import ForwardModel, MetricOptions
from mfstune.oracle import Dipole

# The analytic three-sphere potential is the ground truth, so check it first.
for check in oracle_checks(DEFAULT_HEAD):
    print(f"{check.name:<22} {check.value:.1e} (threshold {check.threshold:.0e})")

# A radial dipole 2 cm above the centre.
dipole = Dipole(position=np.array([0.0, 0.0, 0.02]), moment=np.array([0.0, 0.0, 1.0]))
theta = ThetaVector(1.775, 0.575, 1.775, 0.575, 2.1375)

# Q is -ln(relative squared error) on the scalp; higher is better.
for reference in ("raw", "average"):
    model = ForwardModel(DEFAULT_HEAD, n_colloc=300, k_test=1000, metric=MetricOptions(reference=reference))
    solution = model.solve(theta, dipole)
    print(f"reference={reference:<8} Q={model(theta, dipole):6.2f}  rank={solution.rank}  "
          f"residual/rhs={solution.residual / solution.rhs_norm:.1e}")

# Scanning the outer inflation factor shows how sharply Q depends on theta.
model = ForwardModel(DEFAULT_HEAD, n_colloc=300, k_test=1000, metric=MetricOptions(reference="average"))
for t1i in np.linspace(1.1, 2.5, 8):
    th = ThetaVector(t1i, 0.575, 1.775, 0.575, 2.1375)
    print(f"t1i={t1i:4.2f}  Q={model(th, dipole):6.2f}")
