"""Proportion sweep with the theory overlay, at reduced scale.

Sweeps the training proportion of family B from 0 to 1, recording the
mixed-test average rate per point, then evaluates the theoretical mixture
curve C(q) from input Hessians of the half-mixed reference model. The
empirical best proportion and the theory's argmin C(q) land close to each
other.

Run:  python demos/05_proportion_sweep.py   (several minutes)
"""

import numpy as np

from beammix import ArrayGeometry, NetConfig
from beammix.config import default_config
from beammix.experiments import run_sweep

cfg = default_config(
    geometry=ArrayGeometry(n_antennas=32),
    net=NetConfig(n_antennas=32, hidden_widths=(160, 160, 64)),
    n_total=600,
    n_eval=300,
    train_epochs=600,
    sweep_epochs=400,
    hessian_samples=900,
    q_grid=tuple(round(0.1 * i, 10) for i in range(11)),
)

print("running 11 training runs plus the reference model ...\n")
result = run_sweep(cfg)

print(f"{'q_B':>5} {'rate':>8} {'extra loss':>11} {'C(q)':>10} {'log C':>8}")
for row in result.sweep_rows:
    print(
        f"{row['q']:>5.2f} {row['rate']:>8.3f} {row['extra_loss']:>11.4f} "
        f"{row['C_direct']:>10.4g} {row['log_C']:>8.3f}"
    )
t = result.theory
print(f"\nempirical best proportion:  q_B = {t['argmax_rate_q']:.1f}")
print(f"theory argmin of C(q):      q_B = {t['argmin_c_q']:.1f}")
print(f"u-shape violations in C(q): {t['u_shape_violations']}")
