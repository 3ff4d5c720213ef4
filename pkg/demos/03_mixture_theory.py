"""The mixture curve C(q) and the scaling law, on constructed Hessians.

Everything here is synthetic and instant: it exercises the two evaluation
routes for C(q) (the trace formula and the diagonalized rational form),
their agreement when the Hessians commute, and the log-log fit used for
the sample-count scaling law.

Run:  python demos/03_mixture_theory.py
"""

import numpy as np

from beammix import (
    c_of_q_direct,
    c_of_q_rational,
    diagonalize_pair,
    fit_scaling_law,
    lambda_matrix,
    sweep_q,
    u_shape_violations,
)

rng = np.random.default_rng(0)
d = 32

# two "dataset Hessians" sharing an eigenbasis: one strong where the other
# is weak. The combined spectrum must stay non-degenerate, otherwise the
# test-mixture eigenbasis is ambiguous and the rational form loses meaning.
basis, _ = np.linalg.qr(rng.normal(size=(d, d)))
spec_a = np.geomspace(4.0, 0.2, d)
spec_b = np.geomspace(0.25, 3.6, d)
sigma_a = basis @ np.diag(spec_a) @ basis.T
sigma_b = basis @ np.diag(spec_b) @ basis.T
sigma_star = 0.5 * (sigma_a + sigma_b)  # balanced test mixture

print("=== C(q) over the proportion grid ===")
curve = sweep_q(sigma_star, [sigma_a, sigma_b], grid_step=0.1)
pair = diagonalize_pair(sigma_star, [sigma_a, sigma_b])
lam = lambda_matrix(pair.d_star, pair.d_k)
print(f"{'q_B':>5} {'C direct':>10} {'C rational':>11}")
for qv, c in zip(curve.q_grid, curve.c_values):
    c_rat = c_of_q_rational(lam, qv)
    print(f"{qv[1]:>5.2f} {c:>10.3f} {c_rat:>11.3f}")
argmin, violations = u_shape_violations(curve.c_values)
print(f"argmin at q_B = {curve.q_grid[argmin][1]:.1f}; u-shape violations: {violations}")
print("(commuting Hessians: the two routes agree; complementary spectra")
print(" pull the best mixture toward the middle)")

print("\n=== sensitivity to the test mixture ===")
for w in (0.25, 0.5, 0.75):
    star = (1 - w) * sigma_a + w * sigma_b
    curve = sweep_q(star, [sigma_a, sigma_b], grid_step=0.05)
    best = curve.argmin_q[1]
    print(f"test mixture {w:.2f} of B -> best training proportion q_B = {best:.2f}")

print("\n=== scaling law fit on planted data ===")
n = np.array([100, 316, 1000, 3162, 10000])
planted = 4.0 * n**-0.5
fit = fit_scaling_law(n, planted)
print(f"planted L(n) = 4 n^-0.5 -> alpha = {fit.alpha:.6f}, "
      f"intercept = {fit.intercept:.6f} (ln 4 = {np.log(4):.6f}), R^2 = {fit.r_squared:.6f}")

noisy = planted * np.exp(0.05 * rng.normal(size=n.size))
fit2 = fit_scaling_law(n, noisy)
print(f"with 5% noise              -> alpha = {fit2.alpha:.4f}, R^2 = {fit2.r_squared:.4f}")
