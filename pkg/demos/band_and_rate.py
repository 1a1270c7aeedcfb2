"""No-trade band and trading rate for a single asset.

Prints the band half-width, its correction, and the flip rate from the
exact formula, both asymptotes and a short Monte Carlo run across band
widths.

    python demos/band_and_rate.py
"""

from mftrade import (
    OuParams,
    base_threshold,
    corrected_threshold,
    rate_exact,
    rate_large_band,
    rate_monte_carlo,
    rate_small_band,
)

ou = OuParams(epsilon=1e-3, psi=1e-3)
gamma = 1.0

q_star = base_threshold(ou, gamma)
q1 = corrected_threshold(ou, gamma)
print(f"p* = {ou.p_star:.4g}   q* = {q_star:.6g}   q1 = {q1:.6g}   (q*/p*)^2 = {(q_star / ou.p_star) ** 2:.4f}")
print()
print(f"{'q_hat':>6} {'exact':>11} {'small':>11} {'large':>11} {'mc':>11} {'z':>6}")
for k, q_hat in enumerate((0.05, 0.2, 0.362, 1.0, 2.0, 3.0)):
    q = q_hat * ou.p_star
    exact = rate_exact(ou, q).j
    small = f"{rate_small_band(ou, q).j:11.4e}" if q_hat < 1 else f"{'':>11}"
    large = f"{rate_large_band(ou, q).j:11.4e}" if q_hat > 1 else f"{'':>11}"
    mc = rate_monte_carlo(ou, q, 500_000, seed=k, repetitions=4)
    z = (mc.j - exact) / mc.stderr
    print(f"{q_hat:6.3f} {exact:11.4e} {small} {large} {mc.j:11.4e} {z:6.2f}")
