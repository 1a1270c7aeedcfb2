"""A 100-asset portfolio whose aggregate position behaves like an OU process.

Runs the coupled simulation with and without risk aversion and compares the
aggregate position's fitted mean reversion and second moment with theory.
Takes about half a minute per run on one core.

    python demos/mean_field_portfolio.py
"""

import numpy as np

from mftrade import (
    AssetSpec,
    OuParams,
    PortfolioSpec,
    ThresholdPolicy,
    base_threshold,
    portfolio_inputs,
    rate_exact,
    realized_risk,
    simulate_portfolio,
    slope,
)

ou = OuParams(epsilon=1e-3, psi=1e-3)
gamma, n, horizon = 1.0, 100, 1_000_000
asset = AssetSpec(ou=ou, gamma=gamma)
q = base_threshold(ou, gamma)
jbar = rate_exact(ou, q).j

for lam in (0.0, 0.01):
    pf = PortfolioSpec((asset,) * n, lam, master_seed=7)
    theta = float(pf.thetas[0])
    pol = ThresholdPolicy(q1=q, slope=slope(ou, gamma, jbar), theta=theta)
    rep = simulate_portfolio(pf, [pol] * n, horizon)
    r = rep.r_path.values
    theory = realized_risk(pf, *portfolio_inputs(pf)[:2])
    print(f"lambda = {lam}")
    print(f"  flip rate      {rep.flip_rate.mean():.4e}  (J = {jbar:.4e})")
    print(f"  kappa_hat      {rep.mle.kappa_hat:.4e}  (2J = {2 * jbar:.4e})")
    print(f"  E[R^2]         {np.mean(r**2):.4f}  (theory {theory.er2:.4f})")
    print(f"  P&L per asset  {rep.pnl / n:.4g}")
