"""Find the risk slope that maximizes backtested P&L and compare with theory.

One predictor path and one mean-field path are reused for every candidate
slope, so the P&L curve is smooth enough for a grid search.

    python demos/slope_search.py
"""

from mftrade import MeanFieldParams, OuParams, SlopeSearchConfig, search_optimal_slope

ou = OuParams(epsilon=1e-3, psi=1e-3)
cfg = SlopeSearchConfig(horizon=1_000_000)

for ratio in (1.0, 5.0):
    mf = MeanFieldParams(jbar=ratio * ou.epsilon, sigma_mf=1.0)
    res = search_optimal_slope(ou, gamma=1.0, theta=5e-3, mf=mf, cfg=cfg)
    print(f"jbar/eps = {ratio:>4}:  s_hat = {res.s_hat:.3f}   s_theory = {res.s_theory:.3f}")
    for rnd, s, pnl in res.pnl_curve:
        if rnd == 0:
            print(f"    S = {s:.3f}  P&L = {pnl:10.2f}")
