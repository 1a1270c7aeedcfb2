"""Empirical search for the risk slope S by grid refinement on backtested P&L.

One predictor path and one mean-field path are drawn once and reused for
every candidate S (common random numbers), so differences between grid
points reflect the policy only.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import BoundaryHitError, InputError, ParameterDomainError
from .mean_field import MeanFieldParams, simulate_mean_field_ou
from .ou import OuParams, Path, simulate_ar1
from .threshold import ThresholdPolicy, corrected_threshold, slope
from .trading_rate import hysteresis_positions

__all__ = [
    "SlopeSearchConfig",
    "SlopeSearchResult",
    "backtest_pnl",
    "search_optimal_slope",
    "slope_sweep",
]


@dataclass(frozen=True)
class SlopeSearchConfig:
    """Grid refinement settings.

    ``initial_range`` is given in units of the theoretical slope; the
    default (0, 2) brackets it symmetrically. Each round keeps the argmax
    and shrinks the half-width by ``(grid_points - 1) / 2``.
    """

    grid_points: int = 11
    rounds: int = 3
    initial_range: tuple[float, float] = (0.0, 2.0)
    horizon: int = 2_500_000
    seed_p: int = 0
    seed_r: int = 1
    repetitions: int = 1

    def __post_init__(self):
        object.__setattr__(self, "initial_range", tuple(float(v) for v in self.initial_range))
        if self.grid_points < 3:
            raise ParameterDomainError("grid_points must be >= 3", "grid_points")
        if self.rounds < 1:
            raise ParameterDomainError("rounds must be >= 1", "rounds")
        lo, hi = self.initial_range
        if not (0.0 <= lo < hi):
            raise ParameterDomainError(f"need 0 <= S_lo < S_hi, got {self.initial_range}", "initial_range")
        if self.horizon < 100_000:
            raise ParameterDomainError("horizon must be >= 1e5", "horizon")
        if self.repetitions < 1:
            raise ParameterDomainError("repetitions must be >= 1", "repetitions")


@dataclass
class SlopeSearchResult:
    s_hat: float
    pnl_curve: list[tuple[int, float, float]]
    s_theory: float
    flags: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "s_hat": self.s_hat,
            "s_theory": self.s_theory,
            "relative_error": (self.s_hat - self.s_theory) / self.s_theory,
            "flags": list(self.flags),
            "metadata": dict(self.metadata),
        }


def backtest_pnl(p_path: Path, r_path: Path, policy: ThresholdPolicy, gamma: float) -> float:
    """Risk-adjusted P&L of the band rule on fixed paths.

    The position at t is set from p_t against the band centred on
    slope * theta * R_{t-1} (R_0 at t = 0) and earns (p_t - theta R_t) pi_t;
    every change costs gamma |pi_t - pi_{t-1}|. Before the first touch the
    position is the sign of p_0 relative to the first band centre.
    """
    p = p_path.values
    r = r_path.values
    if p.size != r.size:
        raise InputError(f"path lengths differ: {p.size} vs {r.size}")
    if gamma < 0:
        raise ParameterDomainError(f"gamma must be >= 0, got {gamma}", "gamma")
    shift = policy.slope * policy.theta
    if shift != 0.0:
        centre = np.empty_like(r)
        centre[0] = shift * r[0]
        centre[1:] = shift * r[:-1]
        dev = p - centre
    else:
        dev = p
    up = dev >= policy.q1
    down = dev <= -policy.q1
    pos = hysteresis_positions(up, down, 1 if dev[0] >= 0 else -1)
    n_changes = int(np.count_nonzero(pos[1:] != pos[:-1]))
    gain = float(np.dot(p - policy.theta * r, pos))
    return policy.m_cap * (gain - 2.0 * gamma * n_changes)


def _paths(ou, mf, cfg):
    out = []
    for rep in range(cfg.repetitions):
        stream = () if rep == 0 else (rep,)
        p = simulate_ar1(ou, cfg.horizon, cfg.seed_p, stream=stream)
        r = simulate_mean_field_ou(mf, cfg.horizon, cfg.seed_r, stream=stream)
        out.append((p, r))
    return out


def search_optimal_slope(
    ou: OuParams,
    gamma: float,
    theta: float,
    mf: MeanFieldParams,
    cfg: SlopeSearchConfig = SlopeSearchConfig(),
    m_cap: float = 1.0,
) -> SlopeSearchResult:
    """Grid-refinement maximization of backtested P&L over the slope S.

    q1 is held at the corrected threshold; only S varies. Rounds re-centre a
    grid of ``grid_points`` on the previous argmax with half-width equal to
    the previous spacing, shifted if needed so it stays inside the previous
    range.

    Raises
    ------
    BoundaryHitError
        The final round's argmax sits on an end point of its grid. The
        partial result is attached as ``err.result``.
    """
    s_theory = slope(ou, gamma, mf.jbar)
    q1 = corrected_threshold(ou, gamma)
    coupling = (theta * mf.sigma_mf / ou.p_star) ** 2
    if coupling > 0.1:
        warnings.warn(
            f"(theta Sigma / p*)^2 = {coupling:.3g} > 0.1: first-order theory is loose",
            stacklevel=2,
        )
    paths = _paths(ou, mf, cfg)

    def total_pnl(s):
        pol = ThresholdPolicy(q1=q1, slope=float(s), theta=theta, m_cap=m_cap)
        return sum(backtest_pnl(p, r, pol, gamma) for p, r in paths)

    k = cfg.grid_points
    lo, hi = (v * s_theory for v in cfg.initial_range)
    curve: list[tuple[int, float, float]] = []
    ranges = []
    flags: list[str] = []
    s_hat = 0.5 * (lo + hi)
    edge = False
    for rnd in range(cfg.rounds):
        ranges.append((lo, hi))
        grid = np.linspace(lo, hi, k)
        vals = np.array([total_pnl(s) for s in grid])
        curve.extend((rnd, float(s), float(v)) for s, v in zip(grid, vals))
        if np.ptp(vals) <= 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
            flags.append("flat_curve")
            break
        j = int(np.argmax(vals))
        s_hat = float(grid[j])
        edge = j in (0, k - 1)
        h = grid[1] - grid[0]
        new_lo, new_hi = s_hat - h, s_hat + h
        if new_lo < lo:
            new_lo, new_hi = lo, lo + 2 * h
        elif new_hi > hi:
            new_lo, new_hi = hi - 2 * h, hi
        lo, hi = new_lo, new_hi

    metadata = {
        "q1": q1,
        "theta": theta,
        "jbar": mf.jbar,
        "sigma_mf": mf.sigma_mf,
        "jbar_over_eps": mf.jbar / ou.epsilon,
        "initial_range_abs": [cfg.initial_range[0] * s_theory, cfg.initial_range[1] * s_theory],
        "round_ranges": [list(r) for r in ranges],
        "paths_persist_across_rounds": True,
        "config": asdict(cfg),
    }
    result = SlopeSearchResult(s_hat=s_hat, pnl_curve=curve, s_theory=s_theory, flags=flags, metadata=metadata)
    if edge and "flat_curve" not in flags:
        result.flags.append("boundary_hit")
        raise BoundaryHitError(
            f"optimum S={s_hat:.4g} on the edge of the final grid; widen initial_range", result
        )
    return result


def slope_sweep(
    ou: OuParams,
    gamma: float,
    theta: float,
    jbar_over_eps: Sequence[float] = (1.0, 2.0, 5.0, 10.0),
    cfg: SlopeSearchConfig = SlopeSearchConfig(),
    sigma_mf: float = 1.0,
    seed_pairs: Sequence[tuple[int, int]] | None = None,
) -> list[dict]:
    """Optimal S against jbar / epsilon, one row per ratio.

    With several ``seed_pairs`` the row reports the median s_hat and keeps
    the individual estimates under ``s_hat_runs``. A boundary hit records
    the edge value and a flag instead of aborting the sweep.
    """
    if seed_pairs is None:
        seed_pairs = [(cfg.seed_p, cfg.seed_r)]
    rows = []
    for ratio in jbar_over_eps:
        mf = MeanFieldParams(jbar=ratio * ou.epsilon, sigma_mf=sigma_mf)
        runs, flags = [], []
        for sp, sr in seed_pairs:
            run_cfg = SlopeSearchConfig(**{**asdict(cfg), "seed_p": sp, "seed_r": sr})
            try:
                res = search_optimal_slope(ou, gamma, theta, mf, run_cfg)
            except BoundaryHitError as err:
                res = err.result
            runs.append(res.s_hat)
            flags.extend(f for f in res.flags if f not in flags)
        rows.append(
            {
                "jbar_over_eps": float(ratio),
                "s_hat": float(np.median(runs)),
                "s_theory": slope(ou, gamma, mf.jbar),
                "s_hat_runs": [float(v) for v in runs],
                "flags": flags,
            }
        )
    return rows
