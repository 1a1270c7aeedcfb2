"""Coupled N-asset simulation and the OU law of the aggregate position.

The aggregate ``R_t = sum_i beta_i pi_i / sqrt(N)`` of bang-bang positions
behaves, for large N, like

    dR = -2 jbar R dt + 2 Sigma sqrt(jbar) dW,    Sigma^2 = sum_i beta_i^2 M_i^2 / N

and conditionally on R each position is tilted towards sign(beta R).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import portfolio_chunk
from .errors import (
    DegenerateError,
    InputError,
    NonStationaryFitError,
    ParameterDomainError,
    StabilityError,
)
from .ou import MleFit, Path, _ar1_values, default_burn_in, fit_ou_mle, make_rng
from .threshold import AssetSpec, ThresholdPolicy
from .trading_rate import portfolio_rate

__all__ = [
    "ClampWarning",
    "PortfolioSpec",
    "MeanFieldParams",
    "SimulationReport",
    "conditional_position_prob",
    "mean_field_params",
    "simulate_mean_field_ou",
    "simulate_portfolio",
]


class ClampWarning(UserWarning):
    """A first-order probability left [0, 1] and was clipped."""


@dataclass(frozen=True)
class PortfolioSpec:
    assets: tuple[AssetSpec, ...]
    lambda_risk: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        if not self.assets:
            raise ParameterDomainError("a portfolio needs at least one asset", "assets")
        if not math.isfinite(self.lambda_risk):
            raise ParameterDomainError("lambda_risk must be finite", "lambda_risk")

    @property
    def n(self) -> int:
        return len(self.assets)

    @property
    def betas(self) -> np.ndarray:
        return np.array([a.beta for a in self.assets])

    @property
    def m_caps(self) -> np.ndarray:
        return np.array([a.m_cap for a in self.assets])

    @property
    def thetas(self) -> np.ndarray:
        """theta_i = lambda beta_i / sqrt(N)."""
        return self.lambda_risk * self.betas / math.sqrt(self.n)

    @property
    def sigma2(self) -> float:
        return float(np.sum((self.betas * self.m_caps) ** 2) / self.n)

    @property
    def r0(self) -> float:
        """Decoupled risk per asset, sum_i C_ii M_i^2 / N."""
        return float(sum(a.c_ii * a.m_cap**2 for a in self.assets) / self.n)

    @property
    def r_min(self) -> float:
        """Idiosyncratic floor sum_i sigma_i^2 M_i^2 / N."""
        return float(sum(a.sigma_idio**2 * a.m_cap**2 for a in self.assets) / self.n)


@dataclass(frozen=True)
class MeanFieldParams:
    jbar: float
    sigma_mf: float

    def __post_init__(self):
        if not (math.isfinite(self.jbar) and self.jbar > 0):
            raise ParameterDomainError(f"jbar must be > 0, got {self.jbar}", "jbar")
        if not (math.isfinite(self.sigma_mf) and self.sigma_mf > 0):
            raise ParameterDomainError(f"sigma_mf must be > 0, got {self.sigma_mf}", "sigma_mf")

    @property
    def kappa(self) -> float:
        return 2.0 * self.jbar

    @property
    def diffusion(self) -> float:
        return 2.0 * self.sigma_mf * math.sqrt(self.jbar)

    @property
    def stationary_variance(self) -> float:
        return self.sigma_mf**2


def conditional_position_prob(asset: AssetSpec, r, sigma_mf: float, n_assets: int):
    """(P(pi = +M | R = r), P(pi = -M | R = r)) at first order in 1/sqrt(N).

    Values outside [0, 1] are clipped with a ``ClampWarning``. ``r`` may be
    an array.
    """
    if not sigma_mf > 0:
        raise DegenerateError("sigma_mf = 0: the conditional law is undefined")
    if n_assets < 1:
        raise ParameterDomainError("n_assets must be >= 1", "n_assets")
    tilt = np.asarray(r, dtype=float) * asset.beta * asset.m_cap / (sigma_mf**2 * math.sqrt(n_assets))
    if np.any(np.abs(tilt) > 1.0):
        warnings.warn("conditional probability clipped to [0, 1]", ClampWarning, stacklevel=2)
        tilt = np.clip(tilt, -1.0, 1.0)
    p_plus = 0.5 * (1.0 + tilt)
    if p_plus.ndim == 0:
        p_plus = float(p_plus)
    return p_plus, 1.0 - p_plus


def mean_field_params(portfolio: PortfolioSpec, bands: Sequence[float]) -> MeanFieldParams:
    """jbar from the beta^2 M^2 weighted rates and Sigma from the portfolio."""
    jbar = portfolio_rate(portfolio.assets, bands)
    return MeanFieldParams(jbar=jbar, sigma_mf=math.sqrt(portfolio.sigma2))


def simulate_mean_field_ou(
    params: MeanFieldParams,
    horizon: int,
    seed: int | None,
    dt: float = 1.0,
    stream: tuple[int, ...] = (),
) -> Path:
    """Euler path of the mean-field OU with a stationary start.

    The per-step recursion is R' = (1 - 2 jbar dt) R + 2 Sigma sqrt(jbar dt) xi;
    its exact stationary variance is Sigma^2 / (1 - jbar dt).
    """
    horizon = int(horizon)
    if horizon < 2:
        raise ParameterDomainError(f"horizon must be >= 2, got {horizon}", "horizon")
    if not dt > 0:
        raise ParameterDomainError(f"dt must be > 0, got {dt}", "dt")
    kappa_dt = 2.0 * params.jbar * dt
    if kappa_dt >= 1.0:
        raise StabilityError(f"2 jbar dt = {kappa_dt:.3g} >= 1; reduce dt", "dt")
    noise = params.diffusion * math.sqrt(dt)
    values = _ar1_values(make_rng(seed, *stream), kappa_dt, noise, horizon)
    return Path(values, dt=dt, seed=seed)


class InsufficientBinsError(InputError):
    """Too few populated bins for a conditional regression."""


@dataclass
class SimulationReport:
    """Statistics of one coupled run, all taken after burn-in.

    ``pnl`` is the aggregate risk-adjusted P&L sum_t [(p - theta R) pi - Gamma |dpi|];
    ``realized_risk`` equals ``risk_idio + risk_factor`` where ``risk_factor``
    is the time average of R^2. ``pos_r`` holds E[pi_i R] and ``pos_r_excl``
    the same with asset i's own contribution removed from R.
    """

    r_path: Path
    flips: np.ndarray
    plus_fraction: np.ndarray
    pnl: float
    pnl_per_asset: np.ndarray
    pnl_raw: np.ndarray
    costs: np.ndarray
    realized_risk: float
    risk_idio: float
    risk_factor: float
    pos_r: np.ndarray
    pos_r_excl: np.ndarray
    bin_edges: np.ndarray
    bin_steps: np.ndarray
    bin_r_mean: np.ndarray
    bin_plus: np.ndarray
    mle: MleFit | None
    n_steps: int
    burn_in: int
    master_seed: int
    flags: list[str] = field(default_factory=list)

    @property
    def flip_rate(self) -> np.ndarray:
        return self.flips / self.n_steps

    def conditional_mean_slope(self, assets: Sequence[int] | None = None, min_count: int = 1000):
        """Weighted regression of E[pi_i / M_i | R in bin] on the bin mean of R.

        Returns ``(slope, stderr)`` pooled over ``assets`` (all by default).
        The first-order prediction is beta M / (Sigma^2 sqrt(N)); the slope of
        P(pi = +M | R) itself is half of it.
        """
        idx = np.arange(self.bin_plus.shape[0]) if assets is None else np.asarray(assets)
        use = self.bin_steps >= min_count
        if use.sum() < 3:
            raise InsufficientBinsError("fewer than 3 populated R bins")
        steps = self.bin_steps[use].astype(float)
        x = self.bin_r_mean[use]
        frac = self.bin_plus[np.ix_(idx, np.flatnonzero(use))].mean(axis=0) / steps
        y = 2.0 * frac - 1.0
        w = steps
        xm = np.average(x, weights=w)
        ym = np.average(y, weights=w)
        sxx = np.sum(w * (x - xm) ** 2)
        b = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
        resid = y - ym - b * (x - xm)
        dof = max(x.size - 2, 1)
        se = float(math.sqrt(np.sum(w * resid**2) / dof / sxx))
        return b, se

    def to_record(self) -> dict:
        rec = {
            "n_assets": int(self.flips.size),
            "n_steps": self.n_steps,
            "burn_in": self.burn_in,
            "master_seed": self.master_seed,
            "pnl": self.pnl,
            "realized_risk": self.realized_risk,
            "risk_idio": self.risk_idio,
            "risk_factor": self.risk_factor,
            "r_variance": float(np.var(self.r_path.values)),
            "flips": self.flips.tolist(),
            "flip_rate_mean": float(self.flip_rate.mean()),
            "plus_fraction_mean": float(self.plus_fraction.mean()),
            "pos_r_mean": float(self.pos_r.mean()),
            "pos_r_excl_mean": float(self.pos_r_excl.mean()),
            "costs_total": float(self.costs.sum()),
            "flags": list(self.flags),
        }
        if self.mle is not None:
            rec["mle"] = {
                "kappa_hat": self.mle.kappa_hat,
                "diffusion_hat": self.mle.diffusion_hat,
                "stderr_kappa": self.mle.stderr_kappa,
                "stderr_diffusion": self.mle.stderr_diffusion,
                "n_obs": self.mle.n_obs,
            }
        else:
            rec["mle"] = None
        try:
            slope, se = self.conditional_mean_slope()
            rec["conditional_mean_slope"] = slope
            rec["conditional_mean_slope_stderr"] = se
        except InsufficientBinsError:
            rec["conditional_mean_slope"] = None
        return rec


def simulate_portfolio(
    portfolio: PortfolioSpec,
    policies: Sequence[ThresholdPolicy],
    horizon: int,
    burn_in: int | None = None,
    n_bins: int = 40,
    chunk: int = 1 << 16,
    bridge: bool = True,
) -> SimulationReport:
    """Run every asset's band rule against the lagged aggregate position.

    At step t each predictor advances by its own AR(1) increment, each asset
    compares it with q_+/-(R_{t-1}), and R_t is rebuilt from the new
    positions. Asset i draws from ``make_rng(master_seed, i)`` (start value
    first, then increments), so its predictor path is the one returned by
    ``simulate_ar1(asset.ou, horizon, master_seed, stream=(i,))``.

    Parameters
    ----------
    horizon : int
        Total steps including burn-in; ``horizon - burn_in`` are recorded.
    burn_in : int, optional
        Defaults to ceil(10 / min epsilon_i).
    n_bins : int
        Bins of R over [-4 Sigma, 4 Sigma] for the conditional table; the end
        bins absorb the tails.
    bridge : bool
        Also flip on Brownian-bridge barrier touches between samples, drawn
        from the separate stream ``make_rng(master_seed, i, 1)``. This makes
        the unit-step simulation trade at the continuous-time rate.
    """
    n = portfolio.n
    if len(policies) != n:
        raise InputError(f"{len(policies)} policies for {n} assets")
    if burn_in is None:
        burn_in = default_burn_in(min(a.ou.epsilon for a in portfolio.assets))
    horizon = int(horizon)
    if burn_in < 0 or horizon < burn_in + 1000:
        raise ParameterDomainError(
            f"horizon ({horizon}) must be >= burn_in ({burn_in}) + 1000", "horizon"
        )

    eps = np.array([a.ou.epsilon for a in portfolio.assets])
    psi = np.array([a.ou.psi for a in portfolio.assets])
    m = portfolio.m_caps
    beta_eff = portfolio.betas * m
    thetas = np.array([pol.theta for pol in policies], dtype=float)
    q1 = np.array([pol.q1 for pol in policies], dtype=float)
    shift = np.array([pol.slope * pol.theta for pol in policies], dtype=float)
    sqrt_n = math.sqrt(n)
    sigma = math.sqrt(portfolio.sigma2)

    rngs = [make_rng(portfolio.master_seed, i) for i in range(n)]
    touch_rngs = [make_rng(portfolio.master_seed, i, 1) for i in range(n)]
    bridge_k = 2.0 / psi**2 if bridge else np.zeros(n)
    var0 = psi**2 / (2.0 * eps - eps**2)
    p = np.array([rng.standard_normal() for rng in rngs]) * np.sqrt(var0)
    pos = np.where(p >= 0.0, 1.0, -1.0)
    r_prev = float(np.dot(beta_eff, pos) / sqrt_n)

    half = 4.0 * sigma if sigma > 0 else 1.0
    bin_width = 2.0 * half / n_bins
    phi = 1.0 - eps
    pnl = np.zeros(n)
    pnl_raw = np.zeros(n)
    flips = np.zeros(n, dtype=np.int64)
    plus = np.zeros(n, dtype=np.int64)
    pos_r = np.zeros(n)
    bin_steps = np.zeros(n_bins, dtype=np.int64)
    bin_rsum = np.zeros(n_bins)
    bin_plus = np.zeros((n, n_bins), dtype=np.int64)
    r_all = np.empty(horizon)
    r_all[0] = r_prev
    first = max(burn_in, 1)

    done = 0
    n_incr = horizon - 1
    while done < n_incr:
        c = min(chunk, n_incr - done)
        noise = np.empty((c, n))
        unif = np.empty((c, n))
        for i, rng in enumerate(rngs):
            noise[:, i] = psi[i] * rng.standard_normal(c)
            if bridge:
                unif[:, i] = touch_rngs[i].random(c)
        steps = np.arange(done + 1, done + c + 1)
        record = steps >= first
        r_prev = portfolio_chunk(
            p, pos, noise, unif, bridge_k, phi, q1, shift, beta_eff, thetas, sqrt_n, r_prev, record,
            r_all[done + 1 : done + c + 1], -half, bin_width, n_bins,
            pnl, pnl_raw, flips, plus, pos_r, bin_steps, bin_rsum, bin_plus,
        )
        done += c

    n_rec = horizon - first
    costs = 2.0 * np.array([a.gamma for a in portfolio.assets]) * m * flips
    pnl_assets = pnl * m - costs
    r_vals = r_all[burn_in:]
    risk_factor = float(np.mean(r_vals**2))
    pos_r_mean = pos_r * m / n_rec
    pos_r_excl = pos_r_mean - beta_eff * m / sqrt_n

    flags: list[str] = []
    try:
        mle = fit_ou_mle(Path(r_vals))
    except NonStationaryFitError:
        mle = None
        flags.append("degenerate_r_path")
    with np.errstate(invalid="ignore", divide="ignore"):
        r_mean = np.where(bin_steps > 0, bin_rsum / np.maximum(bin_steps, 1), np.nan)
    return SimulationReport(
        r_path=Path(r_vals, seed=portfolio.master_seed),
        flips=flips,
        plus_fraction=plus / n_rec,
        pnl=float(pnl_assets.sum()),
        pnl_per_asset=pnl_assets,
        pnl_raw=pnl_raw * m,
        costs=costs,
        realized_risk=portfolio.r_min + risk_factor,
        risk_idio=portfolio.r_min,
        risk_factor=risk_factor,
        pos_r=pos_r_mean,
        pos_r_excl=pos_r_excl,
        bin_edges=np.linspace(-half, half, n_bins + 1),
        bin_steps=bin_steps,
        bin_r_mean=r_mean,
        bin_plus=bin_plus,
        mle=mle,
        n_steps=n_rec,
        burn_in=burn_in,
        master_seed=portfolio.master_seed,
        flags=flags,
    )
