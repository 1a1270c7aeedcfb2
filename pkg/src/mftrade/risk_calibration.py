"""Map risk aversion lambda to realized risk and back.

With Xi^2 = 2 sum_i M_i beta_i^2 S_i rho_i / N the aggregate position obeys
E[R^2] = Sigma^2 / (1 + lambda Xi^2), and the realized risk per asset is

    R(lambda) = R_min + Sigma^2 / (1 + lambda Xi^2) = R_0 - lambda Sigma^2 Xi^2 / (1 + lambda Xi^2).

rho_i is the predictor density at the threshold q*_i. Two readings are
provided: the uncontrolled Gaussian density of the predictor, and its
stationary density conditional on the held position. At the band edge the
second is exactly twice the first for any band width. The controlled reading
is the default because it is the one the coupled simulation reproduces.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, ParameterDomainError, UnphysicalCalibrationError, UnreachableTargetError
from .mean_field import PortfolioSpec
from .ou import OuParams
from .threshold import AssetSpec, base_threshold, slope
from .trading_rate import portfolio_rate, stationary_density

__all__ = [
    "RiskReport",
    "ValidityWarning",
    "predictor_density_at_threshold",
    "controlled_density_at_threshold",
    "portfolio_inputs",
    "xi_squared",
    "stationary_r_variance",
    "realized_risk",
    "lambda_for_target_risk",
    "position_mf_covariance",
    "validity_margin",
]

VALIDITY_MIN = 10.0


class ValidityWarning(UserWarning):
    """lambda is not small against (p*_i / (beta_i Sigma)) sqrt(N)."""


@dataclass(frozen=True)
class RiskReport:
    r0: float
    r_min: float
    sigma2: float
    xi2: float
    er2: float
    realized: float
    lambda_risk: float
    validity_margin: float

    def to_record(self) -> dict:
        return asdict(self)


def predictor_density_at_threshold(ou: OuParams, q: float) -> float:
    """Gaussian density of the free predictor, variance psi^2 / (2 epsilon), at q."""
    var = ou.psi**2 / (2.0 * ou.epsilon)
    return math.exp(-0.5 * q * q / var) / math.sqrt(2.0 * math.pi * var)


def controlled_density_at_threshold(ou: OuParams, q: float) -> float:
    """Density of the predictor at q given the position it has just flipped to."""
    return float(stationary_density(ou, q, q))


_DENSITIES = {
    "controlled": controlled_density_at_threshold,
    "gaussian": predictor_density_at_threshold,
}


def portfolio_inputs(portfolio: PortfolioSpec, density: str = "controlled"):
    """Per-asset (slopes, rhos) and jbar evaluated at each asset's q*.

    Returns ``(slopes, rhos, jbar)``. ``density`` is "controlled" or
    "gaussian".
    """
    try:
        rho_fn = _DENSITIES[density]
    except KeyError:
        raise InputError(f"unknown density {density!r}; use one of {sorted(_DENSITIES)}") from None
    bands = [base_threshold(a.ou, a.gamma) for a in portfolio.assets]
    jbar = portfolio_rate(portfolio.assets, bands)
    cache: dict = {}
    slopes, rhos = [], []
    for a, q in zip(portfolio.assets, bands):
        key = (a.ou, a.gamma)
        if key not in cache:
            cache[key] = (slope(a.ou, a.gamma, jbar), rho_fn(a.ou, q))
        s, r = cache[key]
        slopes.append(s)
        rhos.append(r)
    return np.array(slopes), np.array(rhos), jbar


def _check_lengths(portfolio, *arrays):
    for arr in arrays:
        if len(arr) != portfolio.n:
            raise InputError(f"expected {portfolio.n} per-asset values, got {len(arr)}")


def xi_squared(portfolio: PortfolioSpec, slopes: Sequence[float], rhos: Sequence[float]) -> float:
    _check_lengths(portfolio, slopes, rhos)
    w = portfolio.m_caps * portfolio.betas**2
    return float(2.0 * np.dot(w, np.asarray(slopes) * np.asarray(rhos)) / portfolio.n)


def stationary_r_variance(sigma2: float, lambda_risk: float, xi2: float) -> float:
    """Sigma^2 / (1 + lambda Xi^2)."""
    denom = 1.0 + lambda_risk * xi2
    if not denom > 0:
        raise UnphysicalCalibrationError(
            f"1 + lambda Xi^2 = {denom:.4g} <= 0: lambda must exceed -1/Xi^2", "lambda_risk"
        )
    return sigma2 / denom


def validity_margin(portfolio: PortfolioSpec, lambda_risk: float | None = None) -> float:
    """min_i (p*_i / (|beta_i| Sigma)) sqrt(N) / |lambda|; infinite when lambda = 0."""
    lam = portfolio.lambda_risk if lambda_risk is None else lambda_risk
    sigma = math.sqrt(portfolio.sigma2)
    if lam == 0 or sigma == 0:
        return math.inf
    ratios = [
        a.ou.p_star / (abs(a.beta) * sigma) for a in portfolio.assets if a.beta != 0
    ]
    if not ratios:
        return math.inf
    return min(ratios) * math.sqrt(portfolio.n) / abs(lam)


def _warn_validity(margin: float, lam: float) -> None:
    if margin < VALIDITY_MIN:
        warnings.warn(
            f"validity margin {margin:.3g} < {VALIDITY_MIN:g}: lambda={lam:g} is outside the small-coupling regime",
            ValidityWarning,
            stacklevel=3,
        )


def realized_risk(
    portfolio: PortfolioSpec,
    slopes: Sequence[float],
    rhos: Sequence[float],
    lambda_risk: float | None = None,
) -> RiskReport:
    """Realized risk per asset for ``lambda_risk`` (the portfolio's by default)."""
    lam = portfolio.lambda_risk if lambda_risk is None else float(lambda_risk)
    xi2 = xi_squared(portfolio, slopes, rhos)
    sigma2 = portfolio.sigma2
    er2 = stationary_r_variance(sigma2, lam, xi2)
    if lam < 0:
        warnings.warn(f"negative risk aversion lambda={lam:g}: risk above R_0", stacklevel=2)
    margin = validity_margin(portfolio, lam)
    _warn_validity(margin, lam)
    r_min = portfolio.r_min
    return RiskReport(
        r0=portfolio.r0,
        r_min=r_min,
        sigma2=sigma2,
        xi2=xi2,
        er2=er2,
        realized=r_min + er2,
        lambda_risk=lam,
        validity_margin=margin,
    )


def lambda_for_target_risk(
    portfolio: PortfolioSpec, slopes: Sequence[float], rhos: Sequence[float], target: float
) -> float:
    """lambda = (Sigma^2 / (target - R_min) - 1) / Xi^2."""
    r_min = portfolio.r_min
    if not target > r_min:
        raise UnreachableTargetError(
            f"target {target:.6g} <= minimum achievable risk {r_min:.6g}", "target"
        )
    xi2 = xi_squared(portfolio, slopes, rhos)
    sigma2 = portfolio.sigma2
    excess = sigma2 / (target - r_min)
    if xi2 == 0:
        if math.isclose(excess, 1.0, rel_tol=1e-12):
            return 0.0
        raise UnreachableTargetError("Xi^2 = 0: realized risk does not depend on lambda", "target")
    lam = (excess - 1.0) / xi2
    if lam < 0:
        warnings.warn(f"target above R_0 needs negative lambda={lam:g}", stacklevel=2)
    _warn_validity(validity_margin(portfolio, lam), lam)
    return lam


def position_mf_covariance(
    asset: AssetSpec, theta: float, rho: float, slope_value: float, er2: float
) -> float:
    """E[pi R] ~ -2 M S theta rho E[R^2] at first order in theta."""
    if er2 < 0:
        raise ParameterDomainError("er2 must be >= 0", "er2")
    return -2.0 * asset.m_cap * slope_value * theta * rho * er2
