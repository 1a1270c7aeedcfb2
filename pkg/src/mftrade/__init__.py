"""Mean-field optimal multi-asset trading with linear transaction costs.

Closed-form no-trade bands, the exact stationary trading rate, the OU law of
the aggregate position, an empirical slope search and risk calibration, each
paired with a Monte Carlo check.
"""

__version__ = "0.1.0"

from .errors import (
    BoundaryHitError,
    ConfigError,
    DegenerateError,
    InputError,
    InsufficientHorizonError,
    MFTradeError,
    NonStationaryFitError,
    NumericalFailureError,
    OutOfRegimeError,
    ParameterDomainError,
    StabilityError,
    UnphysicalCalibrationError,
    UnreachableTargetError,
)
from .ou import MleFit, OuParams, Path, fit_ou_mle, make_rng, simulate_ar1, stationary_std
from .threshold import (
    AppendixCoeffs,
    AssetSpec,
    Regime,
    ThresholdPolicy,
    appendix_coefficients,
    base_threshold,
    classify_regime,
    corrected_threshold,
    policy_for_asset,
    slope,
    symmetric_policy,
)
from .trading_rate import (
    RateResult,
    portfolio_rate,
    rate_exact,
    rate_large_band,
    rate_monte_carlo,
    rate_small_band,
    stationary_density,
)
from .mean_field import (
    MeanFieldParams,
    PortfolioSpec,
    SimulationReport,
    conditional_position_prob,
    mean_field_params,
    simulate_mean_field_ou,
    simulate_portfolio,
)
from .slope_optimizer import SlopeSearchConfig, SlopeSearchResult, backtest_pnl, search_optimal_slope, slope_sweep
from .risk_calibration import (
    RiskReport,
    controlled_density_at_threshold,
    lambda_for_target_risk,
    portfolio_inputs,
    position_mf_covariance,
    predictor_density_at_threshold,
    realized_risk,
    stationary_r_variance,
    xi_squared,
)

__all__ = [
    "__version__",
    "BoundaryHitError",
    "ConfigError",
    "DegenerateError",
    "InputError",
    "InsufficientHorizonError",
    "MFTradeError",
    "NonStationaryFitError",
    "NumericalFailureError",
    "OutOfRegimeError",
    "ParameterDomainError",
    "StabilityError",
    "UnphysicalCalibrationError",
    "UnreachableTargetError",
    "AppendixCoeffs",
    "AssetSpec",
    "Regime",
    "ThresholdPolicy",
    "appendix_coefficients",
    "base_threshold",
    "classify_regime",
    "corrected_threshold",
    "policy_for_asset",
    "slope",
    "symmetric_policy",
    "RateResult",
    "portfolio_rate",
    "rate_exact",
    "rate_large_band",
    "rate_monte_carlo",
    "rate_small_band",
    "stationary_density",
    "MeanFieldParams",
    "PortfolioSpec",
    "SimulationReport",
    "conditional_position_prob",
    "mean_field_params",
    "simulate_mean_field_ou",
    "simulate_portfolio",
    "RiskReport",
    "controlled_density_at_threshold",
    "lambda_for_target_risk",
    "portfolio_inputs",
    "position_mf_covariance",
    "predictor_density_at_threshold",
    "realized_risk",
    "stationary_r_variance",
    "xi_squared",
    "MleFit",
    "OuParams",
    "Path",
    "fit_ou_mle",
    "make_rng",
    "simulate_ar1",
    "stationary_std",
    "SlopeSearchConfig",
    "SlopeSearchResult",
    "backtest_pnl",
    "search_optimal_slope",
    "slope_sweep",
]
