"""No-trade thresholds for a bang-bang trader with linear costs.

Notation used throughout: ``q_star = (1.5 * gamma * psi**2) ** (1/3)`` is the
risk-free band half-width, ``x = a * q_star**2`` the squared band ratio
(q_star / p_star)^2 and ``y = b * q_star**2 = (jbar / epsilon) * x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateError, OutOfRegimeError, ParameterDomainError
from .ou import OuParams

__all__ = [
    "AssetSpec",
    "Regime",
    "ThresholdPolicy",
    "AppendixCoeffs",
    "regime_ratios",
    "classify_regime",
    "base_threshold",
    "corrected_threshold",
    "slope",
    "symmetric_policy",
    "policy_for_asset",
    "appendix_coefficients",
    "solve_threshold_equation",
    "threshold_record",
]

DEFAULT_SEPARATION = 10.0


@dataclass(frozen=True)
class AssetSpec:
    ou: OuParams
    gamma: float
    m_cap: float = 1.0
    beta: float = 1.0
    sigma_idio: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ParameterDomainError(f"gamma must be >= 0, got {self.gamma}", "gamma")
        if not (math.isfinite(self.m_cap) and self.m_cap > 0):
            raise ParameterDomainError(f"m_cap must be > 0, got {self.m_cap}", "m_cap")
        if not (math.isfinite(self.sigma_idio) and self.sigma_idio >= 0):
            raise ParameterDomainError(
                f"sigma_idio must be >= 0, got {self.sigma_idio}", "sigma_idio"
            )
        if not math.isfinite(self.beta):
            raise ParameterDomainError("beta must be finite", "beta")

    @property
    def c_ii(self) -> float:
        """Diagonal of the one-factor covariance, sigma^2 + beta^2."""
        return self.sigma_idio**2 + self.beta**2


class Regime(str, enum.Enum):
    WEAK = "weak"
    INTERMEDIATE = "intermediate"
    STRONG = "strong"


@dataclass(frozen=True)
class ThresholdPolicy:
    """Affine band q_+/-(r) = +/- q1 + slope * theta * r."""

    q1: float
    slope: float = 0.0
    theta: float = 0.0
    m_cap: float = 1.0

    def __post_init__(self):
        # q1 == 0 is allowed: it is the frictionless sign strategy.
        if not (math.isfinite(self.q1) and self.q1 >= 0):
            raise ParameterDomainError(f"q1 must be >= 0, got {self.q1}", "q1")
        if not (math.isfinite(self.slope) and self.slope >= 0):
            raise ParameterDomainError(f"slope must be >= 0, got {self.slope}", "slope")
        if not math.isfinite(self.theta):
            raise ParameterDomainError("theta must be finite", "theta")
        if not self.m_cap > 0:
            raise ParameterDomainError(f"m_cap must be > 0, got {self.m_cap}", "m_cap")

    def upper(self, r):
        return self.q1 + self.slope * self.theta * np.asarray(r)

    def lower(self, r):
        return -self.q1 + self.slope * self.theta * np.asarray(r)

    def to_record(self) -> dict:
        return asdict(self)


def regime_ratios(ou: OuParams, gamma: float) -> tuple[float, float]:
    """(psi / (gamma eps^1.5), psi / gamma): large first and small second means intermediate."""
    if gamma <= 0:
        raise DegenerateError("gamma = 0: no band, no regime")
    return ou.psi / (gamma * ou.epsilon**1.5), ou.psi / gamma


def classify_regime(
    ou: OuParams, gamma: float, separation: float = DEFAULT_SEPARATION
) -> Regime:
    if gamma <= 0:
        raise DegenerateError("gamma = 0: threshold is 0 and no regime applies")
    if ou.psi < separation * gamma * ou.epsilon**1.5:
        return Regime.WEAK
    if ou.psi > gamma / separation:
        return Regime.STRONG
    return Regime.INTERMEDIATE


def base_threshold(ou: OuParams, gamma: float, check_regime: bool = True) -> float:
    """Continuous-time band half-width (1.5 gamma psi^2)^(1/3)."""
    if gamma < 0:
        raise ParameterDomainError(f"gamma must be >= 0, got {gamma}", "gamma")
    if gamma == 0:
        return 0.0
    if check_regime:
        regime = classify_regime(ou, gamma)
        if regime is not Regime.INTERMEDIATE:
            raise OutOfRegimeError(
                f"base_threshold needs the intermediate regime, got {regime.value}", "psi"
            )
    return (1.5 * gamma * ou.psi**2) ** (1.0 / 3.0)


def _band_ratio(ou: OuParams, gamma: float, check_regime: bool) -> tuple[float, float]:
    q = base_threshold(ou, gamma, check_regime)
    x = ou.a * q * q
    if not x < 1.0:
        raise OutOfRegimeError(f"a*q*^2 = {x:.4g} >= 1: band is not small", "gamma")
    return q, x


def corrected_threshold(ou: OuParams, gamma: float, check_regime: bool = True) -> float:
    """q1 = q* (1 - a q*^2 / 3)."""
    q, x = _band_ratio(ou, gamma, check_regime)
    return q * (1.0 - x / 3.0)


def slope(ou: OuParams, gamma: float, jbar: float, check_regime: bool = True) -> float:
    """Sensitivity of the band centre to theta * R.

    S = 1 / ((1 - x) (1 + 2 (jbar / epsilon) x)) with x = a q*^2. Equal to
    1 / (1 - x^2) at 2 jbar = epsilon and decaying like 1 / jbar.
    """
    if not jbar > 0:
        raise ParameterDomainError(f"jbar must be > 0, got {jbar}", "jbar")
    _, x = _band_ratio(ou, gamma, check_regime)
    return 1.0 / ((1.0 - x) * (1.0 + 2.0 * jbar / ou.epsilon * x))


def symmetric_policy(
    ou: OuParams,
    gamma: float,
    theta: float,
    sigma_mf: float,
    m_cap: float = 1.0,
) -> ThresholdPolicy:
    """Exact band when the mean field decays at the predictor's rate (2 jbar = epsilon).

    p - theta R is then itself an OU with noise psi_tilde, so the single-asset
    threshold applies to it unchanged and the slope is exactly one.
    """
    psi_tilde = math.sqrt(ou.psi**2 + 2.0 * ou.epsilon * sigma_mf**2 * theta**2)
    q_tilde = (1.5 * gamma * psi_tilde**2) ** (1.0 / 3.0)
    return ThresholdPolicy(q1=q_tilde, slope=1.0, theta=theta, m_cap=m_cap)


def policy_for_asset(asset: AssetSpec, jbar: float, theta: float) -> ThresholdPolicy:
    return ThresholdPolicy(
        q1=corrected_threshold(asset.ou, asset.gamma),
        slope=slope(asset.ou, asset.gamma, jbar),
        theta=theta,
        m_cap=asset.m_cap,
    )


# --- coefficient system of the small-theta expansion ----------------------


def _slope_bracket(x, y):
    """1/S from the cubic ansatz, in units psi = q* = 1 (so gamma = 2/3).

    Polynomial ansatz: L = A th r + B p + C th r p^2 + D p^3 and
    P_- = A'' + A' th r + B' p + C' th r p^2 + D' p^3. B, D, B', D' solve
    their (constraint, boundary) pairs exactly; C, C' are affine in S and the
    smooth-pasting condition at first order in th r is linear in S.
    Accepts complex ``x`` for complex-step differentiation.
    """
    d = -1.0 / (x + 3.0)
    b = -d
    dp = -x / (2.0 * (3.0 + x))
    bp = -3.0 / (2.0 * (3.0 + x))
    c0 = 1.0 / (1.0 + 2.0 * y)
    c1 = -2.0 * y * (b + 3.0 * d) / (1.0 + 2.0 * y)
    c1p = -2.0 * y * (bp + 3.0 * dp) / (1.0 + 2.0 * y)
    gamma = 2.0 / 3.0
    return -(c1 + 3.0 * d - 2.0 * gamma * c1p - 6.0 * gamma * dp) / c0


@dataclass(frozen=True)
class AppendixCoeffs:
    """Coefficients of the low-order expansions of L(p, r) and P_-(p, r).

    Primed names carry a ``_p`` suffix; ``A_pp`` is A''. C, C' (and hence
    A, A') are evaluated at ``s`` (by default the closed-form slope).
    """

    A: float
    B: float
    C: float
    D: float
    A_pp: float
    A_p: float
    B_p: float
    C_p: float
    D_p: float
    q: float
    s: float
    epsilon: float
    psi: float
    gamma: float
    jbar: float

    @property
    def x(self) -> float:
        return self.epsilon / self.psi**2 * self.q**2

    @property
    def y(self) -> float:
        return self.jbar / self.psi**2 * self.q**2

    def constraint_residuals(self) -> np.ndarray:
        """Relative residuals of the four PDE matching conditions."""
        eps, psi2, j = self.epsilon, self.psi**2, self.jbar
        r1 = eps * self.B - 3.0 * self.D * psi2 - 1.0
        r2 = self.C * psi2 - 2.0 * j * self.A - 1.0
        r3 = (eps * self.B_p - 3.0 * self.D_p * psi2) / (
            abs(eps * self.B_p) + abs(3.0 * self.D_p * psi2)
        )
        r4 = (self.C_p * psi2 - 2.0 * j * self.A_p) / (
            abs(self.C_p * psi2) + abs(2.0 * j * self.A_p)
        )
        return np.array([r1, r2, r3, r4])

    def boundary_residuals(self) -> np.ndarray:
        """Value-matching conditions at q_+/- = +/- q (order 0 and 1 in theta r)."""
        q, s = self.q, self.s
        return np.array(
            [
                (self.B + self.D * q**2) * q,
                self.A + self.B * s + self.C * q**2 + 3.0 * self.D * s * q**2,
                self.A_pp - self.B_p * q - self.D_p * q**3 - 1.0,
                self.A_pp + self.B_p * q + self.D_p * q**3,
                (self.A_p + self.B_p * s + self.C_p * q**2 + 3.0 * self.D_p * s * q**2)
                * self.psi**2,
            ]
        )

    def closed_form(self) -> dict:
        """First-order-in-x closed forms of B, D, B', D' for comparison."""
        q, psi2, x = self.q, self.psi**2, self.x
        a = self.epsilon / psi2
        return {
            "B": q**2 / (3.0 * psi2) * (1.0 - x / 3.0),
            "D": (-1.0 + x / 3.0) / (3.0 * psi2),
            "B_p": (-1.0 + x / 3.0) / (2.0 * q),
            "D_p": a / (6.0 * q) * (-1.0 + x / 3.0),
        }

    def slope_bracket(self) -> float:
        """1/S solving the order-(theta r) smooth-pasting condition with these coefficients."""
        q, psi2, g, j = self.q, self.psi**2, self.gamma, self.jbar
        den = psi2 + 2.0 * j * q**2
        c0 = 1.0 / den
        c1 = -2.0 * j * (self.B + 3.0 * self.D * q**2) / den
        c1p = -2.0 * j * (self.B_p + 3.0 * self.D_p * q**2) / den
        return -(c1 + 3.0 * self.D - 2.0 * g * c1p - 6.0 * g * self.D_p) / c0

    def reconstructed_slope(self, order: str = "first") -> float:
        """Slope recovered from the coefficient system.

        ``order="ansatz"`` solves the cubic-ansatz condition exactly.
        ``order="first"`` keeps it to first order in x at fixed y and then
        replaces the order-0 band by q1, which turns 2y into 2y (1 - 2x/3).
        """
        x, y = self.x, self.y
        if order == "ansatz":
            return 1.0 / self.slope_bracket()
        if order != "first":
            raise ValueError(f"unknown order {order!r}")
        h = 1e-20
        k1 = float(np.imag(_slope_bracket(1j * h, y)) / h)
        k0 = float(_slope_bracket(0.0, y * (1.0 - 2.0 * x / 3.0)))
        return 1.0 / (k0 + x * k1)


def appendix_coefficients(
    ou: OuParams, gamma: float, jbar: float, s: float | None = None
) -> AppendixCoeffs:
    """Solve the expansion coefficients at the order-0 band q*.

    B, D (and B', D', A'') come from their constraint plus boundary pairs,
    solved exactly; C, C' from the order-(theta r) boundary conditions at
    slope ``s``; A, A' are back-solved from the remaining constraints.
    """
    if not jbar > 0:
        raise DegenerateError("jbar must be > 0: the constraint system is singular")
    q, x = _band_ratio(ou, gamma, check_regime=True)
    if s is None:
        s = slope(ou, gamma, jbar)
    eps, psi2, a = ou.epsilon, ou.psi**2, ou.a

    d = -1.0 / (eps * q**2 + 3.0 * psi2)
    b = -d * q**2
    d_p = -a / (2.0 * q * (3.0 + x))
    b_p = 3.0 * d_p / a
    a_pp = 0.5

    den = psi2 + 2.0 * jbar * q**2
    c = (1.0 - 2.0 * jbar * s * (b + 3.0 * d * q**2)) / den
    c_p = -2.0 * jbar * s * (b_p + 3.0 * d_p * q**2) / den
    a_coef = (c * psi2 - 1.0) / (2.0 * jbar)
    a_p = c_p * psi2 / (2.0 * jbar)
    return AppendixCoeffs(
        A=a_coef, B=b, C=c, D=d, A_pp=a_pp, A_p=a_p, B_p=b_p, C_p=c_p, D_p=d_p,
        q=q, s=s, epsilon=eps, psi=ou.psi, gamma=gamma, jbar=jbar,
    )  # fmt: skip


def solve_threshold_equation(ou: OuParams, gamma: float, order: int = 0) -> float:
    """Root of the order-0 smooth-pasting condition, found numerically.

    order=0 uses the x -> 0 coefficients (B = q^2/3psi^2, D = -1/3psi^2,
    B' = -1/2q, D' = 0); order=1 keeps first-order terms in x = a q^2,
    giving q^3 = 1.5 gamma psi^2 (1 - a q^2).
    """
    psi2, a = ou.psi**2, ou.a

    def f0(q):
        return q**2 / (3 * psi2) - q**2 / psi2 + gamma / q

    def f1(q):
        x = a * q * q
        lhs = q**2 / (3 * psi2) * (1 - x / 3 - 3 + x)
        rhs = 2 * gamma * (-(1 - x / 3) / (2 * q) + 0.5 * a * q * (1 - x / 3))
        return lhs - rhs

    f = {0: f0, 1: f1}[order]
    hi = 10.0 * (1.5 * gamma * psi2) ** (1.0 / 3.0)
    if order == 1:
        hi = min(hi, 0.999 / math.sqrt(a))
    return brentq(f, 1e-12 * hi, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def threshold_record(
    ou: OuParams,
    gamma: float,
    jbar: float | None = None,
    theta: float = 0.0,
    separation: float = DEFAULT_SEPARATION,
) -> dict:
    """JSON-ready summary of regime, thresholds and diagnostic ratios."""
    regime = classify_regime(ou, gamma, separation)
    weak_ratio, strong_ratio = regime_ratios(ou, gamma)
    rec = {
        "regime": regime.value,
        "psi_over_gamma_eps32": weak_ratio,
        "psi_over_gamma": strong_ratio,
        "p_star": ou.p_star,
        "q_weak": gamma * ou.epsilon,
        "q_strong": gamma,
        "theta": theta,
    }
    if regime is Regime.INTERMEDIATE:
        q = base_threshold(ou, gamma)
        x = ou.a * q * q
        rec.update(q_star=q, a_q_star2=x, q_hat=math.sqrt(x))
        if x < 1:
            rec["q1"] = corrected_threshold(ou, gamma)
            if jbar is not None:
                rec["jbar"] = jbar
                rec["slope"] = slope(ou, gamma, jbar)
    return rec
