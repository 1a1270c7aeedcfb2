"""Stationary flip rate J of the bang-bang strategy with a fixed band.

All integrals are written in the rescaled variable u = p / p_star, where the
normalization of the conditional density becomes

    1/J = (2 / epsilon) * [ I1(q_hat) + I2(q_hat) ],
    I1 = int_{-qh}^{qh} du e^{-u^2} int_{-qh}^{u} e^{v^2} dv,
    I2 = int_{qh}^{inf} e^{-u^2} du * int_{-qh}^{qh} e^{v^2} dv.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import DegenerateError, InputError, InsufficientHorizonError, NumericalFailureError, ParameterDomainError
from .ou import OuParams, _ar1_values, default_burn_in, make_rng
from .threshold import AssetSpec

__all__ = [
    "RateResult",
    "rate_exact",
    "rate_small_band",
    "rate_large_band",
    "stationary_density",
    "rate_monte_carlo",
    "portfolio_rate",
    "hysteresis_positions",
]

QUAD_RTOL = 1e-8
MIN_RESIDENCES = 30


@dataclass(frozen=True)
class RateResult:
    j: float
    q_hat: float
    method: str
    stderr: float = 0.0
    n_flips: int | None = None
    n_steps: int | None = None


def _q_hat(ou: OuParams, q: float) -> float:
    if not q > 0:
        raise ParameterDomainError(f"band q must be > 0, got {q}", "q")
    return q / ou.p_star


def _quad(f, lo, hi, what):
    val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
    if not np.isfinite(val) or (val != 0 and err > QUAD_RTOL * abs(val)):
        raise NumericalFailureError(f"quadrature for {what} did not converge", err / abs(val))
    return val, err


@functools.lru_cache(maxsize=4096)
def _inverse_rate_scaled(qh: float) -> tuple[float, float]:
    """I1 + I2 and its absolute error estimate."""
    # e^{-qh^2} int_0^{qh} e^{v^2} dv, kept O(1) for any qh
    f_scaled, e1 = _quad(lambda v: math.exp(v * v - qh * qh), 0.0, qh, "F(q_hat)")
    gauss, e2 = _quad(lambda u: math.exp(-u * u), -qh, qh, "Gaussian mass in band")

    def inner_from_zero(u):
        # int_0^u e^{v^2 - u^2} dv, an odd function of u
        val, _ = integrate.quad(lambda v: math.exp(v * v - u * u), 0.0, u, epsrel=1e-12)
        return val

    odd_part, e3 = integrate.quad(inner_from_zero, -qh, 0.0, epsrel=1e-11)
    odd_part2, e4 = integrate.quad(inner_from_zero, 0.0, qh, epsrel=1e-11)
    big = math.exp(qh * qh)
    i1 = f_scaled * big * gauss + (odd_part + odd_part2)
    # tail: int_{qh}^inf e^{-u^2} = (sqrt(pi)/2) erfc(qh) = (sqrt(pi)/2) erfcx(qh) e^{-qh^2}
    i2 = math.sqrt(math.pi) * special.erfcx(qh) * f_scaled
    err = (e1 / max(f_scaled, 1e-300)) * (i1 + i2) + e2 * f_scaled * big + e3 + e4
    total = i1 + i2
    if not np.isfinite(total) or total <= 0:
        raise NumericalFailureError(f"rate quadrature overflowed at q_hat={qh}", float("inf"))
    return total, err


def rate_exact(ou: OuParams, q: float) -> RateResult:
    """J from adaptive quadrature of the stationary normalization integral."""
    qh = _q_hat(ou, q)
    total, err = _inverse_rate_scaled(qh)
    if err > QUAD_RTOL * total:
        raise NumericalFailureError("rate quadrature above tolerance", err / total)
    return RateResult(j=ou.epsilon / (2.0 * total), q_hat=qh, method="exact_quadrature")


def rate_small_band(ou: OuParams, q: float) -> RateResult:
    qh = _q_hat(ou, q)
    if qh >= 1.0:
        raise ParameterDomainError(f"small-band formula needs q_hat < 1, got {qh:.3g}", "q")
    if qh > 0.5:
        warnings.warn(f"q_hat={qh:.3g}: small-band approximation is loose", stacklevel=2)
    return RateResult(j=ou.epsilon / (2.0 * math.sqrt(math.pi) * qh), q_hat=qh, method="small_band")


def rate_large_band(ou: OuParams, q: float) -> RateResult:
    qh = _q_hat(ou, q)
    if qh <= 1.0:
        raise ParameterDomainError(f"large-band formula needs q_hat > 1, got {qh:.3g}", "q")
    if qh < 2.0:
        warnings.warn(f"q_hat={qh:.3g}: large-band approximation is loose", stacklevel=2)
    j = ou.epsilon * qh * math.exp(-qh * qh) / math.sqrt(math.pi)
    return RateResult(j=j, q_hat=qh, method="large_band")


def stationary_density(ou: OuParams, q: float, p):
    """Density of the predictor conditional on holding +M, normalized on (-q, inf)."""
    qh = _q_hat(ou, q)
    j = rate_exact(ou, q).j
    scale = 2.0 * j / (ou.epsilon * ou.p_star)

    def one(pp):
        u = pp / ou.p_star
        if u <= -qh:
            return 0.0
        top = min(u, qh)
        val, _ = integrate.quad(lambda v: math.exp(v * v - u * u), -qh, top, epsrel=1e-12)
        return scale * val

    p_arr = np.asarray(p, dtype=float)
    if p_arr.ndim == 0:
        return one(float(p_arr))
    return np.array([one(v) for v in p_arr.ravel()]).reshape(p_arr.shape)


def hysteresis_positions(up: np.ndarray, down: np.ndarray, initial: int) -> np.ndarray:
    """Bang-bang positions (+1/-1) from upper/lower touch indicators.

    The position is the sign of the most recent touch; before any touch it is
    ``initial``. A step flagged both up and down resolves to up.
    """
    n = up.size
    events = np.zeros(n, dtype=np.int8)
    events[down] = -1
    events[up] = 1
    idx = np.where(events != 0, np.arange(n), -1)
    np.maximum.accumulate(idx, out=idx)
    pos = events[np.maximum(idx, 0)]
    pos[idx < 0] = initial
    return pos


def _count_flips(ou, q, horizon, rng, bridge, burn_in):
    n = horizon + burn_in
    p = _ar1_values(rng, ou.epsilon, ou.psi, n)
    up = p >= q
    down = p <= -q
    if bridge:
        # Brownian-bridge probability of touching a barrier between two
        # samples that both stay on the inside: exp(-2 d0 d1 / psi^2).
        a, b = p[:-1], p[1:]
        inv = 2.0 / ou.psi**2
        p_up = np.exp(-inv * np.clip(q - a, 0.0, None) * np.clip(q - b, 0.0, None))
        p_dn = np.exp(-inv * np.clip(a + q, 0.0, None) * np.clip(b + q, 0.0, None))
        up[1:] |= rng.random(n - 1) < p_up
        down[1:] |= rng.random(n - 1) < p_dn
        both = up & down
        if both.any():
            # both barriers touched within one step: the later touch is the
            # one nearer the end point
            up[both] = p[both] >= 0.0
            down[both] = ~up[both]
    pos = hysteresis_positions(up, down, 1 if p[0] >= 0 else -1)
    tail = pos[burn_in:]
    flip_at = np.flatnonzero(tail[1:] != tail[:-1])
    return flip_at.size, tail.size - 1, np.diff(flip_at)


def rate_monte_carlo(
    ou: OuParams,
    q: float,
    horizon: int,
    seed: int,
    repetitions: int = 1,
    bridge: bool = True,
    burn_in: int | None = None,
) -> RateResult:
    """Flip rate of the two-threshold rule on simulated AR(1) paths.

    Every residence at +M or -M ends in exactly one flip, so flips per step
    estimate J directly. With ``bridge=True`` touches between samples are
    sampled from the Brownian-bridge crossing probability, which removes the
    overshoot bias of checking the barrier only at integer times. Repetitions
    use independent streams ``make_rng(seed, rep)`` and are pooled.

    Residences between flips are i.i.d., so the renewal CLT gives
    stderr = J CV / sqrt(flips), with CV the coefficient of variation of the
    residence times. At small q_hat CV^2 is well above 1 and the binomial
    formula would understate the error several-fold. With fewer than
    ``MIN_RESIDENCES`` complete residences CV^2 is taken as 1, the
    exponential-exit value of wide bands.
    """
    qh = _q_hat(ou, q)
    if burn_in is None:
        burn_in = default_burn_in(ou.epsilon)
    flips = steps = 0
    residences = []
    for rep in range(repetitions):
        rng = make_rng(seed, rep)
        f, s, res = _count_flips(ou, q, int(horizon), rng, bridge, burn_in)
        flips += f
        steps += s
        residences.append(res)
    if flips == 0:
        raise InsufficientHorizonError(
            f"no flips in {steps} steps at q_hat={qh:.3g}; increase horizon or repetitions"
        )
    rate = flips / steps
    res = np.concatenate(residences)
    cv2 = float(np.var(res, ddof=1) / np.mean(res) ** 2) if res.size >= MIN_RESIDENCES else 1.0
    return RateResult(
        j=rate,
        q_hat=qh,
        method="monte_carlo",
        stderr=rate * math.sqrt(cv2 / flips),
        n_flips=flips,
        n_steps=steps,
    )


def portfolio_rate(assets: Sequence[AssetSpec], bands: Sequence[float]) -> float:
    """Trading rate averaged over assets with weights beta^2 M^2."""
    if len(assets) != len(bands) or not assets:
        raise InputError("assets and bands must be non-empty and of equal length")
    w = np.array([a.beta**2 * a.m_cap**2 for a in assets])
    if not w.sum() > 0:
        raise DegenerateError("all beta^2 M^2 weights are zero")
    rates = np.array(
        [rate_exact(a.ou, q).j if wi > 0 else 0.0 for a, q, wi in zip(assets, bands, w)]
    )
    return float(np.dot(w, rates) / w.sum())
