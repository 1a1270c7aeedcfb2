import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from mftrade.errors import DegenerateError, InputError, InsufficientHorizonError, ParameterDomainError
from mftrade.ou import OuParams
from mftrade.threshold import AssetSpec
from mftrade.trading_rate import (
    hysteresis_positions,
    portfolio_rate,
    rate_exact,
    rate_large_band,
    rate_monte_carlo,
    rate_small_band,
    stationary_density,
)

OU = OuParams(1e-3, 1e-3)


def q_of(qh, ou=OU):
    return qh * ou.p_star


def erfi_rate(ou, qh):
    # independent closed form of the normalization: 1/J = pi erfi(q_hat) / eps
    return ou.epsilon / (math.pi * special.erfi(qh))


@pytest.mark.parametrize("qh", [0.01, 0.05, 0.1, 0.362, 1.0, 2.0, 3.0, 5.0, 8.0])
def test_exact_matches_erfi_closed_form(qh):
    assert rate_exact(OU, q_of(qh)).j == pytest.approx(erfi_rate(OU, qh), rel=1e-9)


def test_exact_examples():
    assert rate_exact(OU, q_of(0.1)).j == pytest.approx(2.8209e-3, rel=0.02)
    assert rate_exact(OU, q_of(3.0)).j == pytest.approx(2.0888e-7, rel=0.10)
    res = rate_exact(OU, q_of(0.2))
    assert res.method == "exact_quadrature" and res.stderr == 0.0 and res.q_hat == pytest.approx(0.2)


@given(st.floats(1e-4, 0.5), st.floats(0.05, 4.0))
@settings(max_examples=30, deadline=None)
def test_exact_linear_in_epsilon(eps, qh):
    a = OuParams(eps, 1e-3)
    b = OuParams(2 * eps if 2 * eps <= 1 else eps / 2, 1e-3)
    ja = rate_exact(a, qh * a.p_star).j
    jb = rate_exact(b, qh * b.p_star).j
    assert jb / ja == pytest.approx(b.epsilon / a.epsilon, rel=1e-9)


@given(st.floats(0.02, 4.0), st.floats(1.01, 2.0))
@settings(max_examples=30, deadline=None)
def test_exact_decreasing_in_q(qh, factor):
    assert rate_exact(OU, q_of(qh * factor)).j < rate_exact(OU, q_of(qh)).j


def test_invalid_band():
    with pytest.raises(ParameterDomainError):
        rate_exact(OU, 0.0)


def test_small_band_values():
    assert rate_small_band(OU, q_of(0.1)).j == pytest.approx(2.8209e-3, rel=1e-4)
    j = rate_small_band(OU, q_of(0.05)).j
    assert j == pytest.approx(1e-3 / (2 * math.sqrt(math.pi) * 0.05), rel=1e-12)
    op = rate_small_band(OU, q_of(0.362)).j
    assert op == pytest.approx(7.793e-4, rel=1e-3)
    assert abs(op / rate_exact(OU, q_of(0.362)).j - 1) < 0.15
    assert rate_small_band(OU, q_of(1e-6)).j > 1e2
    with pytest.warns(UserWarning):
        rate_small_band(OU, q_of(0.7))
    with pytest.raises(ParameterDomainError):
        rate_small_band(OU, q_of(1.0))


def test_large_band_values():
    assert rate_large_band(OU, q_of(3.0)).j == pytest.approx(2.0888e-7, rel=1e-4)
    errs = [abs(rate_large_band(OU, q_of(q)).j / rate_exact(OU, q_of(q)).j - 1) for q in (2.0, 3.0, 4.0)]
    assert errs[0] > errs[1] > errs[2]
    assert rate_large_band(OU, q_of(4.0)).j < rate_large_band(OU, q_of(3.0)).j
    with pytest.raises(ParameterDomainError):
        rate_large_band(OU, q_of(0.5))
    with pytest.warns(UserWarning):
        rate_large_band(OU, q_of(1.5))


def test_asymptotic_branches_within_five_percent():
    assert abs(rate_small_band(OU, q_of(0.05)).j / rate_exact(OU, q_of(0.05)).j - 1) < 0.05
    assert abs(rate_large_band(OU, q_of(3.5)).j / rate_exact(OU, q_of(3.5)).j - 1) < 0.05


def test_regime_statement():
    assert rate_exact(OU, q_of(0.1)).j > OU.epsilon
    assert rate_exact(OU, q_of(3.0)).j < OU.epsilon


def test_density_boundary_and_normalization():
    q = q_of(0.362)
    assert stationary_density(OU, q, -q) == 0.0
    assert stationary_density(OU, q, -2 * q) == 0.0
    total, _ = integrate.quad(lambda p: stationary_density(OU, q, p), -q, 12 * OU.p_star, points=[q], limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_flux_equals_rate():
    q = q_of(0.362)
    h = 1e-7 * q
    slope = (stationary_density(OU, q, -q + h) - stationary_density(OU, q, -q)) / h
    assert 0.5 * OU.psi**2 * slope == pytest.approx(rate_exact(OU, q).j, rel=1e-4)


def test_density_vectorized():
    q = q_of(0.5)
    p = np.linspace(-2 * q, 3 * q, 7)
    vec = stationary_density(OU, q, p)
    assert vec.shape == p.shape
    np.testing.assert_allclose(vec, [stationary_density(OU, q, v) for v in p])


@pytest.mark.parametrize("qh", [0.02, 0.362, 1.5])
def test_density_at_threshold_is_twice_gaussian(qh):
    q = q_of(qh)
    gauss = math.exp(-(qh**2)) / (math.sqrt(math.pi) * OU.p_star)
    assert stationary_density(OU, q, q) == pytest.approx(2 * gauss, rel=1e-9)


def test_hysteresis_positions():
    up = np.array([0, 0, 1, 0, 0, 0, 1, 0], bool)
    dn = np.array([0, 1, 0, 0, 1, 0, 1, 0], bool)
    np.testing.assert_array_equal(hysteresis_positions(up, dn, 1), [1, -1, 1, 1, -1, -1, 1, 1])
    np.testing.assert_array_equal(hysteresis_positions(np.zeros(3, bool), np.zeros(3, bool), -1), [-1, -1, -1])


def test_monte_carlo_matches_exact_at_operating_point():
    q = q_of(0.362)
    mc = rate_monte_carlo(OU, q, 2_500_000, seed=5, repetitions=2)
    assert abs(mc.j - rate_exact(OU, q).j) < 3 * mc.stderr
    assert mc.method == "monte_carlo" and mc.n_flips > 100


def test_monte_carlo_small_band():
    q = q_of(0.1)
    mc = rate_monte_carlo(OU, q, 1_000_000, seed=8)
    small = rate_small_band(OU, q).j
    assert abs(mc.j - small) <= max(0.05 * small, 3 * mc.stderr)


def test_monte_carlo_stderr_scaling():
    q = q_of(0.2)
    a = rate_monte_carlo(OU, q, 500_000, seed=1)
    b = rate_monte_carlo(OU, q, 1_000_000, seed=1)
    assert a.stderr / b.stderr == pytest.approx(math.sqrt(2), rel=0.1)


def test_monte_carlo_deterministic():
    q = q_of(0.3)
    assert rate_monte_carlo(OU, q, 200_000, seed=3) == rate_monte_carlo(OU, q, 200_000, seed=3)


def test_endpoint_only_counting_is_biased_at_small_band():
    # checking the barrier only at integer times misses excursions; the
    # bridge correction removes the deficit
    q = q_of(0.05)
    exact = rate_exact(OU, q).j
    raw = rate_monte_carlo(OU, q, 1_000_000, seed=2, bridge=False)
    fixed = rate_monte_carlo(OU, q, 1_000_000, seed=2, bridge=True)
    assert raw.j < 0.9 * exact
    assert abs(fixed.j - exact) < 3 * fixed.stderr


def test_monte_carlo_zero_flips():
    with pytest.raises(InsufficientHorizonError):
        rate_monte_carlo(OU, q_of(6.0), 2000, seed=0, burn_in=0)


def test_portfolio_rate():
    a = AssetSpec(OU, 1.0)
    q1, q2 = q_of(0.2), q_of(0.5)
    j1, j2 = rate_exact(OU, q1).j, rate_exact(OU, q2).j
    assert portfolio_rate([a] * 5, [q1] * 5) == pytest.approx(j1, rel=1e-14)
    b3 = AssetSpec(OU, 1.0, beta=math.sqrt(3))
    assert portfolio_rate([a, b3], [q1, q2]) == pytest.approx((j1 + 3 * j2) / 4, rel=1e-14)
    zero = AssetSpec(OU, 1.0, beta=0.0)
    assert portfolio_rate([a, zero], [q1, q2]) == pytest.approx(j1, rel=1e-14)
    with pytest.raises(DegenerateError):
        portfolio_rate([zero], [q1])
    with pytest.raises(InputError):
        portfolio_rate([a], [q1, q2])


@pytest.mark.parametrize("q_hat", [0.05, 1.0])
def test_monte_carlo_stderr_matches_scatter(q_hat):
    # flips cluster at narrow bands, so a binomial error would be several times too small
    q = q_hat * OU.p_star
    runs = [rate_monte_carlo(OU, q, 200_000, seed=300 + k) for k in range(40)]
    sd = np.std([r.j for r in runs], ddof=1)
    se = np.mean([r.stderr for r in runs])
    assert 0.7 < sd / se < 1.35
