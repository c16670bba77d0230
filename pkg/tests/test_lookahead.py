"""Tests for the closed-form level-set / response posterior layer."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from activelse import DomainError, NumericError
from activelse.lookahead import (
    STD_FLOOR,
    LookaheadTerms,
    PosteriorQuery,
    gamma_from_theta,
    level_set_posterior,
    lookahead_posteriors,
    lookahead_terms,
    prob_y1,
    z_moments,
)
from activelse.specfun import bvn_cdf, std_normal_cdf

mus = st.floats(min_value=-6, max_value=6)
sigmas = st.floats(min_value=0.0, max_value=5.0)
gammas = st.floats(min_value=-4, max_value=4)


def _query_case(rng):
    mu_q = rng.normal(0, 2)
    mu_s = rng.normal(0, 2)
    var_q = rng.uniform(0.05, 4.0)
    var_s = rng.uniform(0.05, 4.0)
    rho = rng.uniform(-0.98, 0.98)
    cov = rho * np.sqrt(var_q * var_s)
    gamma = rng.normal(0, 1.5)
    return PosteriorQuery(mu_q, var_q, mu_s, var_s, cov), gamma


# ---------------------------------------------------------------------------
# marginal quantities
# ---------------------------------------------------------------------------

def test_level_set_posterior_examples():
    gamma = 0.674
    assert level_set_posterior(gamma, 1.3, gamma) == 0.5
    assert level_set_posterior(gamma - 2.0, 2.0, gamma) == pytest.approx(
        std_normal_cdf(1.0), abs=1e-15)
    assert level_set_posterior(gamma + 3 * 0.5, 0.5, gamma) == pytest.approx(
        std_normal_cdf(-3.0), abs=1e-15)


def test_level_set_posterior_rejects_nonpositive_sigma():
    with pytest.raises(DomainError):
        level_set_posterior(0.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        level_set_posterior(0.0, -1.0, 0.0)


def test_level_set_posterior_floors_tiny_sigma():
    # a collapsed posterior saturates through the std floor, no overflow
    assert level_set_posterior(-1.0, 1e-300, 0.0) == pytest.approx(1.0)
    assert level_set_posterior(1.0, 1e-300, 0.0) == pytest.approx(0.0)
    assert level_set_posterior(-1.0, 1e-300, 0.0) == level_set_posterior(
        -1.0, STD_FLOOR, 0.0)


def test_z_moments_mean_against_quadrature():
    for mu, sigma in [(0.0, 1.0), (1.3, 0.45), (-2.0, 2.2), (0.5, 0.0)]:
        f = lambda t: std_normal_cdf(mu + sigma * t) * np.exp(-t * t / 2) / np.sqrt(2 * np.pi)
        expected, _ = integrate.quad(f, -10, 10, epsabs=1e-13)
        assert z_moments(mu, sigma)[0] == pytest.approx(expected, abs=1e-11)


def test_z_moments_variance_against_quadrature():
    for mu, sigma in [(0.0, 1.0), (1.3, 0.45), (-2.0, 2.2), (0.7, 1.7)]:
        w = lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi)
        m1, _ = integrate.quad(lambda t: std_normal_cdf(mu + sigma * t) * w(t), -10, 10, epsabs=1e-13)
        m2, _ = integrate.quad(lambda t: std_normal_cdf(mu + sigma * t) ** 2 * w(t), -10, 10, epsabs=1e-13)
        assert z_moments(mu, sigma)[1] == pytest.approx(m2 - m1 * m1, abs=1e-10)


def test_z_moments_degenerate_sigma():
    # deterministic latent: mean is Phi(mu), variance collapses to 0 through
    # the identity T(h, 1) = Phi(h)(1 - Phi(h))/2
    mean, var = z_moments(1.3, 0.0)
    assert mean == pytest.approx(std_normal_cdf(1.3), abs=1e-15)
    assert var == pytest.approx(0.0, abs=1e-13)


def test_z_moments_symmetric_mean():
    for sigma in (0.3, 1.0, 4.0):
        assert z_moments(0.0, sigma)[0] == pytest.approx(0.5, abs=1e-15)


def test_z_moments_frozen_value():
    # mu=0, sigma=1: variance of Phi(f) is exactly 1/12
    assert z_moments(0.0, 1.0)[1] == pytest.approx(1.0 / 12.0, abs=1e-13)


@given(mus, sigmas)
def test_z_moments_variance_bounded(mu, sigma):
    mean, var = z_moments(mu, sigma)
    assert 0.0 <= var <= mean * (1 - mean) + 1e-12


def test_prob_y1_examples():
    assert prob_y1(0.0, 3.7) == 0.5
    assert prob_y1(1.3, 0.0) == pytest.approx(std_normal_cdf(1.3), abs=1e-15)
    assert prob_y1(1.0, 2.0) == pytest.approx(
        std_normal_cdf(1.0 / np.sqrt(5.0)), abs=1e-15)
    assert prob_y1(1.0, 2.0) == pytest.approx(0.67264, abs=5e-6)


def test_marginal_validation():
    with pytest.raises(DomainError):
        level_set_posterior(np.nan, 1.0, 0.0)
    with pytest.raises(DomainError):
        z_moments(0.0, -0.5)
    with pytest.raises(DomainError):
        prob_y1(np.inf, 1.0)


def test_gamma_from_theta_round_trip():
    for theta in (0.5, 0.75, 0.1, 0.999):
        assert std_normal_cdf(gamma_from_theta(theta)) == pytest.approx(
            theta, abs=1e-14)
    with pytest.raises(DomainError):
        gamma_from_theta(1.0)


# ---------------------------------------------------------------------------
# PosteriorQuery / LookaheadTerms
# ---------------------------------------------------------------------------

def test_posterior_query_validation():
    with pytest.raises(DomainError):
        PosteriorQuery(0.0, -1.0, 0.0, 1.0, 0.1)
    with pytest.raises(DomainError):
        PosteriorQuery(0.0, 1.0, np.nan, 1.0, 0.1)
    # Cauchy-Schwarz violated beyond roundoff
    with pytest.raises(DomainError):
        PosteriorQuery(0.0, 1.0, 0.0, 1.0, 1.5)
    # within the roundoff allowance is fine
    PosteriorQuery(0.0, 1.0, 0.0, 1.0, 1.0 + 5e-10)


def test_lookahead_terms_bundle():
    rng = np.random.default_rng(21)
    for _ in range(100):
        query, gamma = _query_case(rng)
        t = lookahead_terms(query, gamma)
        assert isinstance(t, LookaheadTerms)
        phi_b = std_normal_cdf(t.b_q)
        assert max(0.0, t.p1 + phi_b - 1.0) - 1e-12 <= t.z_qstar
        assert t.z_qstar <= min(t.p1, phi_b) + 1e-12
        assert 0.0 < t.c_star <= 1.0
        assert t.p1 == pytest.approx(std_normal_cdf(t.a_star), abs=1e-15)


# ---------------------------------------------------------------------------
# look-ahead posteriors
# ---------------------------------------------------------------------------

def test_lookahead_against_monte_carlo():
    rng = np.random.default_rng(515)
    n = 10 ** 6
    for _ in range(4):
        query, gamma = _query_case(rng)
        pi_1, pi_0, p1 = lookahead_posteriors(query, gamma)

        sd_q, sd_s = np.sqrt(query.var_q), np.sqrt(query.var_star)
        rho_f = query.cov_qstar / (sd_q * sd_s)
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        f_s = query.mu_star + sd_s * u
        f_q = query.mu_q + sd_q * (rho_f * u + np.sqrt(1 - rho_f ** 2) * v)
        y = rng.random(n) < std_normal_cdf(f_s)
        in_set = f_q <= gamma

        for got, sel in [(pi_1, y), (pi_0, ~y)]:
            est = in_set[sel].mean()
            se = np.sqrt(max(est * (1 - est), 1e-12) / sel.sum())
            assert abs(got - est) <= 4 * se
        p_est = y.mean()
        assert abs(p1 - p_est) <= 4 * np.sqrt(p_est * (1 - p_est) / n)


@given(mus, sigmas, mus, sigmas,
       st.floats(min_value=-1, max_value=1), gammas)
@settings(max_examples=200)
def test_tower_identity(mu_q, sd_q, mu_s, sd_s, rho, gamma):
    query = PosteriorQuery(mu_q, sd_q ** 2, mu_s, sd_s ** 2,
                           rho * sd_q * sd_s)
    pi_1, pi_0, p1 = lookahead_posteriors(query, gamma)
    pi_now = std_normal_cdf(
        (gamma - mu_q) / max(sd_q, STD_FLOOR))
    assert abs(p1 * pi_1 + (1 - p1) * pi_0 - pi_now) <= 5e-8


def test_zero_covariance_is_exactly_marginal():
    rng = np.random.default_rng(99)
    for _ in range(50):
        query, gamma = _query_case(rng)
        query = PosteriorQuery(query.mu_q, query.var_q, query.mu_star,
                               query.var_star, 0.0)
        pi_1, pi_0, _ = lookahead_posteriors(query, gamma)
        pi_now = level_set_posterior(query.mu_q, np.sqrt(query.var_q), gamma)
        assert pi_1 == pi_now
        assert pi_0 == pi_now


def test_monotone_update_with_positive_covariance():
    # a positive response pulls the latent up, shrinking sublevel membership
    rng = np.random.default_rng(23)
    for _ in range(50):
        query, gamma = _query_case(rng)
        cov = abs(query.cov_qstar)
        if cov == 0.0:
            continue
        query = PosteriorQuery(query.mu_q, query.var_q, query.mu_star,
                               query.var_star, cov)
        pi_1, pi_0, _ = lookahead_posteriors(query, gamma)
        pi_now = level_set_posterior(query.mu_q, np.sqrt(query.var_q), gamma)
        assert pi_1 <= pi_now + 1e-12
        assert pi_0 >= pi_now - 1e-12


def test_degenerate_response_probability_keeps_current_value():
    hi = PosteriorQuery(0.0, 1.0, 60.0, 0.01, 0.05)
    pi_1, pi_0, p1 = lookahead_posteriors(hi, 0.674)
    pi_now = level_set_posterior(0.0, 1.0, 0.674)
    assert p1 == 1.0
    assert pi_0 == pi_now
    assert np.isfinite(pi_1)
    lo = PosteriorQuery(0.0, 1.0, -60.0, 0.01, 0.05)
    pi_1, pi_0, p1 = lookahead_posteriors(lo, 0.674)
    assert p1 == 0.0
    assert pi_1 == pi_now
    assert np.isfinite(pi_0)


def test_self_query_specialization():
    # query point == candidate point: covariance equals the variance
    mu, var, gamma = 0.3, 1.7, 0.674
    query = PosteriorQuery(mu, var, mu, var, var)
    pi_1, pi_0, p1 = lookahead_posteriors(query, gamma)
    sd = np.sqrt(var)
    a = mu / np.sqrt(1 + var)
    b = (gamma - mu) / sd
    rho = -sd / np.sqrt(1 + var)
    z = bvn_cdf(a, b, rho)
    assert pi_1 == pytest.approx(z / std_normal_cdf(a), abs=1e-14)
    assert pi_0 == pytest.approx(
        (std_normal_cdf(b) - z) / std_normal_cdf(-a), abs=1e-14)
    assert p1 == pytest.approx(std_normal_cdf(a), abs=1e-15)


def test_lookahead_broadcasting():
    query = PosteriorQuery(
        mu_q=np.zeros((4, 5)), var_q=np.ones((4, 5)),
        mu_star=np.zeros((4, 1)), var_star=np.ones((4, 1)),
        cov_qstar=0.3 * np.ones((4, 5)))
    pi_1, pi_0, p1 = lookahead_posteriors(query, 0.674)
    assert np.shape(pi_1) == (4, 5)
    assert np.shape(p1) == (4, 5)
    scalar = lookahead_posteriors(PosteriorQuery(0.0, 1.0, 0.0, 1.0, 0.3), 0.674)
    assert all(isinstance(v, float) for v in scalar)


def test_guard_rejects_corrupt_joint_probability(monkeypatch):
    # a broken orthant value far outside [0, 1] must trip the guard rather
    # than silently clamp
    import activelse.lookahead as mod
    monkeypatch.setattr(mod, "bvn_cdf", lambda *a: np.asarray(2.0))
    with pytest.raises(NumericError):
        lookahead_posteriors(PosteriorQuery(0.0, 1.0, 0.0, 1.0, 0.3), 0.674)


def test_extreme_inputs_stay_in_unit_interval():
    pi_1, pi_0, _ = lookahead_posteriors(
        PosteriorQuery(-8.0, 0.01, 8.0, 0.01, 0.0009), 0.0)
    for v in (pi_1, pi_0):
        assert 0.0 <= v <= 1.0
