"""Tests for the acquisition strategies."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from activelse import ConfigError, DomainError
from activelse.acquisition import (
    AcquisitionKind,
    ReferenceSet,
    bald,
    balv,
    binary_entropy,
    eavc,
    evaluate,
    global_mi,
    global_sur,
    local_mi,
    local_sur,
    straddle_z,
    _eavc_value,
)
from activelse.lookahead import (
    PosteriorQuery,
    gamma_from_theta,
    level_set_posterior,
    lookahead_posteriors,
    z_moments,
)
from activelse.specfun import std_normal_cdf, std_normal_quantile


def _random_query(rng, n_ref=5):
    var_q = rng.uniform(0.05, 4.0, n_ref)
    var_s = rng.uniform(0.05, 4.0)
    rho = rng.uniform(-0.95, 0.95, n_ref)
    query = PosteriorQuery(
        mu_q=rng.normal(0, 2, n_ref), var_q=var_q,
        mu_star=rng.normal(0, 2), var_star=var_s,
        cov_qstar=rho * np.sqrt(var_q * var_s))
    return query, rng.normal(0, 1.5)


def _loop_oracle(query, gamma, which, volume_constant=1.0):
    """Brute-force two-branch enumeration, one reference point at a time."""
    mu_q = np.atleast_1d(query.mu_q)
    var_q = np.atleast_1d(query.var_q)
    cov = np.atleast_1d(query.cov_qstar)
    now, one, zero = [], [], []
    p1 = None
    for i in range(len(mu_q)):
        qi = PosteriorQuery(mu_q[i], var_q[i], query.mu_star,
                            query.var_star, cov[i])
        pi_1, pi_0, p1 = lookahead_posteriors(qi, gamma)
        now.append(level_set_posterior(mu_q[i], np.sqrt(var_q[i]), gamma))
        one.append(pi_1)
        zero.append(pi_0)
    if which == "sur":
        m = lambda p: min(p, 1 - p)
        return sum(m(n) - p1 * m(a) - (1 - p1) * m(b)
                   for n, a, b in zip(now, one, zero))
    if which == "mi":
        h = lambda p: float(binary_entropy(p))
        return sum(h(n) - p1 * h(a) - (1 - p1) * h(b)
                   for n, a, b in zip(now, one, zero))
    v, v1, v0 = (volume_constant * sum(s) for s in (now, one, zero))
    return p1 * abs(v - v1) + (1 - p1) * abs(v - v0)


# ---------------------------------------------------------------------------
# kinds and reference sets
# ---------------------------------------------------------------------------

def test_kind_tags_and_beta_rules():
    k = AcquisitionKind("StraddleZ")
    assert k.beta == 1.96
    assert AcquisitionKind("StraddleZ", beta=1.0).beta == 1.0
    assert AcquisitionKind("GlobalMI").beta is None
    with pytest.raises(ConfigError):
        AcquisitionKind("GlobalMI", beta=2.0)
    with pytest.raises(ConfigError):
        AcquisitionKind("Straddle")
    with pytest.raises(ConfigError):
        AcquisitionKind("StraddleZ", beta=-1.0)


def test_reference_set_construction():
    pts = np.random.default_rng(0).uniform(-1, 1, (100, 2))
    ref = ReferenceSet.from_bounds(pts, [(-1.0, 1.0), (-1.0, 1.0)])
    assert ref.volume_constant == pytest.approx(4.0 / 100)
    assert len(ref) == 100
    with pytest.raises(DomainError):
        ReferenceSet(points=np.zeros((0, 2)), volume_constant=1.0)
    with pytest.raises(DomainError):
        ReferenceSet(points=pts, volume_constant=0.0)


def test_binary_entropy_convention():
    assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.25) == pytest.approx(
        -(0.25 * np.log2(0.25) + 0.75 * np.log2(0.75)), abs=1e-15)


# ---------------------------------------------------------------------------
# straddle / BALV / BALD
# ---------------------------------------------------------------------------

def test_straddle_at_threshold_with_no_uncertainty():
    mu = 0.524
    theta = std_normal_cdf(mu)
    assert straddle_z(mu, 0.0, theta, 1.96) == 0.0


def test_straddle_degenerate_variance_example():
    mu = std_normal_quantile(0.85)
    assert straddle_z(mu, 0.0, 0.75, 1.96) == pytest.approx(-0.1, abs=1e-12)


def test_straddle_against_monte_carlo():
    mu, sigma, theta = 0.2, 0.8, 0.75
    rng = np.random.default_rng(31)
    z = std_normal_cdf(mu + sigma * rng.standard_normal(10 ** 6))
    mean, var = z.mean(), z.var()
    # moment SEs propagated through the straddle formula (dominant terms)
    se = z.std() / np.sqrt(10 ** 6) * (1 + 1.96)
    got = straddle_z(mu, sigma, theta, 1.96)
    ref = -abs(mean - theta) + 1.96 * np.sqrt(var)
    assert abs(got - ref) <= 3 * se


def test_balv_is_response_variance():
    assert balv(0.3, 1.1) == z_moments(0.3, 1.1)[1]
    assert balv(0.7, 0.0) == 0.0


def test_balv_maximal_at_symmetric_mean():
    for mu in (0.3, -0.8, 2.0):
        assert balv(0.0, 1.3) >= balv(mu, 1.3)


def test_bald_zero_when_deterministic():
    assert abs(bald(0.7, 0.0)) <= 1e-12


def test_bald_symmetric_in_mu():
    assert bald(1.1, 0.9) == pytest.approx(bald(-1.1, 0.9), abs=1e-14)


def test_bald_against_quadrature():
    for mu, sigma in [(0.0, 1.0), (0.7, 1.2), (-1.5, 0.4)]:
        w = lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi)
        h = lambda p: float(binary_entropy(p))
        mean, _ = integrate.quad(
            lambda t: std_normal_cdf(mu + sigma * t) * w(t), -10, 10, epsabs=1e-13)
        exp_h, _ = integrate.quad(
            lambda t: h(std_normal_cdf(mu + sigma * t)) * w(t), -10, 10, epsabs=1e-12)
        assert bald(mu, sigma) == pytest.approx(h(mean) - exp_h, abs=1e-9)


def test_bald_nonnegative():
    rng = np.random.default_rng(77)
    mu = rng.normal(0, 3, 500)
    sigma = rng.uniform(0, 3, 500)
    assert np.min(bald(mu, sigma)) >= -1e-9


# ---------------------------------------------------------------------------
# look-ahead family: composition oracles
# ---------------------------------------------------------------------------

def test_local_sur_composition():
    rng = np.random.default_rng(41)
    for _ in range(100):
        mu = rng.normal(0, 2)
        var = rng.uniform(0.05, 4.0)
        gamma = rng.normal(0, 1)
        qi = PosteriorQuery(mu, var, mu, var, var)
        pi_1, pi_0, p1 = lookahead_posteriors(qi, gamma)
        pi_now = level_set_posterior(mu, np.sqrt(var), gamma)
        m = lambda p: min(p, 1 - p)
        expected = m(pi_now) - p1 * m(pi_1) - (1 - p1) * m(pi_0)
        assert local_sur(mu, np.sqrt(var), gamma) == pytest.approx(
            expected, abs=1e-12)


def test_local_sur_positive_at_threshold():
    v = local_sur(0.674, 1.0, 0.674)
    assert v > 0.01


def test_local_sur_zero_variance_limit():
    assert local_sur(0.3, 0.0, 0.674) == 0.0


def test_local_mi_quadrature_oracle():
    # mutual information between the response and membership, integrated
    # directly under the 1-d latent Gaussian
    mu, sigma, gamma = 0.0, 1.0, 0.674
    w = lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi)
    joint, _ = integrate.quad(
        lambda t: std_normal_cdf(mu + sigma * t) * w(t),
        -12, (gamma - mu) / sigma, epsabs=1e-14)
    p_y1, _ = integrate.quad(
        lambda t: std_normal_cdf(mu + sigma * t) * w(t), -12, 12, epsabs=1e-14)
    p_in = std_normal_cdf((gamma - mu) / sigma)
    h = lambda p: float(binary_entropy(p))
    oracle = (h(p_in) - p_y1 * h(joint / p_y1)
              - (1 - p_y1) * h((p_in - joint) / (1 - p_y1)))
    assert local_mi(mu, sigma, gamma) == pytest.approx(oracle, abs=1e-6)
    assert local_mi(mu, sigma, gamma) == pytest.approx(
        0.1483357173485526, abs=1e-12)


def test_local_mi_zero_cases():
    assert local_mi(0.4, 0.0, 0.674) == 0.0
    # no resolvable information when the branches cannot move
    assert local_mi(0.0, 0.0, 0.0) == 0.0


def test_global_composition_oracles():
    rng = np.random.default_rng(42)
    for _ in range(50):
        query, gamma = _random_query(rng)
        assert global_sur(query, gamma) == pytest.approx(
            _loop_oracle(query, gamma, "sur"), abs=1e-12)
        assert global_mi(query, gamma) == pytest.approx(
            _loop_oracle(query, gamma, "mi"), abs=1e-12)
        assert eavc(query, gamma, 2.5) == pytest.approx(
            _loop_oracle(query, gamma, "eavc", 2.5), abs=1e-12)


def test_single_reference_point_reduces_to_local():
    rng = np.random.default_rng(43)
    for _ in range(50):
        mu = rng.normal(0, 2)
        var = rng.uniform(0.05, 4.0)
        gamma = rng.normal(0, 1)
        q1 = PosteriorQuery(np.array([mu]), np.array([var]), mu, var,
                            np.array([var]))
        sd = np.sqrt(var)
        assert global_sur(q1, gamma) == pytest.approx(
            local_sur(mu, sd, gamma), abs=1e-12)
        assert global_mi(q1, gamma) == pytest.approx(
            local_mi(mu, sd, gamma), abs=1e-12)
        # EAVC with C=1 equals the absolute local membership change
        pi_1, pi_0, p1 = lookahead_posteriors(
            PosteriorQuery(mu, var, mu, var, var), gamma)
        pi_now = level_set_posterior(mu, sd, gamma)
        expected = p1 * abs(pi_now - pi_1) + (1 - p1) * abs(pi_now - pi_0)
        assert eavc(q1, gamma, 1.0) == pytest.approx(expected, abs=1e-12)


def test_eavc_forced_arithmetic():
    got = _eavc_value(np.array([0.5]), np.array([0.2]), np.array([0.8]),
                      0.5, 1.0)
    assert got == pytest.approx(0.3, abs=1e-15)


def test_eavc_volume_constant_scales_value():
    rng = np.random.default_rng(44)
    query, gamma = _random_query(rng)
    assert eavc(query, gamma, 3.0) == pytest.approx(
        3.0 * eavc(query, gamma, 1.0), rel=1e-12)
    with pytest.raises(DomainError):
        eavc(query, gamma, 0.0)


def test_zero_information_null():
    rng = np.random.default_rng(45)
    for _ in range(100):
        n = 20
        query = PosteriorQuery(
            mu_q=rng.normal(0, 2, n), var_q=rng.uniform(0.05, 4, n),
            mu_star=rng.normal(0, 2), var_star=rng.uniform(0.05, 4),
            cov_qstar=np.zeros(n))
        gamma = rng.normal(0, 1)
        assert abs(global_sur(query, gamma)) <= 1e-12
        assert abs(global_mi(query, gamma)) <= 1e-12
        assert abs(eavc(query, gamma, 1.0)) <= 1e-12
        assert local_sur(query.mu_star, 0.0, gamma) == 0.0
        assert local_mi(query.mu_star, 0.0, gamma) == 0.0


@given(st.floats(-4, 4), st.floats(0.01, 3), st.floats(-4, 4),
       st.floats(0.01, 3), st.floats(-0.999, 0.999), st.floats(-3, 3))
@settings(max_examples=300)
def test_lookahead_family_nonnegative(mu_q, sd_q, mu_s, sd_s, rho, gamma):
    query = PosteriorQuery(mu_q, sd_q ** 2, mu_s, sd_s ** 2,
                           rho * sd_q * sd_s)
    assert global_sur(query, gamma) >= -1e-9
    assert global_mi(query, gamma) >= -1e-9
    assert eavc(query, gamma, 1.0) >= 0.0
    assert local_sur(mu_s, sd_s, gamma) >= -1e-9
    assert local_mi(mu_s, sd_s, gamma) >= -1e-9


def test_permutation_invariance():
    rng = np.random.default_rng(46)
    query, gamma = _random_query(rng, n_ref=40)
    perm = rng.permutation(40)
    shuffled = PosteriorQuery(
        mu_q=np.asarray(query.mu_q)[perm],
        var_q=np.asarray(query.var_q)[perm],
        mu_star=query.mu_star, var_star=query.var_star,
        cov_qstar=np.asarray(query.cov_qstar)[perm])
    assert global_sur(query, gamma) == pytest.approx(
        global_sur(shuffled, gamma), abs=1e-12)
    assert global_mi(query, gamma) == pytest.approx(
        global_mi(shuffled, gamma), abs=1e-12)
    assert eavc(query, gamma, 1.0) == pytest.approx(
        eavc(shuffled, gamma, 1.0), abs=1e-12)


def test_batched_candidates_match_per_candidate_calls():
    rng = np.random.default_rng(47)
    n_cand, n_ref = 7, 11
    var_q = rng.uniform(0.05, 4, (n_cand, n_ref))
    var_s = rng.uniform(0.05, 4, (n_cand, 1))
    rho = rng.uniform(-0.9, 0.9, (n_cand, n_ref))
    query = PosteriorQuery(
        mu_q=rng.normal(0, 2, (n_cand, n_ref)), var_q=var_q,
        mu_star=rng.normal(0, 2, (n_cand, 1)), var_star=var_s,
        cov_qstar=rho * np.sqrt(var_q * var_s))
    gamma = 0.3
    batched = global_mi(query, gamma)
    assert batched.shape == (n_cand,)
    for i in range(n_cand):
        qi = PosteriorQuery(
            query.mu_q[i], query.var_q[i], query.mu_star[i, 0],
            query.var_star[i, 0], query.cov_qstar[i])
        assert batched[i] == pytest.approx(global_mi(qi, gamma), abs=1e-13)


# ---------------------------------------------------------------------------
# dispatcher
# ---------------------------------------------------------------------------

def test_evaluate_dispatch_matches_direct_calls():
    rng = np.random.default_rng(48)
    query, _ = _random_query(rng)
    theta = 0.75
    gamma = gamma_from_theta(theta)
    mu, sd = query.mu_star, np.sqrt(query.var_star)
    cases = {
        "GlobalSUR": global_sur(query, gamma),
        "GlobalMI": global_mi(query, gamma),
        "EAVC": eavc(query, gamma, 2.0),
        "LocalSUR": local_sur(mu, sd, gamma),
        "LocalMI": local_mi(mu, sd, gamma),
        "StraddleZ": straddle_z(mu, sd, theta, 1.96),
        "BALV": balv(mu, sd),
        "BALD": bald(mu, sd),
    }
    for tag, expected in cases.items():
        kind = AcquisitionKind(tag)
        got = evaluate(kind, query, theta, gamma, volume_constant=2.0)
        assert got == pytest.approx(expected, abs=1e-14), tag


def test_evaluate_rejects_quasirandom():
    query = PosteriorQuery(0.0, 1.0, 0.0, 1.0, 0.5)
    with pytest.raises(ConfigError):
        evaluate(AcquisitionKind("QuasiRandom"), query, 0.5, 0.0)


def test_evaluate_eavc_requires_volume_constant():
    query = PosteriorQuery(np.zeros(3), np.ones(3), 0.0, 1.0, 0.5 * np.ones(3))
    with pytest.raises(ConfigError):
        evaluate(AcquisitionKind("EAVC"), query, 0.5, 0.0)
