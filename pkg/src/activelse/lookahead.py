"""Closed-form level-set and response posteriors under a probit link.

Latent model: f has a Gaussian posterior; a binary response at x is
y ~ Bernoulli(Phi(f(x))). The set of interest is {x : f(x) <= gamma}, with
the user-facing threshold theta on the probability scale mapped through
gamma = Phi^{-1}(theta). Everything here is a deterministic function of
Gaussian posterior moments, vectorized over numpy arrays with broadcasting.

`lookahead_posteriors` gives the exact one-step-ahead membership
probabilities: P(f(x_q) <= gamma) after additionally observing the binary
response at a candidate x_star, separately for each response value. The
joint event reduces to a bivariate normal orthant because the response
noise and the latent pair are jointly Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .specfun import bvn_cdf, owens_t, std_normal_cdf, std_normal_quantile

__all__ = [
    "STD_FLOOR",
    "PosteriorQuery",
    "LookaheadTerms",
    "gamma_from_theta",
    "level_set_posterior",
    "z_moments",
    "prob_y1",
    "lookahead_terms",
    "lookahead_posteriors",
]

# Lower bound applied to posterior standard deviations before any division;
# inducing-point posteriors can numerically collapse at training points.
STD_FLOOR = 1e-6

# Raw conditional probabilities may leave [0, 1] by a few ulps of
# cancellation; anything beyond this window indicates broken inputs.
_PROB_SLACK = 1e-7

# Response probabilities this close to 0 or 1 make one branch of the
# look-ahead conditionally meaningless; it is replaced by the current value.
_DEGENERATE_P = 1e-12

# Cross-covariances may exceed the Cauchy-Schwarz bound by roundoff only.
_COV_SLACK = 1e-9


def _validate(name, x, nonneg=False):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if nonneg and np.any(arr < 0.0):
        raise DomainError(f"{name} must be non-negative")
    return arr


def _scalar_like(result, *inputs):
    if all(np.isscalar(v) or np.ndim(v) == 0 for v in inputs):
        return float(result)
    return result


def gamma_from_theta(theta):
    """Latent threshold gamma = Phi^{-1}(theta) for a probability target."""
    return std_normal_quantile(theta)


@dataclass(frozen=True)
class PosteriorQuery:
    """Latent posterior moments at query points plus one candidate.

    The only surrogate surface the acquisition layer sees: marginal means
    and variances of f at the query points and at the candidate, and the
    cross-covariance of each query point with the candidate. Fields may be
    scalars or broadcastable arrays (e.g. query axes [G] or [C, G] with
    candidate moments shaped [C, 1]).
    """

    mu_q: np.ndarray | float
    var_q: np.ndarray | float
    mu_star: np.ndarray | float
    var_star: np.ndarray | float
    cov_qstar: np.ndarray | float

    def __post_init__(self):
        mu_q = _validate("mu_q", self.mu_q)
        var_q = _validate("var_q", self.var_q, nonneg=True)
        mu_s = _validate("mu_star", self.mu_star)
        var_s = _validate("var_star", self.var_star, nonneg=True)
        cov = _validate("cov_qstar", self.cov_qstar)
        bound = np.sqrt(var_q * var_s) + _COV_SLACK
        if np.any(np.abs(cov) > bound):
            raise DomainError(
                "cov_qstar violates the Cauchy-Schwarz bound beyond roundoff")
        object.__setattr__(self, "mu_q", _scalar_like(mu_q, self.mu_q))
        object.__setattr__(self, "var_q", _scalar_like(var_q, self.var_q))
        object.__setattr__(self, "mu_star", _scalar_like(mu_s, self.mu_star))
        object.__setattr__(self, "var_star", _scalar_like(var_s, self.var_star))
        object.__setattr__(self, "cov_qstar", _scalar_like(cov, self.cov_qstar))


@dataclass(frozen=True)
class LookaheadTerms:
    """The scalar bundle parameterizing every closed-form acquisition.

    a_star = mu_star / sqrt(1 + var_star); b_q = (gamma - mu_q) / sd_q;
    c_star = 1 / sqrt(1 + 2 var_star); z_qstar is the joint orthant
    probability P(y_star = 1, f(x_q) <= gamma); p1 = Phi(a_star).
    """

    a_star: np.ndarray | float
    b_q: np.ndarray | float
    c_star: np.ndarray | float
    z_qstar: np.ndarray | float
    p1: np.ndarray | float


def level_set_posterior(mu, sigma, gamma):
    """P(f(x) <= gamma) for a latent value with moments (mu, sigma^2)."""
    mu_arr = _validate("mu", mu)
    sigma_arr = _validate("sigma", sigma)
    if np.any(sigma_arr <= 0.0):
        raise DomainError("sigma must be strictly positive")
    gamma_arr = _validate("gamma", gamma)
    sd = np.maximum(sigma_arr, STD_FLOOR)
    return _scalar_like(
        std_normal_cdf((gamma_arr - mu_arr) / sd), mu, sigma, gamma)


def z_moments(mu, sigma):
    """Mean and variance of the response probability z = Phi(f).

    mean = Phi(a) with a = mu / sqrt(1 + sigma^2);
    variance = Phi(a) - Phi(a)^2 - 2 T(a, c) with c = 1 / sqrt(1 + 2 sigma^2),
    clamped at zero against roundoff. Always <= mean(1 - mean).
    """
    mu_arr = _validate("mu", mu)
    sigma_arr = _validate("sigma", sigma, nonneg=True)
    var = sigma_arr * sigma_arr
    a = mu_arr / np.sqrt(1.0 + var)
    c = 1.0 / np.sqrt(1.0 + 2.0 * var)
    p = np.asarray(std_normal_cdf(a))
    v = np.maximum(p - p * p - 2.0 * np.asarray(owens_t(a, c)), 0.0)
    # a deterministic latent has exactly zero response variance; the
    # closed form leaves ~1e-17 of cancellation noise there otherwise
    v = np.where(sigma_arr == 0.0, 0.0, v)
    return _scalar_like(p, mu, sigma), _scalar_like(v, mu, sigma)


def prob_y1(mu, sigma):
    """P(y = 1) for a binary response at a point with moments (mu, sigma^2)."""
    mu_arr = _validate("mu", mu)
    sigma_arr = _validate("sigma", sigma, nonneg=True)
    a = mu_arr / np.sqrt(1.0 + sigma_arr * sigma_arr)
    return _scalar_like(std_normal_cdf(a), mu, sigma)


def _core(mu_q, var_q, mu_star, var_star, cov_qstar, gamma):
    """Broadcast the moment arrays and form the look-ahead ingredients."""
    shape = np.broadcast_shapes(
        np.shape(mu_q), np.shape(var_q), np.shape(mu_star),
        np.shape(var_star), np.shape(cov_qstar), np.shape(gamma))
    mu_q_b = np.broadcast_to(np.asarray(mu_q, dtype=float), shape)
    var_q_b = np.broadcast_to(np.asarray(var_q, dtype=float), shape)
    mu_s_b = np.broadcast_to(np.asarray(mu_star, dtype=float), shape)
    var_s_b = np.broadcast_to(np.asarray(var_star, dtype=float), shape)
    cov_b = np.broadcast_to(np.asarray(cov_qstar, dtype=float), shape)
    gamma_b = np.broadcast_to(np.asarray(gamma, dtype=float), shape)

    sd_q = np.maximum(np.sqrt(var_q_b), STD_FLOOR)
    obs_scale = np.sqrt(1.0 + var_s_b)
    a_star = mu_s_b / obs_scale
    b_q = (gamma_b - mu_q_b) / sd_q
    corr = np.clip(-cov_b / (sd_q * obs_scale), -1.0, 1.0)

    p1 = np.asarray(std_normal_cdf(a_star))
    pi_now = np.asarray(std_normal_cdf(b_q))
    z_joint = np.asarray(bvn_cdf(a_star, b_q, corr))
    c_star = 1.0 / np.sqrt(1.0 + 2.0 * var_s_b)
    return shape, a_star, b_q, c_star, cov_b, p1, pi_now, z_joint


def lookahead_terms(query: PosteriorQuery, gamma) -> LookaheadTerms:
    """The (a_star, b_q, c_star, z_qstar, p1) bundle for a posterior query."""
    gamma_arr = _validate("gamma", gamma)
    _, a_star, b_q, c_star, _, p1, _, z_joint = _core(
        query.mu_q, query.var_q, query.mu_star, query.var_star,
        query.cov_qstar, gamma_arr)
    wrap = lambda v: _scalar_like(
        v, query.mu_q, query.var_q, query.mu_star, query.var_star,
        query.cov_qstar, gamma)
    return LookaheadTerms(
        a_star=wrap(a_star), b_q=wrap(b_q), c_star=wrap(c_star),
        z_qstar=wrap(z_joint), p1=wrap(p1))


def _branch_posteriors(mu_q, var_q, mu_star, var_star, cov_qstar, gamma):
    """Vectorized look-ahead branches plus the current membership value."""
    shape, _, _, _, cov_b, p1, pi_now, z_joint = _core(
        mu_q, var_q, mu_star, var_star, cov_qstar, gamma)

    with np.errstate(divide="ignore", invalid="ignore"):
        pi_one = z_joint / p1
        pi_zero = (pi_now - z_joint) / (1.0 - p1)

    # Response certain one way: the impossible branch keeps the current value.
    pi_zero = np.where(p1 > 1.0 - _DEGENERATE_P, pi_now, pi_zero)
    pi_one = np.where(p1 < _DEGENERATE_P, pi_now, pi_one)

    # Uninformative candidate: both branches equal the current value exactly.
    no_info = cov_b == 0.0
    pi_one = np.where(no_info, pi_now, pi_one)
    pi_zero = np.where(no_info, pi_now, pi_zero)

    bad = (
        (pi_one < -_PROB_SLACK) | (pi_one > 1.0 + _PROB_SLACK)
        | (pi_zero < -_PROB_SLACK) | (pi_zero > 1.0 + _PROB_SLACK)
        | ~np.isfinite(pi_one) | ~np.isfinite(pi_zero)
    )
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), shape) if shape else ()
        raise NumericError(
            "look-ahead membership probability left [0, 1] beyond roundoff "
            f"(first offender at index {idx}: "
            f"pi_one={np.broadcast_to(pi_one, shape)[idx]!r}, "
            f"pi_zero={np.broadcast_to(pi_zero, shape)[idx]!r})"
        )
    pi_one = np.clip(pi_one, 0.0, 1.0)
    pi_zero = np.clip(pi_zero, 0.0, 1.0)
    return pi_one, pi_zero, p1, pi_now


def lookahead_posteriors(query: PosteriorQuery, gamma):
    """Exact look-ahead membership posteriors for a candidate observation.

    Returns ``(pi_1, pi_0, p1)``: the membership probability at each query
    point given a positive / negative response at the candidate, and the
    marginal probability of the positive response. Satisfies the tower
    identity p1*pi_1 + (1-p1)*pi_0 = P(f(x_q) <= gamma).

    A cross-covariance of exactly zero short-circuits both branches to the
    marginal membership probability bit-for-bit, so a candidate carrying no
    information about a query point leaves its posterior untouched. When
    the candidate's response is numerically certain, the impossible branch
    likewise receives the marginal value rather than an indeterminate ratio.
    """
    gamma_arr = _validate("gamma", gamma)
    pi_one, pi_zero, p1, _ = _branch_posteriors(
        query.mu_q, query.var_q, query.mu_star, query.var_star,
        query.cov_qstar, gamma_arr)
    wrap = lambda v: _scalar_like(
        v, query.mu_q, query.var_q, query.mu_star, query.var_star,
        query.cov_qstar, gamma)
    return wrap(pi_one), wrap(pi_zero), wrap(p1)
