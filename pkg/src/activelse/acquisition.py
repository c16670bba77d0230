"""Sampling strategies: utilities scoring a candidate observation point.

Two families:

* Look-ahead acquisitions (LocalSUR, GlobalSUR, LocalMI, GlobalMI, EAVC):
  the drop in a posterior cost functional expected from one more binary
  observation at the candidate. Each is composed from the exact two-branch
  look-ahead posteriors — value now minus the probability-weighted value
  after observing y = 1 or y = 0 — never from standalone algebraic forms,
  so nonnegativity and the zero-information null hold by construction.
* Point-wise baselines (StraddleZ, BALV, BALD): classic active-learning
  scores of the response-probability posterior at the candidate alone.

QuasiRandom is a member of the kind enum but not a scalar utility; the
optimizer short-circuits it to the next quasi-random point.

All value functions are pure, vectorized over numpy arrays, and reduce
reference-set axes in a fixed order for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .errors import ConfigError, DomainError
from .lookahead import (
    STD_FLOOR,
    PosteriorQuery,
    _branch_posteriors,
    z_moments,
)
from .specfun import std_normal_cdf

__all__ = [
    "ACQUISITION_TAGS",
    "LOOKAHEAD_TAGS",
    "GLOBAL_TAGS",
    "AcquisitionKind",
    "ReferenceSet",
    "binary_entropy",
    "straddle_z",
    "local_sur",
    "global_sur",
    "local_mi",
    "global_mi",
    "eavc",
    "balv",
    "bald",
    "evaluate",
]

_LN2 = np.log(2.0)

ACQUISITION_TAGS = (
    "StraddleZ", "LocalSUR", "GlobalSUR", "LocalMI", "GlobalMI",
    "EAVC", "BALV", "BALD", "QuasiRandom",
)
LOOKAHEAD_TAGS = ("LocalSUR", "GlobalSUR", "LocalMI", "GlobalMI", "EAVC")
GLOBAL_TAGS = ("GlobalSUR", "GlobalMI", "EAVC")

_DEFAULT_BETA = 1.96

# Gauss-Hermite rule for the expected-entropy integral in BALD.
_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(30)
_GH_WEIGHTS = _GH_WEIGHTS / np.sqrt(np.pi)


@dataclass(frozen=True)
class AcquisitionKind:
    """A strategy tag plus its strategy-specific parameter.

    ``beta`` is meaningful only for StraddleZ (exploration width, default
    1.96); supplying it with any other tag is a configuration error.
    """

    tag: str
    beta: float | None = None

    def __post_init__(self):
        if self.tag not in ACQUISITION_TAGS:
            raise ConfigError(
                f"unknown acquisition {self.tag!r}; expected one of "
                f"{', '.join(ACQUISITION_TAGS)}")
        if self.tag == "StraddleZ":
            beta = _DEFAULT_BETA if self.beta is None else float(self.beta)
            if not np.isfinite(beta) or beta <= 0.0:
                raise ConfigError("beta must be a positive finite real")
            object.__setattr__(self, "beta", beta)
        elif self.beta is not None:
            raise ConfigError(
                f"beta applies only to StraddleZ, not {self.tag}")


@dataclass(frozen=True)
class ReferenceSet:
    """Quasi-random points over which global acquisitions aggregate.

    ``volume_constant`` is Vol(bounds) / |G|, the weight turning a sum of
    membership probabilities into an estimated sublevel-set volume.
    """

    points: np.ndarray
    volume_constant: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DomainError("reference set must be a nonempty n x d matrix")
        if not np.all(np.isfinite(pts)):
            raise DomainError("reference points must be finite")
        c = float(self.volume_constant)
        if not np.isfinite(c) or c <= 0.0:
            raise DomainError("volume_constant must be positive and finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "volume_constant", c)

    @classmethod
    def from_bounds(cls, points, bounds):
        pts = np.asarray(points, dtype=float)
        lo, hi = np.asarray(bounds, dtype=float).T
        volume = float(np.prod(hi - lo))
        return cls(points=pts, volume_constant=volume / pts.shape[0])

    def __len__(self):
        return self.points.shape[0]


def binary_entropy(p):
    """H_b(p) in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    return (_sp.entr(p) + _sp.entr(1.0 - p)) / _LN2


def _min_branch(p):
    # min(p, 1-p) without branching
    return 0.5 - np.abs(p - 0.5)


def _as_value(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def _self_query_branches(mu, sigma, gamma):
    """Look-ahead branches when the query point is the candidate itself."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0.0):
        raise DomainError("sigma must be non-negative")
    var = sigma * sigma
    return _branch_posteriors(mu, var, mu, var, var, gamma)


def straddle_z(mu, sigma, theta, beta=_DEFAULT_BETA):
    """Straddle score on the response probability: -|E[z] - theta| + beta sd[z]."""
    mean, var = z_moments(mu, sigma)
    return _as_value(-np.abs(np.asarray(mean) - theta)
                     + beta * np.sqrt(np.asarray(var)))


def local_sur(mu, sigma, gamma):
    """Expected drop in min(pi, 1-pi) at the candidate itself."""
    pi_1, pi_0, p1, pi_now = _self_query_branches(mu, sigma, gamma)
    return _as_value(_min_branch(pi_now)
                     - p1 * _min_branch(pi_1)
                     - (1.0 - p1) * _min_branch(pi_0))


def local_mi(mu, sigma, gamma):
    """Mutual information between the response and membership at the candidate."""
    pi_1, pi_0, p1, pi_now = _self_query_branches(mu, sigma, gamma)
    return _as_value(binary_entropy(pi_now)
                     - p1 * binary_entropy(pi_1)
                     - (1.0 - p1) * binary_entropy(pi_0))


def _query_branches(query: PosteriorQuery, gamma):
    # the trailing axis is the reference-set axis; scalar queries get one
    out = _branch_posteriors(
        query.mu_q, query.var_q, query.mu_star, query.var_star,
        query.cov_qstar, gamma)
    return tuple(np.atleast_1d(v) for v in out)


def global_sur(query: PosteriorQuery, gamma):
    """Expected drop in the summed misclassification measure over the set.

    Sums the per-reference-point look-ahead reduction of min(pi, 1-pi);
    no volume weighting, since only the argmax matters.
    """
    pi_1, pi_0, p1, pi_now = _query_branches(query, gamma)
    per_point = (_min_branch(pi_now)
                 - p1 * _min_branch(pi_1)
                 - (1.0 - p1) * _min_branch(pi_0))
    return _as_value(np.sum(per_point, axis=-1))


def global_mi(query: PosteriorQuery, gamma):
    """Expected drop in summed membership entropy over the reference set."""
    pi_1, pi_0, p1, pi_now = _query_branches(query, gamma)
    per_point = (binary_entropy(pi_now)
                 - p1 * binary_entropy(pi_1)
                 - (1.0 - p1) * binary_entropy(pi_0))
    return _as_value(np.sum(per_point, axis=-1))


def _eavc_value(pi_now, pi_1, pi_0, p1, volume_constant):
    """p1 |V - V1| + (1-p1) |V - V0| with V = C sum(pi).

    ``p1`` is the candidate's response probability with the reference-set
    axis already removed.
    """
    v_now = volume_constant * np.sum(pi_now, axis=-1)
    v_1 = volume_constant * np.sum(pi_1, axis=-1)
    v_0 = volume_constant * np.sum(pi_0, axis=-1)
    return p1 * np.abs(v_now - v_1) + (1.0 - p1) * np.abs(v_now - v_0)


def eavc(query: PosteriorQuery, gamma, volume_constant):
    """Expected absolute change of the estimated sublevel-set volume.

    Reported in volume units: the reference-set sums carry
    Vol(bounds)/|G|.
    """
    c = float(volume_constant)
    if not np.isfinite(c) or c <= 0.0:
        raise DomainError("volume_constant must be positive and finite")
    pi_1, pi_0, p1, pi_now = _query_branches(query, gamma)
    # p1 is constant along the reference axis by construction
    return _as_value(_eavc_value(pi_now, pi_1, pi_0, p1[..., 0], c))


def balv(mu, sigma):
    """Variance of the response probability at the candidate."""
    return z_moments(mu, sigma)[1]


def bald(mu, sigma):
    """Mutual information between the response and the latent value.

    H_b(E[z]) minus the expected entropy E_f[H_b(Phi(f))], the latter by
    30-node Gauss-Hermite quadrature over the latent Gaussian.
    """
    mu_arr = np.asarray(mu, dtype=float)
    sigma_arr = np.asarray(sigma, dtype=float)
    if np.any(sigma_arr < 0.0):
        raise DomainError("sigma must be non-negative")
    if not (np.all(np.isfinite(mu_arr)) and np.all(np.isfinite(sigma_arr))):
        raise DomainError("mu and sigma must be finite")
    mean, _ = z_moments(mu_arr, sigma_arr)
    f = (mu_arr[..., None]
         + np.sqrt(2.0) * sigma_arr[..., None] * _GH_NODES)
    expected_entropy = binary_entropy(std_normal_cdf(f)) @ _GH_WEIGHTS
    return _as_value(binary_entropy(np.asarray(mean)) - expected_entropy)


def evaluate(kind: AcquisitionKind, query: PosteriorQuery, theta, gamma,
             volume_constant=None):
    """Dispatch a scalar acquisition over a posterior query.

    Global kinds reduce the trailing reference-set axis of ``query``; local
    kinds use only the candidate moments. ``theta`` is the probability-scale
    threshold (StraddleZ), ``gamma`` its latent counterpart (everything
    else). QuasiRandom has no scalar value and is rejected here.
    """
    if kind.tag == "QuasiRandom":
        raise ConfigError(
            "QuasiRandom is not a scalar acquisition; the optimizer "
            "short-circuits it")
    if kind.tag in GLOBAL_TAGS:
        if kind.tag == "GlobalSUR":
            return global_sur(query, gamma)
        if kind.tag == "GlobalMI":
            return global_mi(query, gamma)
        if volume_constant is None:
            raise ConfigError("EAVC requires a volume constant")
        return eavc(query, gamma, volume_constant)
    mu = np.asarray(query.mu_star, dtype=float)
    sigma = np.sqrt(np.asarray(query.var_star, dtype=float))
    if kind.tag == "StraddleZ":
        return straddle_z(mu, sigma, theta, kind.beta)
    if kind.tag == "LocalSUR":
        return local_sur(mu, sigma, gamma)
    if kind.tag == "LocalMI":
        return local_mi(mu, sigma, gamma)
    if kind.tag == "BALV":
        return balv(mu, sigma)
    return bald(mu, sigma)
