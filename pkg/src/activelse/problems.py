"""Synthetic ground-truth problems with Bernoulli sampling.

Each problem exposes the true success probability z(x) over a box, the
target threshold theta, and where one exists a latent function whose probit
(or 2AFC-squashed probit) gives z. Membership is sublevel: a point belongs
to the target set when z(x) <= theta.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .specfun import std_normal_cdf

_BOUNDS_SLACK = 1e-12

_H6_ALPHA = np.array([2.0, 2.2, 2.8, 3.0])
_H6_A = np.array([
    [8.0, 3.0, 10.0, 3.5, 1.7, 6.0],
    [0.5, 8.0, 10.0, 1.0, 6.0, 9.0],
    [3.0, 3.5, 1.7, 8.0, 10.0, 6.0],
    [10.0, 6.0, 0.5, 8.0, 1.0, 9.0],
])
_H6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])

_DENOM_GUARD = 1e-9


@dataclass(frozen=True)
class Problem:
    """A named ground truth over a box.

    prob_fn maps an (n, d) array to n probabilities; latent_fn, when the
    problem defines one, maps the same to the latent values feeding the
    squash. prob_floor is 0.5 for 2AFC tasks and 0 otherwise.
    """

    name: str
    bounds: tuple
    theta: float
    prob_fn: object = field(repr=False)
    latent_fn: object = field(default=None, repr=False)
    prob_floor: float = 0.0

    @property
    def dim(self):
        return len(self.bounds)

    def _validated(self, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DomainError(
                f"{self.name} expects {self.dim}-d points, got shape {arr.shape}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        if np.any(pts < lo - _BOUNDS_SLACK) or np.any(pts > hi + _BOUNDS_SLACK):
            raise DomainError(f"point outside the {self.name} domain")
        return pts, single

    def true_probability(self, x):
        pts, single = self._validated(x)
        z = np.asarray(self.prob_fn(pts), dtype=float)
        return float(z[0]) if single else z

    def latent(self, x):
        if self.latent_fn is None:
            raise ConfigError(f"{self.name} does not define a latent function")
        pts, single = self._validated(x)
        f = np.asarray(self.latent_fn(pts), dtype=float)
        return float(f[0]) if single else f

    def below_threshold(self, x):
        """True wherever z(x) <= theta (target-set membership)."""
        z = self.true_probability(x)
        return z <= self.theta


def _hartmann6_latent(pts):
    diffs = pts[:, None, :] - _H6_P[None, :, :]
    expo = np.einsum("nij,ij->ni", diffs * diffs, _H6_A)
    h = 1.0 - np.exp(-expo) @ _H6_ALPHA
    return 3.0 * h - 2.0


def _hartmann6_prob(pts):
    return std_normal_cdf(_hartmann6_latent(pts))


def _discrim2_latent(pts):
    x1, x2 = pts[:, 0], pts[:, 1]
    return (1.0 + x2) / (0.05 + 0.4 * x1 * x1 * (0.2 * x1 - 1.0) ** 2)


def _discrim2_prob(pts):
    # the latent is nonnegative over the box, so the plain probit already
    # floors the output at 0.5; an extra 2AFC squash would shift the range
    # to [0.75, 1] and collapse the theta=0.75 target set to the x2 = -1 edge
    return std_normal_cdf(_discrim2_latent(pts))


def _discrim8_offset(pts):
    x2, x3, x4 = pts[:, 1], pts[:, 2], pts[:, 3]
    x6, x7, x8 = pts[:, 5], pts[:, 6], pts[:, 7]
    phase = x2 * x8
    lobe = 0.5 * x3 * (1.0 - np.cos(0.6 * np.pi * phase + x7)) + x4
    gain = 2.0 - x6 * (1.0 + np.sin(0.3 * np.pi * phase + x7))
    return lobe * gain - 1.0


def _discrim8_prob(pts):
    c = _discrim8_offset(pts)
    x1 = pts[:, 0]
    denom = pts[:, 4] * (2.0 + c)
    # degenerate scale: the probit argument diverges, so use its limit
    singular = np.abs(denom) <= _DENOM_GUARD
    arg = (x1 - c) / np.where(singular, 1.0, denom)
    smooth = 0.5 + 0.5 * std_normal_cdf(arg)
    step = 0.5 + 0.5 * (x1 >= c)
    return np.where(singular, step, smooth)


_REGISTRY = {
    "hartmann6_binary": Problem(
        name="hartmann6_binary",
        bounds=tuple((0.0, 1.0) for _ in range(6)),
        theta=0.5,
        prob_fn=_hartmann6_prob,
        latent_fn=_hartmann6_latent,
        prob_floor=0.0,
    ),
    "discrim_lowdim": Problem(
        name="discrim_lowdim",
        bounds=((-1.0, 1.0), (-1.0, 1.0)),
        theta=0.75,
        prob_fn=_discrim2_prob,
        latent_fn=_discrim2_latent,
        prob_floor=0.5,
    ),
    "discrim_highdim": Problem(
        name="discrim_highdim",
        bounds=tuple((-1.0, 1.0) for _ in range(8)),
        theta=0.75,
        prob_fn=_discrim8_prob,
        latent_fn=None,
        prob_floor=0.5,
    ),
}

PROBLEM_NAMES = tuple(sorted(_REGISTRY))


def get_problem(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}"
        ) from None


def sample(problem, x, rng):
    """Bernoulli outcomes at x, one draw per point, from the given generator."""
    z = problem.true_probability(x)
    if np.ndim(z) == 0:
        return int(rng.random() < z)
    return (rng.random(len(z)) < z).astype(int)
