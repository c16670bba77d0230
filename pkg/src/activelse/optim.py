"""Quasi-random streams and acquisition maximization over a box.

The maximizer is a two-stage scheme: score a scrambled low-discrepancy
candidate set, then refine the best few candidates by projected gradient
ascent with central finite differences. Refinement only ever accepts
improving steps, so the returned point can never score below the best raw
candidate. The ``QuasiRandom`` tag bypasses the model entirely and returns
the next point of a caller-owned stream.

Models are consumed through two methods:

``marginals(points)``
    latent mean and variance at each row of ``points``.
``posterior_batch(query_points, candidates)``
    a ``PosteriorQuery`` whose fields broadcast to [candidates x queries].
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .acquisition import GLOBAL_TAGS, AcquisitionKind, ReferenceSet, evaluate
from .errors import ConfigError, DomainError, OptimError
from .lookahead import PosteriorQuery, gamma_from_theta

MAX_SOBOL_DIM = 21

_STEP_LADDER = np.array([0.08, 0.04, 0.02, 0.01, 0.005])


class SobolStream:
    """Sequential Sobol generator with a persistent position counter.

    The underlying sequence's leading zero point is skipped, so an
    unscrambled 1-d stream starts 0.5, 0.75, 0.25, matching the classic
    radical-inverse ordering. Draws are deterministic given (seed, counter):
    splitting one draw into several yields the same points.
    """

    def __init__(self, dimension, seed=None, scramble=True):
        if not isinstance(dimension, (int, np.integer)) or isinstance(dimension, bool):
            raise ConfigError("dimension must be an integer")
        if dimension < 1 or dimension > MAX_SOBOL_DIM:
            raise ConfigError(
                f"dimension {dimension} outside the supported direction-number "
                f"table (1..{MAX_SOBOL_DIM})")
        self.dimension = int(dimension)
        self.seed = seed
        self.scramble = bool(scramble)
        self.counter = 0
        self._gen = qmc.Sobol(d=self.dimension, scramble=self.scramble,
                              seed=self.seed)
        self._gen.fast_forward(1)

    def draw(self, n):
        """Return the next ``n`` points as an (n, d) array in [0, 1)."""
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
            raise DomainError("n must be a positive integer")
        pts = self._gen.random(int(n))
        self.counter += int(n)
        return pts


def sobol_draw(stream, n):
    """Advance ``stream`` by ``n`` points. Functional alias for stream.draw."""
    return stream.draw(n)


@dataclass(frozen=True)
class OptimBudget:
    """Knobs of the candidate-then-refine maximizer.

    fd_step_frac is the central-difference step as a fraction of each
    coordinate's range.
    """

    raw_candidates: int = 512
    multistarts: int = 8
    refine_iters: int = 32
    fd_step_frac: float = 1e-4

    def __post_init__(self):
        if self.raw_candidates < 1 or self.multistarts < 1:
            raise ConfigError("raw_candidates and multistarts must be >= 1")
        if self.refine_iters < 0:
            raise ConfigError("refine_iters must be >= 0")
        if not (np.isfinite(self.fd_step_frac) and self.fd_step_frac > 0):
            raise ConfigError("fd_step_frac must be positive and finite")


def _validated_box(bounds):
    box = np.asarray(bounds, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
        raise ConfigError("bounds must be a sequence of (low, high) pairs")
    if not np.all(np.isfinite(box)):
        raise ConfigError("bounds must be finite")
    if not np.all(box[:, 1] > box[:, 0]):
        raise ConfigError("each bound must satisfy low < high")
    return box[:, 0], box[:, 1]


def _acquisition_values(kind, model, refset, points, theta, gamma):
    """Score each row of ``points``; non-finite output is an OptimError."""
    if kind.tag in GLOBAL_TAGS:
        query = model.posterior_batch(refset.points, points)
        vals = evaluate(kind, query, theta, gamma,
                        volume_constant=refset.volume_constant)
    else:
        mu, var = model.marginals(points)
        mu = np.asarray(mu, dtype=float)
        var = np.asarray(var, dtype=float)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(var))
                and np.all(var >= 0)):
            bad = ~(np.isfinite(mu) & np.isfinite(var) & (var >= 0))
            i = int(np.argmax(bad))
            raise OptimError(
                "model returned an unusable marginal",
                diagnostics={"index": i, "point": np.asarray(points)[i],
                             "mu": float(mu.ravel()[i]) if mu.size else None})
        query = PosteriorQuery(mu, var, mu, var, var)
        vals = evaluate(kind, query, theta, gamma)
    vals = np.atleast_1d(np.asarray(vals, dtype=float))
    if not np.all(np.isfinite(vals)):
        i = int(np.argmax(~np.isfinite(vals)))
        raise OptimError(
            "non-finite acquisition value",
            diagnostics={"index": i, "point": np.asarray(points)[i],
                         "value": float(vals[i]), "tag": kind.tag})
    return vals


def maximize(kind, model, refset, bounds, budget=None, *, theta, seed=0,
             qr_stream=None):
    """Return an in-bounds point maximizing the acquisition.

    Raw candidates come from a scrambled stream constructed with ``seed``;
    pass a live ``qr_stream`` for the QuasiRandom tag so successive calls
    continue one sequence.
    """
    if not isinstance(kind, AcquisitionKind):
        kind = AcquisitionKind(kind)
    lo, hi = _validated_box(bounds)
    d = lo.shape[0]
    span = hi - lo

    if kind.tag == "QuasiRandom":
        stream = qr_stream if qr_stream is not None else SobolStream(d, seed=seed)
        if stream.dimension != d:
            raise ConfigError(
                f"stream dimension {stream.dimension} does not match bounds ({d})")
        return lo + stream.draw(1)[0] * span

    if not (np.isfinite(theta) and 0.0 < theta < 1.0):
        raise ConfigError("theta must lie strictly inside (0, 1)")
    if budget is None:
        budget = OptimBudget()
    gamma = gamma_from_theta(theta)

    raw = lo + SobolStream(d, seed=seed).draw(budget.raw_candidates) * span
    raw_vals = _acquisition_values(kind, model, refset, raw, theta, gamma)

    n_starts = min(budget.multistarts, budget.raw_candidates)
    order = np.argsort(-raw_vals, kind="stable")
    starts = order[:n_starts]
    X = raw[starts].copy()
    fX = raw_vals[starts].copy()

    h = budget.fd_step_frac * span
    eye = np.eye(d)
    active = np.ones(n_starts, dtype=bool)
    for _ in range(budget.refine_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = X[idx]
        plus = np.clip(xa[:, None, :] + h * eye, lo, hi)
        minus = np.clip(xa[:, None, :] - h * eye, lo, hi)
        m = idx.size
        batch = np.concatenate([plus.reshape(-1, d), minus.reshape(-1, d)])
        vals = _acquisition_values(kind, model, refset, batch, theta, gamma)
        f_plus = vals[:m * d].reshape(m, d)
        f_minus = vals[m * d:].reshape(m, d)
        # clipping can shrink a stencil arm at the boundary; use the spacing
        # actually realized
        spacing = np.diagonal(plus - minus, axis1=1, axis2=2)
        grad = np.where(spacing > 0,
                        (f_plus - f_minus) / np.where(spacing > 0, spacing, 1.0),
                        0.0)
        # steepest ascent in box-normalized coordinates
        g_unit = grad * span
        norm = np.linalg.norm(g_unit, axis=1, keepdims=True)
        moving = norm.ravel() > 0
        direction = np.where(norm > 0, g_unit / np.where(norm > 0, norm, 1.0), 0.0)
        props = np.clip(
            xa[None, :, :]
            + _STEP_LADDER[:, None, None] * (direction * span)[None, :, :],
            lo, hi)
        pvals = _acquisition_values(
            kind, model, refset, props.reshape(-1, d), theta, gamma
        ).reshape(len(_STEP_LADDER), m)
        improves = pvals > fX[idx][None, :]
        took = improves.any(axis=0)
        # ladder is descending, so argmax picks the longest improving step
        pick = np.argmax(improves, axis=0)
        cols = np.arange(m)
        accepted = took & moving
        sel = idx[accepted]
        X[sel] = props[pick[accepted], cols[accepted], :]
        fX[sel] = pvals[pick[accepted], cols[accepted]]
        active[idx[~accepted]] = False

    # acceptance was monotone from the raw top, so fX >= raw max holds by
    # construction
    best = int(np.argmax(fX))
    return X[best].copy()
