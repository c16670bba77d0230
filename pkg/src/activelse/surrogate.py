"""Variational probit classification GP on inducing points.

The latent prior is a zero-mean GP with an ARD RBF kernel. Inference keeps
a whitened Gaussian over the inducing values: with K_mm = L L^T and
q(v) = N(m_w, S_w), the inducing values are u = L v, which makes the prior
on v a standard normal and keeps the KL term well conditioned. Fitting
maximizes a penalized objective: Gauss-Hermite expected Bernoulli
log-likelihood minus the KL, plus smooth lognormal hyperpriors on the
kernel parameters. All prediction math runs in numpy on copies of the
fitted state; a model is immutable after fit.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from numpy.polynomial.hermite import hermgauss
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import ConfigError, DomainError, FitError
from .lookahead import PosteriorQuery

_GH_NODES_NP, _GH_WEIGHTS_NP = hermgauss(20)
_GH_WEIGHTS_NP = _GH_WEIGHTS_NP / math.sqrt(math.pi)

_JITTER_CEILING = 1e-2
_PATIENCE = 5
_BOUNDS_SLACK = 1e-9

CHECKPOINT_FORMAT_VERSION = 1

_threads_pinned = False


def _pin_threads():
    # full-batch fits on small matrices lose more to thread handoff than
    # they gain from BLAS parallelism
    global _threads_pinned
    if not _threads_pinned:
        torch.set_num_threads(1)
        _threads_pinned = True


@dataclass(frozen=True)
class SurrogateConfig:
    """Fitting knobs.

    Prior medians follow the box: lengthscale median is
    lengthscale_median_frac of each coordinate range, outputscale median is
    outputscale_median. A from-scratch fit learns kernel hyperparameters
    jointly with the variational state; a warm fit keeps the kernel fixed
    and moves only the variational state, which absorbs the newest
    observations at a fraction of the cost while the periodic scratch
    refits re-learn the kernel.
    """

    inducing: int = 100
    max_steps: int = 500
    learning_rate: float = 0.08
    warm_learning_rate: float = 0.002
    rel_tol: float = 1e-5
    jitter: float = 1e-6
    lengthscale_median_frac: float = 0.25
    lengthscale_prior_sigma: float = 1.0
    outputscale_median: float = 4.0
    outputscale_prior_sigma: float = 1.0

    def __post_init__(self):
        if self.inducing < 1 or self.max_steps < 1:
            raise ConfigError("inducing and max_steps must be >= 1")
        if not (self.learning_rate > 0 and self.warm_learning_rate > 0
                and self.rel_tol > 0 and self.jitter > 0):
            raise ConfigError("learning rates, rel_tol and jitter must be positive")


def refit_policy(iteration, period=10):
    """Refit mode for the given 1-based active-learning iteration."""
    if not isinstance(iteration, (int, np.integer)) or iteration < 1:
        raise ConfigError("iteration must be a positive integer")
    if not isinstance(period, (int, np.integer)) or period < 1:
        raise ConfigError("period must be a positive integer")
    return "from-scratch" if iteration % period == 0 else "warm"


def kmeans_centers(points, k, rng, restarts=10, max_iters=100):
    """Lloyd's algorithm, best inertia over seeded restarts.

    Assignment ties go to the lowest centroid index, and among equal-inertia
    restarts the earliest wins. An emptied cluster is reseeded on the point
    farthest from its current centroid.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    best_inertia = np.inf
    best = None
    for _ in range(restarts):
        centers = pts[rng.choice(n, size=k, replace=False)].copy()
        assign = np.full(n, -1)
        for _ in range(max_iters):
            d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
            new_assign = np.argmin(d2, axis=1)
            if np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for j in range(k):
                sel = assign == j
                if np.any(sel):
                    centers[j] = pts[sel].mean(axis=0)
                else:
                    centers[j] = pts[int(np.argmax(d2[np.arange(n), assign]))]
        inertia = float(((pts - centers[assign]) ** 2).sum())
        if inertia < best_inertia - 1e-12:
            best_inertia = inertia
            best = centers
    return best


def _ard_kernel_np(a, b, lengthscales, outputscale):
    sa = a / lengthscales
    sb = b / lengthscales
    d2 = (np.sum(sa * sa, axis=1)[:, None] + np.sum(sb * sb, axis=1)[None, :]
          - 2.0 * sa @ sb.T)
    return outputscale * np.exp(-0.5 * np.maximum(d2, 0.0))


def _chol_with_jitter(kmat, base_jitter, torch_mode=False):
    """Cholesky with escalating diagonal jitter; (factor, jitter_used)."""
    jitter = base_jitter
    eye = (torch.eye(kmat.shape[0], dtype=kmat.dtype) if torch_mode
           else np.eye(kmat.shape[0]))
    while jitter <= _JITTER_CEILING * (1.0 + 1e-12):
        try:
            if torch_mode:
                chol = torch.linalg.cholesky(kmat + jitter * eye)
                return chol, jitter
            chol = np.linalg.cholesky(kmat + jitter * eye)
            return chol, jitter
        except (RuntimeError, np.linalg.LinAlgError):
            jitter *= 10.0
    raise FitError(
        "covariance not positive definite at maximum jitter",
        diagnostics={"jitter_ceiling": _JITTER_CEILING, "m": kmat.shape[0]})


class GpModel:
    """Fitted posterior state plus prediction ops. Treat as immutable."""

    def __init__(self, train_x, train_y, bounds, inducing, lengthscales,
                 outputscale, whitened_mean, whitened_chol, jitter,
                 diagnostics):
        self.train_x = np.asarray(train_x, dtype=float)
        self.train_y = np.asarray(train_y, dtype=int)
        self.bounds = np.asarray(bounds, dtype=float)
        self.inducing = np.asarray(inducing, dtype=float)
        self.lengthscales = np.asarray(lengthscales, dtype=float)
        self.outputscale = float(outputscale)
        self.whitened_mean = np.asarray(whitened_mean, dtype=float)
        self.whitened_chol = np.asarray(whitened_chol, dtype=float)
        self.jitter = float(jitter)
        self.diagnostics = dict(diagnostics)
        kmm = _ard_kernel_np(self.inducing, self.inducing,
                             self.lengthscales, self.outputscale)
        self._chol_mm, self.jitter = _chol_with_jitter(kmm, self.jitter)
        self._ref_cache = None

    @property
    def num_inducing(self):
        return len(self.inducing)

    def _check_inside(self, pts):
        lo = self.bounds[:, 0] - _BOUNDS_SLACK
        hi = self.bounds[:, 1] + _BOUNDS_SLACK
        if np.any(pts < lo) or np.any(pts > hi):
            raise DomainError("query point outside the model's box")

    def _features(self, pts):
        """Whitened cross-features a(x) with a(x) a(x')^T reproducing the
        Nystrom term; rows align with pts."""
        kzx = _ard_kernel_np(self.inducing, pts, self.lengthscales,
                             self.outputscale)
        return solve_triangular(self._chol_mm, kzx, lower=True).T

    def _moments_from_features(self, feats):
        mean = feats @ self.whitened_mean
        smoothed = feats @ self.whitened_chol
        var = (self.outputscale - np.sum(feats * feats, axis=1)
               + np.sum(smoothed * smoothed, axis=1))
        return mean, np.maximum(var, 0.0), smoothed

    def marginals(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(pts)
        mean, var, _ = self._moments_from_features(self._features(pts))
        return mean, var

    def covariance(self, points):
        """Dense posterior covariance over the given points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(pts)
        feats = self._features(pts)
        _, _, smoothed = self._moments_from_features(feats)
        prior = _ard_kernel_np(pts, pts, self.lengthscales, self.outputscale)
        return prior - feats @ feats.T + smoothed @ smoothed.T

    def posterior(self, query_points, candidate):
        """Joint posterior of f at the queries against one candidate."""
        q = np.atleast_2d(np.asarray(query_points, dtype=float))
        c = np.asarray(candidate, dtype=float).reshape(1, -1)
        self._check_inside(q)
        self._check_inside(c)
        fq = self._features(q)
        fc = self._features(c)
        mu_q, var_q, sq = self._moments_from_features(fq)
        mu_s, var_s, sc = self._moments_from_features(fc)
        prior = _ard_kernel_np(q, c, self.lengthscales, self.outputscale)[:, 0]
        cov = prior - fq @ fc[0] + sq @ sc[0]
        same = np.all(q == c[0], axis=1)
        cov = np.where(same, var_s[0], cov)
        return PosteriorQuery(mu_q=mu_q, var_q=var_q, mu_star=float(mu_s[0]),
                              var_star=float(var_s[0]), cov_qstar=cov)

    def posterior_batch(self, query_points, candidates):
        """Joint posterior fields shaped [candidates x queries].

        The query-side features are cached by array identity, since one
        maximize call reuses a fixed reference set across many batches.
        """
        c = np.atleast_2d(np.asarray(candidates, dtype=float))
        self._check_inside(c)
        cache = self._ref_cache
        if cache is not None and cache[0] is query_points:
            q, fq, mu_q, var_q, sq = cache[1:]
        else:
            q = np.atleast_2d(np.asarray(query_points, dtype=float))
            self._check_inside(q)
            fq = self._features(q)
            mu_q, var_q, sq = self._moments_from_features(fq)
            self._ref_cache = (query_points, q, fq, mu_q, var_q, sq)
        fc = self._features(c)
        mu_s, var_s, sc = self._moments_from_features(fc)
        prior = _ard_kernel_np(c, q, self.lengthscales, self.outputscale)
        cov = prior - fc @ fq.T + sc @ sq.T
        return PosteriorQuery(
            mu_q=mu_q, var_q=var_q, mu_star=mu_s[:, None],
            var_star=var_s[:, None], cov_qstar=cov)


def _log_prior(log_ell, log_scale, log_ell_median, config):
    pen = -((log_ell - log_ell_median) ** 2
            / (2.0 * config.lengthscale_prior_sigma ** 2)) - log_ell
    pen_s = (-(log_scale - math.log(config.outputscale_median)) ** 2
             / (2.0 * config.outputscale_prior_sigma ** 2)) - log_scale
    return pen.sum() + pen_s


def fit(train_x, train_y, bounds, config=None, warm_start=None, seed=0):
    """Fit the model; pass warm_start to continue from a previous state.

    The returned model maximizes the penalized objective over the steps
    actually taken (best iterate, not last), so a warm refit on unchanged
    data can only match or improve the starting objective.
    """
    _pin_threads()
    if config is None:
        config = SurrogateConfig()
    x = np.atleast_2d(np.asarray(train_x, dtype=float))
    y = np.asarray(train_y, dtype=float).ravel()
    if x.size == 0 or len(x) != len(y):
        raise ConfigError("training data must be nonempty and aligned")
    if not np.all(np.isfinite(x)) or not np.all(np.isin(y, (0.0, 1.0))):
        raise ConfigError("inputs must be finite and outcomes binary")
    box = np.asarray(bounds, dtype=float)
    if box.shape != (x.shape[1], 2) or not np.all(box[:, 1] > box[:, 0]):
        raise ConfigError("bounds must be one (low, high) pair per column")

    n, d = x.shape
    span = box[:, 1] - box[:, 0]
    log_ell_median = np.log(config.lengthscale_median_frac * span)

    if warm_start is not None:
        inducing = warm_start.inducing.copy()
        init_ell = np.log(warm_start.lengthscales)
        init_scale = math.log(warm_start.outputscale)
        init_mean = warm_start.whitened_mean.copy()
        init_chol = warm_start.whitened_chol.copy()
        jitter0 = warm_start.jitter
        mode = "warm"
    else:
        m = min(config.inducing, n)
        rng = np.random.default_rng(seed)
        inducing = kmeans_centers(x, m, rng)
        init_ell = log_ell_median.copy()
        init_scale = math.log(config.outputscale_median)
        init_mean = np.zeros(m)
        init_chol = np.eye(m)
        jitter0 = config.jitter
        mode = "from-scratch"

    m = len(inducing)
    tdt = torch.float64
    tx = torch.as_tensor(x, dtype=tdt)
    tz = torch.as_tensor(inducing, dtype=tdt)
    signs = torch.as_tensor(2.0 * y - 1.0, dtype=tdt)
    nodes = torch.as_tensor(_GH_NODES_NP, dtype=tdt)
    weights = torch.as_tensor(_GH_WEIGHTS_NP, dtype=tdt)
    med = torch.as_tensor(log_ell_median, dtype=tdt)

    log_ell = torch.tensor(init_ell, dtype=tdt, requires_grad=True)
    log_scale = torch.tensor(float(init_scale), dtype=tdt, requires_grad=True)
    w_mean = torch.tensor(init_mean, dtype=tdt, requires_grad=True)
    init_lower = np.tril(init_chol, -1)
    init_diag = np.log(np.maximum(np.diag(init_chol), 1e-12))
    chol_lower = torch.tensor(init_lower, dtype=tdt, requires_grad=True)
    chol_logdiag = torch.tensor(init_diag, dtype=tdt, requires_grad=True)

    state = {"jitter": jitter0}

    def variational_part(alpha, scale):
        lw = torch.tril(chol_lower, -1) + torch.diag(torch.exp(chol_logdiag))
        mu = alpha.T @ w_mean
        smoothed = lw.T @ alpha
        var = torch.clamp(scale - (alpha * alpha).sum(0)
                          + (smoothed * smoothed).sum(0), min=1e-12)
        sd = torch.sqrt(var)
        latents = mu[:, None] + math.sqrt(2.0) * sd[:, None] * nodes[None, :]
        ell_term = (torch.special.log_ndtr(signs[:, None] * latents)
                    @ weights).sum()
        kl = 0.5 * ((lw * lw).sum() + (w_mean * w_mean).sum() - m
                    - 2.0 * chol_logdiag.sum())
        return ell_term - kl

    def features():
        ell = torch.exp(log_ell)
        scale = torch.exp(log_scale)
        sz = tz / ell
        sx = tx / ell
        kmm = scale * torch.exp(
            -0.5 * torch.clamp(
                (sz * sz).sum(1)[:, None] + (sz * sz).sum(1)[None, :]
                - 2.0 * sz @ sz.T, min=0.0))
        kmx = scale * torch.exp(
            -0.5 * torch.clamp(
                (sz * sz).sum(1)[:, None] + (sx * sx).sum(1)[None, :]
                - 2.0 * sz @ sx.T, min=0.0))
        lmm, state["jitter"] = _chol_with_jitter(kmm, state["jitter"],
                                                 torch_mode=True)
        alpha = torch.linalg.solve_triangular(lmm, kmx, upper=False)
        return alpha, scale

    if warm_start is None:
        def objective():
            alpha, scale = features()
            return (variational_part(alpha, scale)
                    + _log_prior(log_ell, log_scale, med, config))

        params = [log_ell, log_scale, w_mean, chol_lower, chol_logdiag]
        lr = config.learning_rate
    else:
        # kernel stays put on warm refits, so the expensive features and the
        # hyperprior term are constants of the step loop
        with torch.no_grad():
            warm_alpha, warm_scale = features()
            prior_const = _log_prior(log_ell, log_scale, med, config)

        def objective():
            return variational_part(warm_alpha, warm_scale) + prior_const

        params = [w_mean, chol_lower, chol_logdiag]
        lr = config.warm_learning_rate

    opt = torch.optim.Adam(params, lr=lr)

    def snapshot():
        return [p.detach().clone()
                for p in (log_ell, log_scale, w_mean, chol_lower,
                          chol_logdiag)]

    with torch.no_grad():
        start_val = float(objective())
    if not math.isfinite(start_val):
        raise FitError("objective non-finite at initialization",
                       diagnostics={"mode": mode, "elbo": start_val, "step": 0})
    best_val = start_val
    best_state = snapshot()
    best_jitter = state["jitter"]
    stall = 0
    steps_taken = 0
    for step in range(1, config.max_steps + 1):
        opt.zero_grad()
        val = objective()
        loss = -val
        if not torch.isfinite(loss):
            raise FitError(
                "objective diverged",
                diagnostics={"mode": mode, "step": step, "elbo": float(val),
                             "jitter": state["jitter"]})
        loss.backward()
        opt.step()
        steps_taken = step
        cur = float(val.detach())
        if cur > best_val + config.rel_tol * max(1.0, abs(best_val)):
            best_val = cur
            best_state = snapshot()
            best_jitter = state["jitter"]
            stall = 0
        else:
            if cur > best_val:
                best_val = cur
                best_state = snapshot()
                best_jitter = state["jitter"]
            stall += 1
            if stall >= _PATIENCE:
                break

    ell_v, scale_v, mean_v, lower_v, logdiag_v = best_state
    chol_v = (np.tril(lower_v.numpy(), -1)
              + np.diag(np.exp(logdiag_v.numpy())))
    return GpModel(
        train_x=x, train_y=y, bounds=box, inducing=inducing,
        lengthscales=np.exp(ell_v.numpy()),
        outputscale=math.exp(float(scale_v)),
        whitened_mean=mean_v.numpy(), whitened_chol=chol_v,
        jitter=best_jitter,
        diagnostics={"elbo": best_val, "start_elbo": start_val,
                     "iterations": steps_taken, "mode": mode})


def save_checkpoint(model, path):
    np.savez(
        path,
        format_version=CHECKPOINT_FORMAT_VERSION,
        train_x=model.train_x, train_y=model.train_y, bounds=model.bounds,
        inducing=model.inducing, lengthscales=model.lengthscales,
        outputscale=model.outputscale, whitened_mean=model.whitened_mean,
        whitened_chol=model.whitened_chol, jitter=model.jitter,
        elbo=model.diagnostics.get("elbo", np.nan),
        iterations=model.diagnostics.get("iterations", -1))


def load_checkpoint(path):
    with np.load(path) as blob:
        version = int(blob["format_version"])
        if version != CHECKPOINT_FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format {version}")
        return GpModel(
            train_x=blob["train_x"], train_y=blob["train_y"],
            bounds=blob["bounds"], inducing=blob["inducing"],
            lengthscales=blob["lengthscales"],
            outputscale=float(blob["outputscale"]),
            whitened_mean=blob["whitened_mean"],
            whitened_chol=blob["whitened_chol"], jitter=float(blob["jitter"]),
            diagnostics={"elbo": float(blob["elbo"]),
                         "iterations": int(blob["iterations"]),
                         "mode": "checkpoint"})
