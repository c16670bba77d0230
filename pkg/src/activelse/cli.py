"""Command-line front end: run experiments, aggregate results, selftest.

Exit codes: 0 success, 1 configuration problem, 2 numeric failure,
3 at least one replication failed.
"""

import argparse
import dataclasses
import sys

import numpy as np

from . import bench
from .acquisition import (
    binary_entropy,
    eavc,
    global_mi,
    global_sur,
    local_mi,
    local_sur,
)
from .errors import ActiveLseError, ConfigError, NumericError, OptimError
from .lookahead import PosteriorQuery, lookahead_posteriors
from .problems import PROBLEM_NAMES
from .specfun import bvn_cdf, owens_t, std_normal_cdf


def _random_queries(rng, n):
    mu_q = rng.normal(0.0, 2.0, size=n)
    var_q = rng.uniform(0.05, 3.0, size=n)
    mu_star = rng.normal(0.0, 2.0, size=n)
    var_star = rng.uniform(0.05, 3.0, size=n)
    rho = rng.uniform(-0.95, 0.95, size=n)
    cov = rho * np.sqrt(var_q * var_star)
    return PosteriorQuery(mu_q=mu_q, var_q=var_q, mu_star=mu_star,
                          var_star=var_star, cov_qstar=cov)


def _check_owens_identities(rng):
    h = rng.normal(0.0, 2.0, size=1000)
    a = rng.uniform(-5.0, 5.0, size=1000)
    worst = np.max(np.abs(owens_t(h, 0.0)))
    worst = max(worst, np.max(np.abs(
        owens_t(0.0, a) - np.arctan(a) / (2.0 * np.pi))))
    phi = std_normal_cdf(h)
    worst = max(worst, np.max(np.abs(
        owens_t(h, 1.0) - 0.5 * phi * (1.0 - phi))))
    return worst, 1e-10


def _check_bvn_identities(rng):
    x = rng.normal(0.0, 1.5, size=1000)
    y = rng.normal(0.0, 1.5, size=1000)
    rho = rng.uniform(-0.999, 0.999, size=1000)
    worst = np.max(np.abs(bvn_cdf(x, y, rho) - bvn_cdf(y, x, rho)))
    worst = max(worst, np.max(np.abs(
        bvn_cdf(x, y, 0.0) - std_normal_cdf(x) * std_normal_cdf(y))))
    # integrating out one variable recovers the univariate marginal
    worst = max(worst, np.max(np.abs(
        bvn_cdf(x, 37.0, rho) - std_normal_cdf(x))))
    return worst, 1e-12


def _check_tower(rng):
    q = _random_queries(rng, 10000)
    gamma = rng.normal(0.0, 1.5, size=10000)
    pi1, pi0, p1 = lookahead_posteriors(q, gamma)
    marginal = std_normal_cdf((gamma - q.mu_q) / np.sqrt(q.var_q))
    worst = np.max(np.abs(p1 * pi1 + (1.0 - p1) * pi0 - marginal))
    return worst, 5e-8


def _check_composition(rng):
    worst = 0.0
    for _ in range(50):
        n = 40
        var_q = rng.uniform(0.05, 3.0, size=n)
        var_star = float(rng.uniform(0.05, 3.0))
        rho = rng.uniform(-0.95, 0.95, size=n)
        q = PosteriorQuery(
            mu_q=rng.normal(0.0, 2.0, size=n), var_q=var_q,
            mu_star=float(rng.normal(0.0, 2.0)), var_star=var_star,
            cov_qstar=rho * np.sqrt(var_q * var_star))
        gamma = float(rng.normal(0.0, 1.0))
        pi1, pi0, p1 = lookahead_posteriors(q, gamma)
        p1 = float(np.max(p1))
        pi_now = std_normal_cdf((gamma - q.mu_q) / np.sqrt(q.var_q))
        sur = np.sum(np.minimum(pi_now, 1.0 - pi_now)
                     - p1 * np.minimum(pi1, 1.0 - pi1)
                     - (1.0 - p1) * np.minimum(pi0, 1.0 - pi0))
        mi = np.sum(binary_entropy(pi_now) - p1 * binary_entropy(pi1)
                    - (1.0 - p1) * binary_entropy(pi0))
        c = 2.0 / n
        vol = c * np.sum(pi_now)
        ev = (p1 * abs(vol - c * np.sum(pi1))
              + (1.0 - p1) * abs(vol - c * np.sum(pi0)))
        worst = max(worst, abs(sur - global_sur(q, gamma)))
        worst = max(worst, abs(mi - global_mi(q, gamma)))
        worst = max(worst, abs(ev - eavc(q, gamma, c)))
    return worst, 1e-12


def _check_zero_information(rng):
    n = 1000
    mu = rng.normal(0.0, 2.0, size=n)
    var = rng.uniform(0.05, 3.0, size=n)
    gamma = rng.normal(0.0, 1.0, size=n)
    q = PosteriorQuery(mu_q=mu, var_q=var, mu_star=rng.normal(size=n),
                       var_star=rng.uniform(0.05, 3.0, size=n),
                       cov_qstar=np.zeros(n))
    worst = 0.0
    for fn in (global_sur, global_mi):
        worst = max(worst, np.max(np.abs(fn(q, gamma))))
    worst = max(worst, np.max(np.abs(eavc(q, gamma, 0.5))))
    # a deterministic candidate cannot inform its own membership either
    zeros = np.zeros(n)
    for fn in (local_sur, local_mi):
        worst = max(worst, np.max(np.abs(fn(mu, zeros, gamma))))
    return worst, 1e-12


_SELFTEST = (
    ("owens-t identities", _check_owens_identities),
    ("bvn identities", _check_bvn_identities),
    ("tower property", _check_tower),
    ("acquisition composition", _check_composition),
    ("zero-information null", _check_zero_information),
)


def selftest(out=None):
    out = sys.stdout if out is None else out
    rng = np.random.default_rng(20260816)
    failures = 0
    for name, check in _SELFTEST:
        worst, tol = check(rng)
        ok = worst <= tol
        failures += 0 if ok else 1
        status = "ok" if ok else "FAIL"
        print(f"{status:4s} {name}: worst {worst:.3e} (tol {tol:.0e})",
              file=out)
    return failures


def _parser():
    parser = argparse.ArgumentParser(
        prog="activelse",
        description="Level-set active-learning benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--reps", type=int, default=None)
    run.add_argument("--workers", type=int, default=1)
    agg = sub.add_parser("aggregate",
                         help="rebuild aggregate files from trace CSVs")
    agg.add_argument("directory")
    sub.add_parser("list-problems", help="print available problem names")
    sub.add_parser("selftest", help="run the fast oracle suites")
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-problems":
            for name in PROBLEM_NAMES:
                print(name)
            return 0
        if args.command == "selftest":
            return 2 if selftest() else 0
        if args.command == "aggregate":
            rows = bench.aggregate_directory(args.directory)
            print(f"aggregated {rows[-1]['replications']} replications "
                  f"over {len(rows)} iterations into {args.directory}")
            return 0
        config = bench.load_config(args.config)
        if args.reps is not None:
            config = dataclasses.replace(config, replications=args.reps)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        traces = bench.run_many(config, workers=args.workers)
        failed = [t for t in traces if t.failed]
        for t in failed:
            print(f"replication {t.replication} failed: {t.error}",
                  file=sys.stderr)
        print(f"{len(traces) - len(failed)}/{len(traces)} replications "
              f"completed under {config.output_dir}")
        return 3 if failed else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, OptimError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except ActiveLseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
