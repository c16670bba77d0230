"""Session fixtures for the desk-scale benchmark runs.

The two long benchmarks (2-d ordering, 8-d edge sampling) are shared by
several tests, so each runs at most once per session. Their per-replication
summaries persist under .bench_cache/ keyed by the exact run parameters;
delete that directory to force a full re-run from scratch.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

CACHE_DIR = Path(__file__).resolve().parent.parent / ".bench_cache"
BASE_SEED = 20260816
TOTAL_ITERATIONS = 150


def _summarize(traces, bounds, init_design, duration):
    from activelse.bench import edge_sample_rate

    completed = [t for t in traces if not t.failed]
    summary = {
        "n_failed": len(traces) - len(completed),
        "duration_s": duration,
        "final_brier": [t.records[-1].brier for t in completed],
        "init_brier": [t.records[init_design - 1].brier for t in completed],
        "edge_rate": [edge_sample_rate(t, bounds) for t in completed],
        "errors": [t.error for t in traces if t.failed],
    }
    return summary


def _benchmark_summary(problem_name, acquisition, replications, out_root):
    from activelse.bench import ExperimentConfig, run_many
    from activelse.problems import get_problem

    cache = CACHE_DIR / (
        f"{problem_name}_{acquisition}_{TOTAL_ITERATIONS}i_"
        f"{replications}r_s{BASE_SEED}.json")
    if cache.exists():
        return json.loads(cache.read_text())

    problem = get_problem(problem_name)
    config = ExperimentConfig(
        problem=problem_name, acquisition=acquisition, theta=problem.theta,
        total_iterations=TOTAL_ITERATIONS, replications=replications,
        base_seed=BASE_SEED,
        output_dir=str(out_root / f"{problem_name}_{acquisition}"))
    start = time.monotonic()
    traces = run_many(config)
    duration = time.monotonic() - start
    summary = _summarize(traces, np.array([list(b) for b in problem.bounds]),
                         config.init_design, duration)
    CACHE_DIR.mkdir(exist_ok=True)
    cache.write_text(json.dumps(summary, indent=1))
    return summary


@pytest.fixture(scope="session")
def crit6_results(tmp_path_factory):
    """2-d discrimination, 150 iterations, 20 replications, six strategies."""
    out_root = tmp_path_factory.mktemp("bench2d")
    acquisitions = ("GlobalMI", "EAVC", "GlobalSUR", "LocalMI", "StraddleZ",
                    "QuasiRandom")
    return {acq: _benchmark_summary("discrim_lowdim", acq, 20, out_root)
            for acq in acquisitions}


@pytest.fixture(scope="session")
def crit7_results(tmp_path_factory):
    """8-d discrimination, 150 iterations, 10 replications, two strategies."""
    out_root = tmp_path_factory.mktemp("bench8d")
    return {acq: _benchmark_summary("discrim_highdim", acq, 10, out_root)
            for acq in ("LocalMI", "EAVC")}
