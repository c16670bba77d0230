"""Replicated active-learning benchmark harness.

One experiment = one problem, one acquisition, one iteration budget, many
replications. Every random choice inside a replication flows from
(base_seed, replication, stream role), so a completed (config, replication)
pair reruns bit-for-bit. Results land in one directory per experiment:
config snapshot, per-replication trace CSV and model checkpoint, an
aggregate CSV, and one plot-data file per metric.
"""

import csv
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .acquisition import AcquisitionKind, ReferenceSet
from .errors import ConfigError, FitError, OptimError
from .lookahead import STD_FLOOR, gamma_from_theta, level_set_posterior
from .optim import SobolStream, maximize
from .problems import PROBLEM_NAMES, get_problem, sample
from .surrogate import fit, refit_policy, save_checkpoint

SCHEMA_VERSION = 1
EDGE_FRACTION = 0.05
METRIC_NAMES = ("brier", "classification_error")

# stream roles feeding seed derivation; the test stream must stay disjoint
# from everything the model or optimizer ever sees
_STREAM_ROLES = {
    "design": 0,
    "outcome": 1,
    "refset": 2,
    "acqopt": 3,
    "fit": 4,
    "qr": 5,
    "test": 6,
}
assert len(set(_STREAM_ROLES.values())) == len(_STREAM_ROLES)


def _stream_seed(base_seed, replication, role, extra=None):
    entropy = [base_seed, replication, _STREAM_ROLES[role]]
    if extra is not None:
        entropy.append(extra)
    seq = np.random.SeedSequence(entropy)
    return int(seq.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run depends on, file-serializable."""

    problem: str
    acquisition: str
    theta: float
    total_iterations: int
    beta: float = None
    init_design: int = 10
    refset_size: int = 500
    test_size: int = 1000
    replications: int = 20
    base_seed: int = 0
    scratch_every: int = 10
    output_dir: str = "results"

    def __post_init__(self):
        get_problem(self.problem)
        self.kind()
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta must lie strictly inside (0, 1)")
        if self.init_design < 2:
            raise ConfigError("initial design needs at least 2 points")
        if self.total_iterations < self.init_design:
            raise ConfigError(
                "total_iterations must be >= the initial design size")
        if self.refset_size < 1 or self.test_size < 1:
            raise ConfigError("refset_size and test_size must be >= 1")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.scratch_every < 1:
            raise ConfigError("scratch_every must be >= 1")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigError("base_seed must be a nonnegative integer")

    def kind(self):
        return AcquisitionKind(self.acquisition, self.beta)


def load_config(path):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} does not hold a mapping")
    version = raw.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"expected schema_version {SCHEMA_VERSION}, got {version!r}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def save_config(config, path):
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(dataclasses.asdict(config))
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh, sort_keys=False)


@dataclass
class IterationRecord:
    iteration: int
    point: np.ndarray
    outcome: int
    edge: bool
    fit_seconds: float = None
    acq_seconds: float = None
    brier: float = None
    classification_error: float = None


@dataclass
class RunTrace:
    """Per-iteration history of one replication."""

    problem: str
    acquisition: str
    replication: int
    init_design: int
    total_iterations: int
    records: list = field(default_factory=list)
    checkpoint_path: str = None
    failed: bool = False
    error: str = None


def brier(probs, truth):
    p = np.asarray(probs, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ConfigError("probs and truth must be aligned nonempty vectors")
    return float(np.mean((p - t) ** 2))


def expected_classification_error(probs, truth):
    p = np.asarray(probs, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ConfigError("probs and truth must be aligned nonempty vectors")
    return float(np.mean(p * (1.0 - t) + (1.0 - p) * t))


def edge_flag(point, bounds):
    box = np.asarray(bounds, dtype=float)
    pt = np.asarray(point, dtype=float)
    margin = EDGE_FRACTION * (box[:, 1] - box[:, 0])
    return bool(np.any((pt - box[:, 0] <= margin)
                       | (box[:, 1] - pt <= margin)))


def edge_sample_rate(trace, bounds):
    """Fraction of active-sampling points touching the 5% boundary band."""
    active = [r for r in trace.records if r.iteration > trace.init_design]
    if not active:
        raise ConfigError("trace has no active-sampling records")
    return float(np.mean([edge_flag(r.point, bounds) for r in active]))


def _metric_values(model, test_points, truth, gamma):
    mu, var = model.marginals(test_points)
    pi = level_set_posterior(mu, np.maximum(np.sqrt(var), STD_FLOOR), gamma)
    return (brier(pi, truth),
            expected_classification_error(pi, truth))


def run_experiment(config, replication):
    """Run one replication start to finish, returning its trace.

    A surrogate fit or acquisition failure truncates the trace at the
    iteration that broke and marks it failed rather than raising.
    """
    problem = get_problem(config.problem)
    box = np.array([list(b) for b in problem.bounds], dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    d = problem.dim
    kind = config.kind()
    gamma = gamma_from_theta(config.theta)
    seed = config.base_seed

    test_seed = _stream_seed(seed, replication, "test")
    other = {_stream_seed(seed, replication, role)
             for role in _STREAM_ROLES if role != "test"}
    assert test_seed not in other, "test stream must stay disjoint"

    design = SobolStream(d, seed=_stream_seed(seed, replication, "design"))
    outcome_rng = np.random.default_rng(
        np.random.SeedSequence(
            [seed, replication, _STREAM_ROLES["outcome"]]))
    refset_stream = SobolStream(
        d, seed=_stream_seed(seed, replication, "refset"))
    qr_stream = None
    if kind.tag == "QuasiRandom":
        qr_stream = SobolStream(d, seed=_stream_seed(seed, replication, "qr"))
    test_points = lo + SobolStream(d, seed=test_seed).draw(
        config.test_size) * (hi - lo)
    truth = problem.below_threshold(test_points)

    trace = RunTrace(
        problem=config.problem, acquisition=config.acquisition,
        replication=replication, init_design=config.init_design,
        total_iterations=config.total_iterations)

    points = lo + design.draw(config.init_design) * (hi - lo)
    outcomes = []
    for i, pt in enumerate(points):
        y = sample(problem, pt, outcome_rng)
        outcomes.append(y)
        trace.records.append(IterationRecord(
            iteration=i + 1, point=pt.copy(), outcome=int(y),
            edge=edge_flag(pt, box)))
    outcomes = np.array(outcomes)

    def fail(exc):
        trace.failed = True
        trace.error = f"{type(exc).__name__}: {exc}"
        return trace

    start = time.monotonic()
    try:
        model = fit(points, outcomes, box,
                    seed=_stream_seed(seed, replication, "fit",
                                      extra=config.init_design))
    except FitError as exc:
        return fail(exc)
    trace.records[-1].fit_seconds = time.monotonic() - start
    b, ece = _metric_values(model, test_points, truth, gamma)
    trace.records[-1].brier = b
    trace.records[-1].classification_error = ece

    for it in range(config.init_design + 1, config.total_iterations + 1):
        refset = ReferenceSet.from_bounds(
            lo + refset_stream.draw(config.refset_size) * (hi - lo), box)
        start = time.monotonic()
        try:
            chosen = maximize(
                kind, model, refset, box, theta=config.theta,
                seed=_stream_seed(seed, replication, "acqopt", extra=it),
                qr_stream=qr_stream)
        except OptimError as exc:
            return fail(exc)
        acq_seconds = time.monotonic() - start
        y = sample(problem, chosen, outcome_rng)
        points = np.vstack([points, chosen])
        outcomes = np.append(outcomes, y)
        record = IterationRecord(
            iteration=it, point=np.asarray(chosen, dtype=float),
            outcome=int(y), edge=edge_flag(chosen, box),
            acq_seconds=acq_seconds)
        trace.records.append(record)
        warm = refit_policy(it, config.scratch_every) == "warm"
        start = time.monotonic()
        try:
            model = fit(points, outcomes, box,
                        warm_start=model if warm else None,
                        seed=_stream_seed(seed, replication, "fit", extra=it))
        except FitError as exc:
            return fail(exc)
        record.fit_seconds = time.monotonic() - start
        record.brier, record.classification_error = _metric_values(
            model, test_points, truth, gamma)

    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    checkpoint = outdir / f"model_rep{replication:03d}.npz"
    save_checkpoint(model, checkpoint)
    trace.checkpoint_path = str(checkpoint)
    return trace


def aggregate(traces):
    """Per-iteration mean and 2*SEM of each metric across replications.

    Values are sorted before reduction so the result is independent of
    trace order; iterations missing a metric in some trace average over
    the traces that do have it.
    """
    rows = []
    iterations = sorted({r.iteration for t in traces for r in t.records
                         if r.brier is not None})
    for it in iterations:
        row = {"iteration": it}
        counts = []
        for metric in METRIC_NAMES:
            values = sorted(
                getattr(r, metric)
                for t in traces for r in t.records
                if r.iteration == it and getattr(r, metric) is not None)
            arr = np.array(values)
            row[f"{metric}_mean"] = float(arr.mean())
            sem = (float(arr.std(ddof=1) / np.sqrt(len(arr)))
                   if len(arr) > 1 else 0.0)
            row[f"{metric}_two_sem"] = 2.0 * sem
            counts.append(len(values))
        row["replications"] = max(counts)
        rows.append(row)
    return rows


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def write_trace_csv(trace, path):
    dim = len(trace.records[0].point) if trace.records else 0
    header = (["iteration"] + [f"x{j}" for j in range(dim)]
              + ["outcome", "edge", "brier", "classification_error",
                 "fit_seconds", "acq_seconds"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in trace.records:
            writer.writerow(
                [r.iteration] + [repr(float(v)) for v in r.point]
                + [r.outcome, _cell(r.edge), _cell(r.brier),
                   _cell(r.classification_error), _cell(r.fit_seconds),
                   _cell(r.acq_seconds)])


def read_trace_csv(path):
    """Rebuild enough of a trace for aggregation from its CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, name in enumerate(header) if name.startswith("x")]
        col = {name: i for i, name in enumerate(header)}
        records = []
        for row in reader:
            records.append(IterationRecord(
                iteration=int(row[col["iteration"]]),
                point=np.array([float(row[i]) for i in xcols]),
                outcome=int(row[col["outcome"]]),
                edge=bool(int(row[col["edge"]])),
                brier=(float(row[col["brier"]])
                       if row[col["brier"]] else None),
                classification_error=(
                    float(row[col["classification_error"]])
                    if row[col["classification_error"]] else None),
                fit_seconds=(float(row[col["fit_seconds"]])
                             if row[col["fit_seconds"]] else None),
                acq_seconds=(float(row[col["acq_seconds"]])
                             if row[col["acq_seconds"]] else None)))
    return RunTrace(problem="", acquisition="", replication=-1,
                    init_design=0, total_iterations=len(records),
                    records=records)


def write_aggregate_csv(rows, path):
    header = ["iteration"]
    for metric in METRIC_NAMES:
        header += [f"{metric}_mean", f"{metric}_two_sem"]
    header.append("replications")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[h]) for h in header])


def write_plot_data(rows, outdir):
    outdir = Path(outdir)
    for metric in METRIC_NAMES:
        with open(outdir / f"plot_{metric}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "mean", "two_sem"])
            for row in rows:
                writer.writerow([row["iteration"],
                                 _cell(row[f"{metric}_mean"]),
                                 _cell(row[f"{metric}_two_sem"])])


def _run_one(args):
    config, replication = args
    return run_experiment(config, replication)


def run_many(config, workers=1):
    """Run all replications, persist everything, return the traces."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_config(config, outdir / "config.yaml")
    jobs = [(config, r) for r in range(config.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(job) for job in jobs]
    for trace in traces:
        write_trace_csv(trace,
                        outdir / f"trace_rep{trace.replication:03d}.csv")
    completed = [t for t in traces if not t.failed]
    if completed:
        rows = aggregate(completed)
        write_aggregate_csv(rows, outdir / "aggregate.csv")
        write_plot_data(rows, outdir)
    return traces


def aggregate_directory(directory):
    """Recompute the aggregate files from the trace CSVs in a directory."""
    outdir = Path(directory)
    paths = sorted(outdir.glob("trace_rep*.csv"))
    if not paths:
        raise ConfigError(f"no trace CSVs under {outdir}")
    rows = aggregate([read_trace_csv(p) for p in paths])
    write_aggregate_csv(rows, outdir / "aggregate.csv")
    write_plot_data(rows, outdir)
    return rows


def list_problems():
    return list(PROBLEM_NAMES)
