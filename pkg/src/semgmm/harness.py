"""Experiment driver: the three comparison protocols and the runtime
measurement, with deterministic seeding and plot-ready CSV traces.

Seeding layout (all streams derive from the plan's master seed):
  (master, 0, ...)        ground-truth generation and sampling
  (master, 1, i)          initial model for init i
  (master, 2, i, j)       stochastic run j from init i
  (master, 3, i)          repair stream of the deterministic run for init i
Results are a pure function of the plan and are independent of n_jobs and
scheduling: every (init, run) pair owns its streams and rows are merged in
sorted (init, run, round) order.
"""
from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import assemble_bounds
from .em import _em_params, em_fit, em_m_step
from .estep import responsibilities
from .ingest import load_csv
from .model import DataSet, DegeneracyError, MixtureModel, log_likelihood
from .rng import derive_seed, substream
from .sem import SemConfig, finalize_model, sample_assignment, sem_fit, sem_m_step
from .synth import GenSpec, generate_mixture, initialize, sample_dataset

_TAG_DATA, _TAG_INIT, _TAG_RUN, _TAG_EM = 0, 1, 2, 3

FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class ExperimentPlan:
    """One experiment: data source, algorithm settings, and budgets.

    delta is the per-check failure budget; None selects 1/(100 K (D+1)), so
    the union over all K(D+1) weight and mean-coordinate checks holds with
    probability at least 99/100.
    """

    dataset: str | GenSpec
    k: int
    rounds: int = 50
    n_inits: int = 30
    runs_per_init: int = 100
    master_seed: int = 0
    delta: float | None = None
    out_dir: str = "."
    n_jobs: int = 1
    sem: SemConfig = field(default_factory=SemConfig)

    def __post_init__(self):
        if self.rounds < 1 or self.n_inits < 1 or self.runs_per_init < 1:
            raise ValueError("rounds, n_inits and runs_per_init must be >= 1")

    def ci_scale(self) -> "ExperimentPlan":
        """Desk-scale profile: 3 inits x 10 runs x 20 rounds."""
        return replace(self, rounds=20, n_inits=3, runs_per_init=10)

    def full_scale(self) -> "ExperimentPlan":
        """Full-scale profile: 30 inits x 100 runs x 50 rounds."""
        return replace(self, rounds=50, n_inits=30, runs_per_init=100)


def prepare_data(plan: ExperimentPlan) -> DataSet:
    """Materialize the plan's data set (synthetic draw or CSV load)."""
    if isinstance(plan.dataset, GenSpec):
        truth = generate_mixture(plan.dataset, substream(plan.master_seed, _TAG_DATA, 0))
        data, _ = sample_dataset(
            truth, plan.dataset.n, substream(plan.master_seed, _TAG_DATA, 1)
        )
        return data
    return load_csv(plan.dataset)


def initial_models(plan: ExperimentPlan, data: DataSet) -> list[MixtureModel]:
    return [
        initialize(data, plan.k, substream(plan.master_seed, _TAG_INIT, i))
        for i in range(plan.n_inits)
    ]


def model_hash(model: MixtureModel) -> str:
    h = hashlib.sha256()
    for a in (model.weights, model.means, model.covariances):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:12]


def effective_delta(plan: ExperimentPlan, d: int) -> float:
    if plan.delta is not None:
        return plan.delta
    return 1.0 / (100.0 * plan.k * (d + 1))


def _map_runs(fn, keys, n_jobs):
    """Apply fn over keys, optionally with threads; results keyed for
    deterministic merge order."""
    if n_jobs <= 1:
        return {key: fn(key) for key in keys}
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futures = {key: pool.submit(fn, key) for key in keys}
        return {key: fut.result() for key, fut in futures.items()}


def _write_trace(path: Path, comments: list[str], header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def _sem_cfg(plan: ExperimentPlan, i: int, j: int) -> SemConfig:
    return replace(plan.sem, rng_seed=derive_seed(plan.master_seed, _TAG_RUN, i, j))


def _em_cfg(plan: ExperimentPlan, i: int) -> SemConfig:
    return replace(plan.sem, rng_seed=derive_seed(plan.master_seed, _TAG_EM, i))


def run_likelihood_experiment(plan: ExperimentPlan, data: DataSet | None = None) -> Path:
    """First protocol: negative log-likelihood per round.

    Per init, one deterministic trajectory (emitted as its own series) and
    runs_per_init stochastic trajectories summarized per round by
    min / lower quartile / median / upper quartile / max.
    """
    if data is None:
        data = prepare_data(plan)
    inits = initial_models(plan, data)
    comments = [
        "semgmm likelihood trace",
        "stats over stochastic runs; quartiles use linear interpolation on sorted values",
    ]
    comments += [f"init {i} hash {model_hash(m)}" for i, m in enumerate(inits)]
    rows = []
    excluded = []
    for i, model0 in enumerate(inits):
        em_traj = em_fit(model0, data, plan.rounds, _em_cfg(plan, i))
        for t, m in enumerate(em_traj, start=1):
            rows.append((i, "em", t, "value", -log_likelihood(m, data)))

        def one_run(j, model0=model0, i=i):
            try:
                traj = sem_fit(model0, data, plan.rounds, _sem_cfg(plan, i, j))
                return [-log_likelihood(m, data) for m in traj]
            except DegeneracyError as exc:
                return exc

        results = _map_runs(one_run, range(plan.runs_per_init), plan.n_jobs)
        nlls = []
        for j in sorted(results):
            if isinstance(results[j], DegeneracyError):
                excluded.append(f"excluded: init {i} run {j}: {results[j]}")
            else:
                nlls.append(results[j])
        if not nlls:
            continue
        arr = np.array(nlls)  # (runs, rounds)
        for t in range(plan.rounds):
            col = arr[:, t]
            stats = {
                "min": col.min(),
                "q1": np.percentile(col, 25),
                "median": np.percentile(col, 50),
                "q3": np.percentile(col, 75),
                "max": col.max(),
            }
            for name, value in stats.items():
                rows.append((i, "sem", t + 1, name, float(value)))
    out = Path(plan.out_dir) / "likelihood_trace.csv"
    return _write_trace(
        out, comments + excluded, ["init_id", "algorithm", "round", "stat", "nll"], rows
    )


def diff_normalizers(data: DataSet) -> tuple[float, float]:
    """Scale units for mean and covariance differences:
    Gamma_mu = sqrt(D) * max_d spread_d, Gamma_Sigma = D * (max_d spread_d)^2."""
    delta = float(data.spread.max())
    return float(np.sqrt(data.d)) * delta, float(data.d) * delta**2


def run_diff_experiment(plan: ExperimentPlan, data: DataSet | None = None) -> Path:
    """Second protocol: paired per-round parameter differences.

    Both algorithms start from the same initial model per init; rows carry
    raw differences and differences normalized by 1 (weights), Gamma_mu
    (means) and Gamma_Sigma (covariances).
    """
    if data is None:
        data = prepare_data(plan)
    inits = initial_models(plan, data)
    gamma_mu, gamma_sigma = diff_normalizers(data)
    comments = [
        "semgmm diff trace",
        f"gamma_mu {FLOAT_FMT % gamma_mu} gamma_sigma {FLOAT_FMT % gamma_sigma}",
    ]
    comments += [f"init {i} hash {model_hash(m)}" for i, m in enumerate(inits)]
    rows = []
    excluded = []
    d = data.d
    for i, model0 in enumerate(inits):
        em_traj = em_fit(model0, data, plan.rounds, _em_cfg(plan, i))

        def one_run(j, model0=model0):
            try:
                return sem_fit(model0, data, plan.rounds, _sem_cfg(plan, i, j))
            except DegeneracyError as exc:
                return exc

        results = _map_runs(one_run, range(plan.runs_per_init), plan.n_jobs)
        for j in sorted(results):
            sem_traj = results[j]
            if isinstance(sem_traj, DegeneracyError):
                excluded.append(f"excluded: init {i} run {j}: {sem_traj}")
                continue
            for t, (em_m, sem_m) in enumerate(zip(em_traj, sem_traj), start=1):
                for k in range(plan.k):
                    w_diff = float(em_m.weights[k] - sem_m.weights[k])
                    rows.append((i, j, t, k, "weight", None, None, w_diff, w_diff))
                    nu = em_m.means[k] - sem_m.means[k]
                    for a in range(d):
                        rows.append(
                            (i, j, t, k, "mean", a, None, float(nu[a]), float(nu[a] / gamma_mu))
                        )
                    e = float(np.sqrt((nu**2).sum()))
                    rows.append((i, j, t, k, "mean_euclid", None, None, e, e / gamma_mu))
                    cd = em_m.covariances[k] - sem_m.covariances[k]
                    for a in range(d):
                        for b in range(d):
                            rows.append(
                                (i, j, t, k, "cov", a, b, float(cd[a, b]), float(cd[a, b] / gamma_sigma))
                            )
                    fro = float(np.sqrt((cd**2).sum()))
                    rows.append((i, j, t, k, "cov_frobenius", None, None, fro, fro / gamma_sigma))
    out = Path(plan.out_dir) / "diff_trace.csv"
    header = [
        "init_id", "run_id", "round", "component", "param",
        "index_i", "index_j", "raw_diff", "normalized_diff",
    ]
    return _write_trace(out, comments + excluded, header, rows)


def run_bound_experiment(plan: ExperimentPlan, data: DataSet | None = None) -> Path:
    """Third protocol: actual Euclidean mean distance vs the assembled bound.

    During each stochastic round, the deterministic mean update is computed
    from the same current model; the per-component actual distance between
    the raw sampled means and the deterministic means is emitted next to the
    union-bound Euclidean mean bound.  Inapplicable components (weight bound
    hypothesis failed, lambda_w >= 1, or an empty sample) are emitted with
    missing values.
    """
    if data is None:
        data = prepare_data(plan)
    inits = initial_models(plan, data)
    delta = effective_delta(plan, data.d)
    comments = [
        "semgmm bound trace",
        f"per-check delta {FLOAT_FMT % delta}",
    ]
    comments += [f"init {i} hash {model_hash(m)}" for i, m in enumerate(inits)]
    rows = []
    excluded = []
    for i, model0 in enumerate(inits):

        def one_run(j, model0=model0):
            cfg = _sem_cfg(plan, i, j)
            model = model0
            run_rows = []
            try:
                for t in range(plan.rounds):
                    resp = responsibilities(model, data)
                    em_ref = em_m_step(resp, data)
                    report = assemble_bounds(resp, data, em_ref, delta)
                    assign = sample_assignment(resp, substream(cfg.rng_seed, t, 0))
                    for k in range(plan.k):
                        ok = bool(report.applicable[k]) and assign.counts[k] >= 1
                        if ok:
                            raw_mean = data.points[assign.labels == k].mean(axis=0)
                            actual = float(
                                np.sqrt(((raw_mean - em_ref.means[k]) ** 2).sum())
                            )
                            bound = float(report.mean_bound_euclid[k])
                            run_rows.append((t + 1, k, actual, bound, 1))
                        else:
                            run_rows.append((t + 1, k, None, None, 0))
                    model = sem_m_step(
                        assign, data, model, cfg, substream(cfg.rng_seed, t, 1)
                    )
            except DegeneracyError as exc:
                return exc
            return run_rows

        results = _map_runs(one_run, range(plan.runs_per_init), plan.n_jobs)
        for j in sorted(results):
            if isinstance(results[j], DegeneracyError):
                excluded.append(f"excluded: init {i} run {j}: {results[j]}")
                continue
            for t, k, actual, bound, applicable in results[j]:
                rows.append((i, j, t, k, actual, bound, applicable))
    out = Path(plan.out_dir) / "bound_trace.csv"
    header = [
        "init_id", "run_id", "round", "component",
        "actual_euclid", "bound_euclid", "applicable",
    ]
    return _write_trace(out, comments + excluded, header, rows)


# ---------------------------------------------------------------------------
# runtime measurement


@dataclass
class OpCounter:
    """Count of real multiplications performed in the update loops.

    Incremented next to each numpy call site with the multiplication count of
    the operation it performs (triangular solves, weighted accumulations,
    outer products); portable, matching an analytical count rather than
    hardware counters.
    """

    mults: int = 0

    def add_estep(self, n: int, d: int, k: int) -> None:
        # per point and component: the product with the inverse factor (d^2)
        # and the squared norm of the result (d)
        self.mults += n * k * (d * d + d)

    def add_em_mstep(self, n: int, d: int, k: int) -> None:
        # per point and component: weighted mean accumulation (d), weighting
        # the centered point (d), and its outer product (d^2)
        self.mults += n * k * (2 * d + d * d)

    def add_sem_mstep(self, n: int, d: int) -> None:
        # each point contributes one centered outer product to exactly one
        # component (d^2); sums and counts need no multiplications
        self.mults += n * d * d


def counted_em_round(
    model: MixtureModel, data: DataSet, counter: OpCounter, plan_cfg: SemConfig, t: int
) -> MixtureModel:
    resp = responsibilities(model, data)
    counter.add_estep(data.n, data.d, model.k)
    partial, degenerate = _em_params(resp, data)
    counter.add_em_mstep(data.n, data.d, model.k)
    return finalize_model(
        partial, degenerate, data, model, plan_cfg, substream(plan_cfg.rng_seed, t, 2)
    )


def counted_sem_round(
    model: MixtureModel, data: DataSet, counter: OpCounter, cfg: SemConfig, t: int
) -> MixtureModel:
    resp = responsibilities(model, data)
    counter.add_estep(data.n, data.d, model.k)
    assign = sample_assignment(resp, substream(cfg.rng_seed, t, 0))
    new = sem_m_step(assign, data, model, cfg, substream(cfg.rng_seed, t, 1))
    counter.add_sem_mstep(data.n, data.d)
    return new


def run_speed_experiment(plan: ExperimentPlan, data: DataSet | None = None) -> Path:
    """Per-iteration multiplication counts and wall-clock for both algorithms,
    run from the same initial model on the same data."""
    if data is None:
        data = prepare_data(plan)
    model0 = initial_models(plan, data)[0]
    rows = []
    for algo in ("em", "sem"):
        model = model0
        cfg = _em_cfg(plan, 0) if algo == "em" else _sem_cfg(plan, 0, 0)
        for t in range(plan.rounds):
            counter = OpCounter()
            start = time.perf_counter_ns()
            if algo == "em":
                model = counted_em_round(model, data, counter, cfg, t)
            else:
                model = counted_sem_round(model, data, counter, cfg, t)
            wall = time.perf_counter_ns() - start
            rows.append((algo, t + 1, counter.mults, wall))
    out = Path(plan.out_dir) / "speed_trace.csv"
    return _write_trace(
        out,
        ["semgmm speed trace"],
        ["algorithm", "iteration", "mults", "wall_ns"],
        rows,
    )
