"""Experiment runner and evaluation metrics.

Runs seeded closed-loop episodes over a (method x sample-count x seed) grid,
writes one CSV trace per episode plus a timing sidecar, and aggregates
median / interquartile summaries per setting. Episode traces are
deterministic and written with full float precision, so reruns are
byte-identical and every summary number can be recomputed from the raw
traces. Existing traces are skipped, which makes sweeps resumable.

Output layout:

    {output_dir}/{task}/{method}/N{count}/seed{seed}.csv     episode trace
    {output_dir}/{task}/{method}/N{count}/seed{seed}.json    wall-time stats
    {output_dir}/summary.csv                                 per-setting rows
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .controller import ControllerConfig, ControllerError, MpcController, METHODS
from .envs import Task, make_task, stage_cost
from .sampling import (PoolOptimizerConfig, SamplePool, generate_pool, load_pool,
                       save_pool)
from .weighting import WeightingConfig

log = logging.getLogger(__name__)

DEFAULT_SAMPLE_COUNTS = (20, 50, 100, 200, 300)


def smoothness(controls: np.ndarray) -> float:
    """Sum of squared consecutive control differences (0 for constant input)."""
    controls = np.atleast_2d(np.asarray(controls, dtype=np.float64))
    if controls.shape[0] < 2:
        return 0.0
    d = np.diff(controls, axis=0)
    return float(np.sum(d * d))


def settled_smoothness(controls: np.ndarray) -> float:
    """Smoothness over the second half only (steps ceil(T/2) .. T-1).

    Differences are taken within the window, so the value is a pure property
    of the settled tail and never exceeds the full-trajectory smoothness.
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=np.float64))
    t = controls.shape[0]
    if t < 2:
        raise ValueError("settled smoothness needs at least 2 steps")
    return smoothness(controls[math.ceil(t / 2):])


@dataclass(frozen=True)
class Summary:
    median: float
    q25: float
    q75: float


def summarize(values) -> Summary:
    """Median and quartiles (linear interpolation convention)."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot summarize an empty list")
    q25, med, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    return Summary(float(med), float(q25), float(q75))


def sample_initial_state(task: str, seed: int) -> np.ndarray:
    """Seeded initial state draw.

    truck: x ~ U[80, 100] m, y ~ U[-50, 50] m, both angles ~ U[-90, 90] deg.
    cartpole: hanging with a small angle perturbation, phi = pi + U[-.05, .05].
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    if task == "truck":
        return np.array([
            rng.uniform(80.0, 100.0),
            rng.uniform(-50.0, 50.0),
            rng.uniform(-0.5 * np.pi, 0.5 * np.pi),
            rng.uniform(-0.5 * np.pi, 0.5 * np.pi),
        ])
    if task == "cartpole":
        return np.array([0.0, 0.0, np.pi + rng.uniform(-0.05, 0.05), 0.0])
    raise ValueError(f"unknown task {task!r}")


@dataclass
class EpisodeRecord:
    """Closed-loop trace of one seeded run (states, applied controls, costs)."""

    task: str
    method: str
    n_samples: int
    seed: int
    states: np.ndarray       # (T, d_x)
    controls: np.ndarray     # (T, d_u)
    stage_costs: np.ndarray  # (T,)

    @property
    def length(self) -> int:
        return self.states.shape[0]


def cumulative_cost(record: EpisodeRecord) -> float:
    """Sum of the recorded per-step stage costs."""
    return float(np.sum(record.stage_costs))


@dataclass
class ExperimentSpec:
    """One sweep: which task, methods, sample counts, and seeds to run."""

    task: str = "cartpole"
    methods: tuple = METHODS
    sample_counts: tuple = (100,)
    seeds: tuple = tuple(range(20))
    episode_length: int | None = None  # None -> task default
    output_dir: Path = Path("results")
    pool_dir: Path | None = None       # None -> {output_dir}/pools
    horizon: int | None = None
    iterations: int = 3
    buffer_size: int = 3
    momentum_alpha: float | None = None  # None -> task default
    beta: float = 1.0
    sigma0: float | None = None
    mean0: float = 0.0
    sigma_reset: bool | None = None      # None -> task default
    sigma_floor: float | None = None     # None -> task default
    lambda_persist: bool = True
    jackknife_mode: str = "relative"
    weighting: WeightingConfig | None = None  # None -> defaults with task lambda0
    pool_optimizer: PoolOptimizerConfig = field(default_factory=PoolOptimizerConfig)
    diagnostics: bool = False

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        self.methods = tuple(self.methods)
        self.sample_counts = tuple(int(n) for n in self.sample_counts)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        for n in self.sample_counts:
            if not 1 <= n <= 100_000:
                raise ValueError(f"sample count {n} outside [1, 1e5]")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    def controller_config(self, method: str, n_samples: int, task: Task) -> ControllerConfig:
        def pick(value, default):
            return default if value is None else value
        weighting = (self.weighting if self.weighting is not None
                     else WeightingConfig(lambda0=task.lambda0))
        return ControllerConfig(
            method=method,
            horizon=pick(self.horizon, task.horizon),
            sample_count=n_samples,
            iterations=self.iterations,
            buffer_size=self.buffer_size,
            momentum_alpha=pick(self.momentum_alpha, task.momentum_alpha),
            beta=self.beta,
            sigma0=pick(self.sigma0, task.sigma0),
            mean0=self.mean0,
            sigma_reset=pick(self.sigma_reset, task.sigma_reset),
            sigma_floor=pick(self.sigma_floor, task.sigma_floor),
            lambda_persist=self.lambda_persist,
            weighting=weighting,
        )


def get_pool(pool_dir: Path, dim: int, count: int,
             optimizer_config: PoolOptimizerConfig | None = None) -> SamplePool:
    """Load a cached pool for (dim, count), generating and saving it if absent."""
    pool_dir = Path(pool_dir)
    pool_dir.mkdir(parents=True, exist_ok=True)
    path = pool_dir / f"pool_d{dim}_n{count}.dspool"
    if path.exists():
        pool = load_pool(path)
        if pool.dim != dim or pool.count != count:
            raise ValueError(f"cached pool {path} has shape ({pool.count}, {pool.dim}), "
                             f"expected ({count}, {dim})")
        return pool
    log.info("generating deterministic pool (%d x %d) -> %s", count, dim, path)
    pool = generate_pool(dim, count, optimizer_config)
    save_pool(pool, path)
    return pool


def _pool_for(spec: ExperimentSpec, method: str, n_samples: int, task: Task):
    if not method.startswith(("dsmppi", "dscem")):
        return None
    horizon = spec.horizon if spec.horizon is not None else task.horizon
    dim = horizon * task.control_dim
    if method.endswith("multi_iteration"):
        dim *= spec.iterations
    pool_dir = spec.pool_dir if spec.pool_dir is not None else spec.output_dir / "pools"
    return get_pool(pool_dir, dim, n_samples, spec.pool_optimizer)


def run_episode(task: Task, config: ControllerConfig, seed: int, episode_length: int,
                pool: SamplePool | None = None, diag_rows: list | None = None):
    """Run one closed-loop episode; returns (EpisodeRecord, per-step times)."""
    controller = MpcController(config, task, pool=pool,
                               seed=np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    x = sample_initial_state(task.name, seed)
    states = np.empty((episode_length, task.state_dim))
    controls = np.empty((episode_length, task.control_dim))
    stage_costs = np.empty(episode_length)
    step_times = np.empty(episode_length)
    for k in range(episode_length):
        t0 = time.perf_counter()
        u, diag = controller.step(x)
        step_times[k] = time.perf_counter() - t0
        states[k] = x
        controls[k] = u
        stage_costs[k] = stage_cost(x, u, task.cost)
        if diag_rows is not None:
            for j in range(diag.rho.size):
                diag_rows.append((k, j, diag.rho[j], diag.eta[j], diag.lam[j],
                                  diag.best_cost[j]))
        x = task.step(x, u)
    record = EpisodeRecord(task.name, config.method, config.sample_count, seed,
                           states, controls, stage_costs)
    return record, step_times


def write_episode_csv(record: EpisodeRecord, task: Task, path: Path) -> None:
    header = ["step", *task.state_labels, *task.control_labels, "stage_cost"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(record.length):
            writer.writerow([k]
                            + [repr(float(v)) for v in record.states[k]]
                            + [repr(float(v)) for v in record.controls[k]]
                            + [repr(float(record.stage_costs[k]))])


def load_episode_csv(path: Path, task: Task, method: str, n_samples: int,
                     seed: int) -> EpisodeRecord:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    d_x, d_u = task.state_dim, task.control_dim
    return EpisodeRecord(task.name, method, n_samples, seed,
                         states=rows[:, 1:1 + d_x],
                         controls=rows[:, 1 + d_x:1 + d_x + d_u],
                         stage_costs=rows[:, 1 + d_x + d_u])


def run_experiment(spec: ExperimentSpec) -> Path:
    """Run (or resume) a sweep and rebuild the summary; returns the summary path.

    Each (method, N, seed) run is skipped when its trace already exists. I/O
    failures are reported per run without aborting the rest of the sweep.
    """
    task = make_task(spec.task, jackknife_mode=spec.jackknife_mode)
    episode_length = (spec.episode_length if spec.episode_length is not None
                      else task.episode_length)
    kernels.warmup()
    n_failed = 0
    pools = {}
    for method in spec.methods:
        for n_samples in spec.sample_counts:
            run_dir = spec.output_dir / spec.task / method / f"N{n_samples}"
            run_dir.mkdir(parents=True, exist_ok=True)
            pools[(method, n_samples)] = _pool_for(spec, method, n_samples, task)
    # Seeds in the outer loop: each method's runs are spread evenly over the
    # sweep, so slow machine-state drift cannot bias per-method step timings.
    for seed in spec.seeds:
        for method in spec.methods:
            for n_samples in spec.sample_counts:
                run_dir = spec.output_dir / spec.task / method / f"N{n_samples}"
                pool = pools[(method, n_samples)]
                csv_path = run_dir / f"seed{seed}.csv"
                meta_path = run_dir / f"seed{seed}.json"
                if csv_path.exists() and meta_path.exists():
                    continue
                config = spec.controller_config(method, n_samples, task)
                try:
                    diag_rows = [] if spec.diagnostics else None
                    record, step_times = run_episode(task, config, seed,
                                                     episode_length, pool, diag_rows)
                    write_episode_csv(record, task, csv_path)
                    meta_path.write_text(json.dumps({
                        "task": spec.task, "method": method, "n_samples": n_samples,
                        "seed": seed, "steps": episode_length,
                        "step_time_mean_s": float(step_times.mean()),
                        "step_time_std_s": float(step_times.std()),
                        # stall-immune location estimate for timing comparisons
                        "step_time_median_s": float(np.median(step_times)),
                    }, indent=0, sort_keys=True))
                    if spec.diagnostics:
                        _write_diag_csv(run_dir / f"seed{seed}_diag.csv", diag_rows)
                except (OSError, ControllerError) as exc:
                    n_failed += 1
                    log.error("run %s/N%d/seed%d failed: %s", method, n_samples,
                              seed, exc)
    if n_failed:
        log.warning("%d run(s) failed; summary covers completed runs only", n_failed)
    return rebuild_summary(spec.output_dir)


def _write_diag_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "iteration", "rho", "eta", "lambda", "best_cost"])
        for row in rows:
            writer.writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])


def collect_runs(output_dir: Path):
    """Scan episode traces under output_dir; yields per-run metric dicts."""
    output_dir = Path(output_dir)
    tasks = {}
    for csv_path in sorted(output_dir.glob("*/*/N*/seed*.csv")):
        if csv_path.name.endswith("_diag.csv") or not csv_path.is_file():
            continue
        task_name = csv_path.parents[2].name
        method = csv_path.parents[1].name
        n_samples = int(csv_path.parents[0].name[1:])
        seed = int(csv_path.stem[4:])
        if task_name not in tasks:
            tasks[task_name] = make_task(task_name)
        task = tasks[task_name]
        try:
            record = load_episode_csv(csv_path, task, method, n_samples, seed)
        except (OSError, ValueError) as exc:
            log.error("skipping unreadable trace %s: %s", csv_path, exc)
            continue
        meta_path = csv_path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        yield {
            "task": task_name, "method": method, "n_samples": n_samples, "seed": seed,
            "cum_cost": cumulative_cost(record),
            "smoothness": smoothness(record.controls),
            "settled_smoothness": settled_smoothness(record.controls),
            "step_time_mean_s": meta.get("step_time_mean_s", float("nan")),
            "step_time_std_s": meta.get("step_time_std_s", float("nan")),
        }


SUMMARY_COLUMNS = [
    "task", "method", "n_samples", "n_runs",
    "cum_cost_median", "cum_cost_q25", "cum_cost_q75",
    "smoothness_median", "smoothness_q25", "smoothness_q75",
    "settled_smoothness_median", "settled_smoothness_q25", "settled_smoothness_q75",
    "step_time_mean_ms", "step_time_std_ms",
]


def rebuild_summary(output_dir: Path) -> Path:
    """Recompute summary.csv from the raw episode traces under output_dir."""
    output_dir = Path(output_dir)
    groups = {}
    for run in collect_runs(output_dir):
        groups.setdefault((run["task"], run["method"], run["n_samples"]), []).append(run)
    path = output_dir / "summary.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for (task_name, method, n_samples) in sorted(groups):
            runs = groups[(task_name, method, n_samples)]
            row = [task_name, method, n_samples, len(runs)]
            for metric in ("cum_cost", "smoothness", "settled_smoothness"):
                s = summarize([r[metric] for r in runs])
                row += [repr(s.median), repr(s.q25), repr(s.q75)]
            times = [r["step_time_mean_s"] for r in runs]
            stds = [r["step_time_std_s"] for r in runs]
            row += [repr(float(np.mean(times) * 1e3)), repr(float(np.mean(stds) * 1e3))]
            writer.writerow(row)
    return path


def read_summary(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = dict(raw)
            row["n_samples"] = int(row["n_samples"])
            row["n_runs"] = int(row["n_runs"])
            for key in SUMMARY_COLUMNS[4:]:
                row[key] = float(row[key])
            rows.append(row)
        return rows
