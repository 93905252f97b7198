"""Command-line interface.

Subcommands:
    gen-pool    generate a deterministic sample pool and write it to disk
    run         execute an experiment sweep from a TOML config
    summarize   rebuild summary.csv from episode traces in a results dir
    bench       compare the numba kernels against the numpy fallback
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:  # python < 3.11
    import tomli as tomllib

from .harness import (DEFAULT_SAMPLE_COUNTS, ExperimentSpec, rebuild_summary,
                      run_experiment)
from .sampling import PoolOptimizerConfig, cvm_quality, generate_pool, save_pool
from .weighting import WeightingConfig


def load_config(path) -> ExperimentSpec:
    """Build an ExperimentSpec from a TOML file (see configs/ for the schema)."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    exp = raw.get("experiment", {})
    ctrl = raw.get("controller", {})
    w_raw = dict(raw.get("weighting", {}))
    if w_raw and "lambda0" not in w_raw:
        from .envs import make_task
        w_raw["lambda0"] = make_task(exp.get("task", "cartpole")).lambda0
    weighting = WeightingConfig(**w_raw) if w_raw else None
    pool_cfg = PoolOptimizerConfig(**raw.get("pool", {}))

    seeds = exp.get("seeds")
    if seeds is None:
        seeds = range(exp.get("seed_count", 20))
    kwargs = dict(
        task=exp.get("task", "cartpole"),
        sample_counts=tuple(exp.get("sample_counts", DEFAULT_SAMPLE_COUNTS)),
        seeds=tuple(seeds),
        output_dir=Path(exp.get("output_dir", "results")),
        weighting=weighting,
        pool_optimizer=pool_cfg,
        diagnostics=exp.get("diagnostics", False),
    )
    if "methods" in exp:
        kwargs["methods"] = tuple(exp["methods"])
    if "episode_length" in exp:
        kwargs["episode_length"] = exp["episode_length"]
    if "pool_dir" in exp:
        kwargs["pool_dir"] = Path(exp["pool_dir"])
    for key in ("horizon", "iterations", "buffer_size", "momentum_alpha", "beta",
                "sigma0", "mean0", "sigma_reset", "sigma_floor", "lambda_persist",
                "jackknife_mode"):
        if key in ctrl:
            kwargs[key] = ctrl[key]
    return ExperimentSpec(**kwargs)


def _cmd_gen_pool(args) -> int:
    dim = args.dim * args.multi_iter
    cfg = PoolOptimizerConfig(iterations=args.iterations, init_seed=args.seed)
    pool = generate_pool(dim, args.count, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_pool(pool, out)
    quality = cvm_quality(pool)
    print(f"wrote {out}: {pool.count} x {pool.dim} "
          f"(mean_error {quality.mean_error:.2e}, cov_error {quality.cov_error:.2e}, "
          f"cvm {quality.cvm_value:.4g})")
    return 0


def _cmd_run(args) -> int:
    spec = load_config(args.config)
    if args.output is not None:
        spec.output_dir = Path(args.output)
    summary = run_experiment(spec)
    print(f"summary written to {summary}")
    return 0


def _cmd_summarize(args) -> int:
    path = rebuild_summary(Path(args.dir))
    print(path.read_text(), end="")
    return 0


def _cmd_bench(args) -> int:
    from .bench import print_benchmark, run_benchmark
    print_benchmark(run_benchmark(n_samples=args.samples, repeats=args.repeats))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dsmppi",
                                     description="Sampling-based MPC benchmark suite")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pool", help="generate a deterministic sample pool")
    p.add_argument("--dim", type=int, required=True, help="per-iteration sample dimension")
    p.add_argument("--count", type=int, required=True, help="number of samples")
    p.add_argument("--out", required=True, help="output .dspool path")
    p.add_argument("--multi-iter", type=int, default=1, metavar="J",
                   help="pool dimension factor for the multi-iteration scheme")
    p.add_argument("--iterations", type=int, default=400)
    p.add_argument("--seed", type=int, default=1925)
    p.set_defaults(fn=_cmd_gen_pool)

    p = sub.add_parser("run", help="run an experiment sweep")
    p.add_argument("--config", required=True, help="experiment TOML file")
    p.add_argument("--output", help="override [experiment].output_dir")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("summarize", help="rebuild summary.csv from episode traces")
    p.add_argument("--dir", required=True, help="results directory")
    p.set_defaults(fn=_cmd_summarize)

    p = sub.add_parser("bench", help="compare numba and numpy kernel backends")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--repeats", type=int, default=50)
    p.set_defaults(fn=_cmd_bench)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
