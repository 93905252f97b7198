"""Sampling-based MPC step and the method lineup.

One MPC step warm-starts the proposal (shift by one stage, repeat the last),
then runs J iterations of: draw or fetch standard-normal samples, transform
them through the proposal, append the elite buffer, roll everything out from
the current state, weight by cost, refit the proposal moments with momentum,
adapt the temperature, and refresh the buffer. The first control of the
cheapest sequence seen during the step is returned (the proposal mean's
first control for plain single-iteration MPPI).

Methods:

    mppi                    one weighted-average iteration, random samples,
                            fixed sigma and temperature, mean-return
    mppi_iterative          the full iterative machinery, random samples
    dsmppi_permutation      deterministic pool, fresh dimension permutation
                            per iteration, exponential weights
    dsmppi_multi_iteration  deterministic pool of dim D*J, per-iteration
                            column subsets, exponential weights
    dscem_permutation /     as the dsmppi variants but with elite weights
    dscem_multi_iteration   and no temperature adaptation
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .envs import Task, batch_costs, clamp_controls
from .correlation import build_correlation
from .proposal import (ProposalParams, momentum_update, transform_samples,
                       warm_start_shift, weighted_moments)
from .sampling import SamplePool, permutation_rng, permute_dimensions, select_iteration_subset
from .weighting import (WeightingConfig, adapt_temperature, elite_weights,
                        exponential_weights)

METHODS = ("mppi", "mppi_iterative", "dsmppi_permutation", "dsmppi_multi_iteration",
           "dscem_permutation", "dscem_multi_iteration")


class ControllerError(RuntimeError):
    """Misconfiguration or an unrecoverable step failure (all rollouts failed)."""


@dataclass
class ControllerConfig:
    method: str
    horizon: int
    sample_count: int
    iterations: int = 3
    buffer_size: int = 3
    momentum_alpha: float = 0.1
    beta: float = 1.0
    sigma0: float = 1.0
    mean0: float = 0.0
    sigma_floor: float = 1e-6
    lambda_persist: bool = True  # carry adapted lambda across MPC steps
    sigma_reset: bool = True     # reset sigma to sigma0 at each MPC step
    weighting: WeightingConfig = field(default_factory=WeightingConfig)

    def __post_init__(self):
        if self.method not in METHODS and self.method != "custom":
            raise ControllerError(f"unknown method {self.method!r}")
        if self.iterations < 1:
            raise ControllerError("iterations must be >= 1")
        if self.buffer_size < 0:
            raise ControllerError("buffer_size must be >= 0")


@dataclass(frozen=True)
class MethodWiring:
    """Which components a method uses; produced by method_wiring()."""

    sampling: str            # "random" | "pool"
    variation: str           # "none" | "permutation" | "multi_iteration"
    weighting_scheme: str    # "exponential" | "elite"
    adapt_temperature: bool
    update_sigma: bool
    buffer_size: int
    return_best: bool        # False -> return the proposal mean's first control
    iterations: int
    momentum_alpha: float
    eval_mean: bool = True   # evaluate the proposal mean as a candidate sequence


def method_wiring(method: str, config: ControllerConfig) -> MethodWiring:
    """Map a method name to its component configuration."""
    if method == "mppi":
        # Single weighted average, no proposal refinement beyond the mean.
        return MethodWiring("random", "none", "exponential",
                            adapt_temperature=False, update_sigma=False,
                            buffer_size=0, return_best=False, iterations=1,
                            momentum_alpha=0.0, eval_mean=False)
    if method == "mppi_iterative":
        return MethodWiring("random", "none", "exponential",
                            adapt_temperature=True, update_sigma=True,
                            buffer_size=config.buffer_size, return_best=True,
                            iterations=config.iterations,
                            momentum_alpha=config.momentum_alpha)
    if method in ("dsmppi_permutation", "dsmppi_multi_iteration"):
        variation = "permutation" if method.endswith("permutation") else "multi_iteration"
        return MethodWiring("pool", variation, "exponential",
                            adapt_temperature=True, update_sigma=True,
                            buffer_size=config.buffer_size, return_best=True,
                            iterations=config.iterations,
                            momentum_alpha=config.momentum_alpha)
    if method in ("dscem_permutation", "dscem_multi_iteration"):
        variation = "permutation" if method.endswith("permutation") else "multi_iteration"
        return MethodWiring("pool", variation, "elite",
                            adapt_temperature=False, update_sigma=True,
                            buffer_size=config.buffer_size, return_best=True,
                            iterations=config.iterations,
                            momentum_alpha=config.momentum_alpha)
    raise ControllerError(f"unknown method {method!r}")


class EliteBuffer:
    """Up to `capacity` (cost, sequence) pairs, ascending by cost, exact-dedup."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.costs: list[float] = []
        self.sequences: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.sequences)


def refresh_buffer(buffer: EliteBuffer, sequences: np.ndarray,
                   costs: np.ndarray) -> EliteBuffer:
    """New buffer holding the lowest-cost entries of (old buffer + batch).

    Non-finite batch entries are dropped; duplicates (exact sequence
    equality) keep their first occurrence, so an already-buffered sequence
    re-evaluated in the batch does not occupy two slots.
    """
    out = EliteBuffer(buffer.capacity)
    if buffer.capacity == 0:
        return out
    pool_costs = list(buffer.costs)
    pool_seqs = list(buffer.sequences)
    for c, s in zip(np.asarray(costs, dtype=float), np.asarray(sequences)):
        if np.isfinite(c):
            pool_costs.append(float(c))
            pool_seqs.append(np.array(s, dtype=np.float64))
    order = np.argsort(pool_costs, kind="stable")
    seen = set()
    for idx in order:
        key = pool_seqs[idx].tobytes()
        if key in seen:
            continue
        seen.add(key)
        out.costs.append(pool_costs[idx])
        out.sequences.append(pool_seqs[idx])
        if len(out.sequences) == out.capacity:
            break
    return out


@dataclass
class StepDiagnostics:
    """Per-iteration optimizer internals of one MPC step."""

    rho: np.ndarray        # minimum finite cost per iteration
    eta: np.ndarray        # weight normalizer (nan for elite weighting)
    lam: np.ndarray        # temperature after adaptation
    best_cost: np.ndarray  # best cost seen up to and including the iteration
    n_failed: int = 0


class MpcController:
    """Receding-horizon controller; owns proposal state, buffer, and RNG streams.

    A deterministic pool must be supplied for pool-sampling methods (dim D for
    the permutation scheme, D * iterations for the multi-iteration scheme,
    where D = horizon * control_dim). `seed` drives the random-sampling
    baseline draws and the permutation stream; with variation "none" and no
    random sampling the step is fully deterministic.
    """

    def __init__(self, config: ControllerConfig, task: Task,
                 pool: SamplePool | None = None, seed=0,
                 wiring: MethodWiring | None = None):
        self.config = config
        self.task = task
        self.wiring = wiring if wiring is not None else method_wiring(config.method, config)
        self.dim = config.horizon * task.control_dim
        self.pool = pool

        if self.wiring.sampling == "pool":
            if pool is None:
                raise ControllerError(f"method {config.method!r} requires a sample pool")
            expected = self.dim * (self.wiring.iterations
                                   if self.wiring.variation == "multi_iteration" else 1)
            if pool.dim != expected:
                raise ControllerError(
                    f"pool dim {pool.dim} does not match method {config.method!r} "
                    f"(expected {expected} for horizon {config.horizon} x "
                    f"d_u {task.control_dim})")
            if pool.count != config.sample_count:
                raise ControllerError(
                    f"pool count {pool.count} != sample_count {config.sample_count}")

        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        sample_ss, perm_ss = ss.spawn(2)
        self._rng = np.random.default_rng(sample_ss)
        self._perm_rng = permutation_rng(perm_ss)

        corr = build_correlation(config.horizon, task.control_dim, config.beta)
        self.a_rho = corr.a_rho
        self.params = ProposalParams(
            mean=np.full(self.dim, float(config.mean0)),
            sigma=np.full(self.dim, float(config.sigma0)),
            a_rho=self.a_rho,
            lam=config.weighting.lambda0,
            momentum_alpha=self.wiring.momentum_alpha,
            sigma_floor=config.sigma_floor,
        )
        self.buffer = EliteBuffer(self.wiring.buffer_size)
        self._elite_count = max(1, round(config.weighting.elite_frac * config.sample_count))

    def _std_samples(self, iteration: int) -> np.ndarray:
        w = self.wiring
        if w.sampling == "random":
            return self._rng.standard_normal((self.config.sample_count, self.dim))
        if w.variation == "multi_iteration":
            return select_iteration_subset(self.pool, iteration, self.dim)
        if w.variation == "permutation":
            return permute_dimensions(self.pool.samples, self._perm_rng)
        return self.pool.samples

    def _weights(self, costs: np.ndarray):
        """Weights over all evaluated sequences; failed (inf) rollouts get 0."""
        finite = np.isfinite(costs)
        n_failed = int(costs.size - finite.sum())
        if not finite.any():
            raise ControllerError("all rollouts failed (non-finite states)")
        sub = costs[finite]
        if self.wiring.weighting_scheme == "exponential":
            w_sub, eta = exponential_weights(sub, self.params.lam)
        else:
            k = min(self._elite_count, sub.size)
            w_sub = elite_weights(sub, k)
            eta = float("nan")
        weights = np.zeros_like(costs)
        weights[finite] = w_sub
        return weights, eta, float(sub.min()), n_failed

    def step(self, x_k: np.ndarray):
        """One MPC step; returns (clamped first control, StepDiagnostics)."""
        cfg, w = self.config, self.wiring
        d_u = self.task.control_dim

        # Warm start: shift the mean and buffered sequences one stage forward.
        # The proposal spread either restarts from sigma0 (default, so the
        # across-step loop cannot starve itself of exploration) or is shifted
        # along with the mean when sigma_reset is disabled.
        sigma = (np.full(self.dim, float(cfg.sigma0)) if cfg.sigma_reset
                 else warm_start_shift(self.params.sigma, d_u))
        self.params = dataclasses.replace(
            self.params,
            mean=warm_start_shift(self.params.mean, d_u),
            sigma=sigma,
        )
        if not cfg.lambda_persist:
            self.params = dataclasses.replace(self.params, lam=cfg.weighting.lambda0)
        self.buffer.sequences = [warm_start_shift(s, d_u) for s in self.buffer.sequences]

        n_iter = w.iterations
        diag = StepDiagnostics(rho=np.empty(n_iter), eta=np.empty(n_iter),
                               lam=np.empty(n_iter), best_cost=np.empty(n_iter))
        best_cost = np.inf
        best_seq = None
        for j in range(n_iter):
            seqs = transform_samples(self.params, self._std_samples(j))
            extra = []
            if w.eval_mean:
                extra.append(self.params.mean[None, :])
            extra.extend(s[None, :] for s in self.buffer.sequences)
            if extra:
                seqs = np.vstack([seqs] + extra)
            costs = batch_costs(self.task, x_k, seqs)
            weights, eta, rho, n_failed = self._weights(costs)
            diag.n_failed += n_failed

            i_best = int(np.argmin(costs))
            if costs[i_best] < best_cost:
                best_cost = float(costs[i_best])
                best_seq = seqs[i_best].copy()

            mean_prime, var_prime = weighted_moments(seqs, weights)
            if not w.update_sigma:
                var_prime = self.params.sigma ** 2
            self.params = momentum_update(self.params, mean_prime, var_prime)
            if w.adapt_temperature:
                self.params = dataclasses.replace(
                    self.params,
                    lam=adapt_temperature(self.params.lam, eta, cfg.weighting))
            if w.buffer_size:
                # seqs already contains the old buffer's sequences with costs
                # recomputed at x_k, so refresh from empty: merging the old
                # entries would rank them by their stale costs.
                self.buffer = refresh_buffer(EliteBuffer(w.buffer_size), seqs, costs)

            diag.rho[j] = rho
            diag.eta[j] = eta
            diag.lam[j] = self.params.lam
            diag.best_cost[j] = best_cost

        u = best_seq[:d_u] if w.return_best else self.params.mean[:d_u]
        return clamp_controls(u, self.task.u_min, self.task.u_max), diag
