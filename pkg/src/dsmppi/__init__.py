"""Sampling-based MPC with deterministic Gaussian sample sets.

Implements dsMPPI (deterministic-sampling MPPI) together with its ablations
(standard MPPI, iterative random-sampling MPPI, dsCEM) and a benchmark
harness for the cart-pole swing-up and truck backer-upper tasks.
"""

from .controller import (ControllerConfig, ControllerError, EliteBuffer,
                         METHODS, MethodWiring, MpcController, method_wiring,
                         refresh_buffer)
from .correlation import (CorrelationStructure, build_correlation,
                          colored_noise_correlation, kronecker, matrix_sqrt)
from .envs import (QuadraticCostSpec, RolloutResult, Task, batch_costs,
                   cartpole_augment, cartpole_step, cartpole_task,
                   clamp_controls, make_task, rollout, stage_cost,
                   terminal_cost, truck_step, truck_task)
from .harness import (EpisodeRecord, ExperimentSpec, Summary, cumulative_cost,
                      run_episode, run_experiment, sample_initial_state,
                      settled_smoothness, smoothness, summarize)
from .proposal import (ProposalParams, momentum_update, transform_samples,
                       warm_start_shift, weighted_moments)
from .sampling import (PoolFormatError, PoolGenerationError, PoolOptimizerConfig,
                       SamplePool, VariationScheme, cvm_quality, generate_pool,
                       load_pool, permutation_rng, permute_dimensions,
                       save_pool, select_iteration_subset)
from .weighting import (WeightingConfig, adapt_temperature, elite_weights,
                        exponential_weights)

__version__ = "0.1.0"
