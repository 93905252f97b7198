"""Cost-to-weight conversion and temperature adaptation.

Two schemes: soft exponential weights (MPPI style, with the minimum cost
subtracted before exponentiation for numerical stability) and hard elite
weights (CEM style, the K cheapest samples weighted equally).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Multiplicative temperature updates are unbounded by themselves; clamp so
# long closed-loop episodes cannot drift lambda to degenerate magnitudes.
LAMBDA_FLOOR = 1e-4
LAMBDA_CEIL = 1e4


@dataclass
class WeightingConfig:
    scheme: str = "exponential"  # "exponential" | "elite"
    eta_min: float = 5.0
    eta_max: float = 10.0
    elite_frac: float = 0.1
    lambda0: float = 1.0

    def __post_init__(self):
        if self.scheme not in ("exponential", "elite"):
            raise ValueError(f"unknown weighting scheme {self.scheme!r}")
        if not 0.0 < self.eta_min < self.eta_max:
            raise ValueError(
                f"need 0 < eta_min < eta_max, got [{self.eta_min}, {self.eta_max}]")
        if not 0.0 < self.elite_frac <= 1.0:
            raise ValueError(f"elite_frac must be in (0, 1], got {self.elite_frac}")
        if self.lambda0 <= 0.0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")


class ExponentialWeights(NamedTuple):
    weights: np.ndarray
    eta: float


def exponential_weights(costs: np.ndarray, lam: float) -> ExponentialWeights:
    """Normalized exp(-(J - min J) / lambda) weights and their normalizer eta.

    eta is the sum of the unnormalized shifted exponentials, so it lies in
    [1, N]: the minimum-cost sample always contributes exactly 1.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 1 or costs.size == 0:
        raise ValueError("costs must be a non-empty 1-D array")
    bad = np.flatnonzero(~np.isfinite(costs))
    if bad.size:
        raise ValueError(f"non-finite cost at sample index {bad[0]}: {costs[bad[0]]}")
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    rho = costs.min()
    unnorm = np.exp(-(costs - rho) / lam)
    eta = float(unnorm.sum())
    return ExponentialWeights(unnorm / eta, eta)


def elite_weights(costs: np.ndarray, elite_count: int) -> np.ndarray:
    """Weight the elite_count cheapest samples 1/K each, all others 0.

    Cost ties at the threshold are broken by lowest sample index (stable sort).
    """
    costs = np.asarray(costs, dtype=np.float64)
    n = costs.size
    if not 1 <= elite_count <= n:
        raise ValueError(f"elite_count must be in [1, {n}], got {elite_count}")
    order = np.argsort(costs, kind="stable")
    weights = np.zeros(n)
    weights[order[:elite_count]] = 1.0 / elite_count
    return weights


def adapt_temperature(lam: float, eta: float, config: WeightingConfig) -> float:
    """One step of the heuristic temperature rule.

    Shrinks lambda by 0.9 when eta exceeds eta_max (weights too flat), grows
    it by 1.2 when eta falls below eta_min (weights too peaked), otherwise
    leaves it unchanged; the result is clamped to [LAMBDA_FLOOR, LAMBDA_CEIL].
    """
    if lam <= 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if eta > config.eta_max:
        lam = 0.9 * lam
    elif eta < config.eta_min:
        lam = 1.2 * lam
    return float(min(max(lam, LAMBDA_FLOOR), LAMBDA_CEIL))
