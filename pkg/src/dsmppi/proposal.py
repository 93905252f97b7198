"""Gaussian proposal over flattened control sequences.

A control sequence is a flat float64 vector of length H * d_u in time-major
layout (entry n * d_u + m is control dimension m at stage n). The proposal
is parameterized by a mean vector, per-dimension standard deviations, and a
fixed correlation square root shared across iterations; only the marginal
variances are estimated from weighted samples.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass
class ProposalParams:
    """Mean / marginal stds / shared correlation root / temperature."""

    mean: np.ndarray          # (D,)
    sigma: np.ndarray         # (D,), all > 0
    a_rho: np.ndarray         # (D, D), fixed square root of the correlation
    lam: float = 1.0
    momentum_alpha: float = 0.0
    sigma_floor: float = 1e-6

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        d = self.mean.size
        if self.sigma.shape != (d,):
            raise ValueError(f"sigma shape {self.sigma.shape} != mean shape ({d},)")
        if self.a_rho.shape != (d, d):
            raise ValueError(f"a_rho shape {self.a_rho.shape}, expected ({d}, {d})")
        if np.any(self.sigma <= 0.0):
            raise ValueError("all sigma entries must be positive")
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not 0.0 <= self.momentum_alpha < 1.0:
            raise ValueError(f"momentum_alpha must be in [0, 1), got {self.momentum_alpha}")

    @property
    def dim(self) -> int:
        return self.mean.size


def transform_samples(params: ProposalParams, std_samples: np.ndarray) -> np.ndarray:
    """Map standard-normal rows through the proposal: mean + diag(sigma) A_rho s."""
    std_samples = np.asarray(std_samples, dtype=np.float64)
    if std_samples.ndim != 2 or std_samples.shape[1] != params.dim:
        raise ValueError(
            f"std_samples shape {std_samples.shape} incompatible with proposal dim {params.dim}")
    out = std_samples @ params.a_rho.T
    out *= params.sigma
    out += params.mean
    return out


def weighted_moments(sequences: np.ndarray, weights: np.ndarray):
    """Weighted mean and elementwise weighted variance of sample rows.

    The variance is centered on the weighted mean computed in the same call.
    Weights must already be normalized (sum to 1 within 1e-12).
    """
    sequences = np.asarray(sequences, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if sequences.ndim != 2 or weights.shape != (sequences.shape[0],):
        raise ValueError("sequences must be (N, D) with one weight per row")
    total = weights.sum()
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1 (got {total!r})")
    mean_prime = weights @ sequences
    dev = sequences - mean_prime
    var_prime = weights @ (dev * dev)
    return mean_prime, np.maximum(var_prime, 0.0)


def momentum_update(params: ProposalParams, mean_prime: np.ndarray,
                    var_prime: np.ndarray) -> ProposalParams:
    """Blend new weighted moments into the proposal with momentum alpha.

    new_mean = alpha * mean + (1 - alpha) * mean', and the same convex
    combination in marginal-variance space; sigma is floored afterwards.
    The correlation root and temperature are left untouched.
    """
    a = params.momentum_alpha
    new_mean = a * params.mean + (1.0 - a) * np.asarray(mean_prime, dtype=np.float64)
    new_var = a * params.sigma ** 2 + (1.0 - a) * np.asarray(var_prime, dtype=np.float64)
    new_sigma = np.maximum(np.sqrt(np.maximum(new_var, 0.0)), params.sigma_floor)
    return dataclasses.replace(params, mean=new_mean, sigma=new_sigma)


def warm_start_shift(seq: np.ndarray, control_dim: int = 1) -> np.ndarray:
    """Shift a flat control sequence one stage forward, repeating the last stage."""
    seq = np.asarray(seq)
    if seq.size % control_dim != 0:
        raise ValueError(f"sequence length {seq.size} not divisible by d_u={control_dim}")
    out = np.empty_like(seq)
    out[:-control_dim] = seq[control_dim:]
    out[-control_dim:] = seq[-control_dim:]
    return out
