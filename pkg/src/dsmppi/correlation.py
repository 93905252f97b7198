"""Fixed time-correlation structure for control-sequence sampling.

The temporal correlation matrix is derived from the power spectral density
of colored noise, PSD(f) ~ 1/f^beta, via the Wiener-Khinchin theorem. The
full correlation over a flattened control sequence is the Kronecker product
of the temporal matrix with a spatial (per-control-dimension) matrix, and
its symmetric matrix square root is what sample transforms actually use.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

# Tolerances for symmetry / semidefiniteness checks.
SYM_TOL = 1e-10
EIG_TOL = 1e-10


def colored_noise_correlation(horizon: int, beta: float) -> np.ndarray:
    """Temporal correlation matrix of 1/f^beta noise, size horizon x horizon.

    The autocorrelation is the inverse DFT of the PSD evaluated on a 2*horizon
    frequency grid (the zero-frequency bin is replaced by the lowest nonzero
    bin's value), normalized to unit lag-0 and arranged as a symmetric
    Toeplitz matrix. beta=0 gives the identity (white noise).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")

    n = 2 * horizon
    freqs = np.fft.rfftfreq(n)  # 0, 1/n, ..., 1/2
    psd = np.empty_like(freqs)
    psd[1:] = freqs[1:] ** (-beta)
    psd[0] = psd[1] if len(psd) > 1 else 1.0  # zero bin := f_min bin
    autocorr = np.fft.irfft(psd, n=n)
    r = autocorr[:horizon] / autocorr[0]

    idx = np.arange(horizon)
    c = r[np.abs(idx[:, None] - idx[None, :])]
    c = 0.5 * (c + c.T)

    # The Toeplitz block is a principal submatrix of a PSD circulant, so
    # negative eigenvalues can only be roundoff; clip them if they show up.
    eigvals = np.linalg.eigvalsh(c)
    if eigvals[0] < 0.0:
        w, v = np.linalg.eigh(c)
        n_clipped = int(np.sum(w < 0.0))
        log.debug(
            "colored_noise_correlation(H=%d, beta=%g): clipping %d eigenvalues (min %.3e)",
            horizon, beta, n_clipped, eigvals[0],
        )
        w = np.clip(w, 0.0, None)
        c = (v * w) @ v.T
        c = 0.5 * (c + c.T)
    return c


def kronecker(c_temp: np.ndarray, c_spatial: np.ndarray) -> np.ndarray:
    """Kronecker product; block (i, j) equals c_temp[i, j] * c_spatial."""
    c_temp = np.asarray(c_temp)
    c_spatial = np.asarray(c_spatial)
    if c_temp.ndim != 2 or c_temp.shape[0] != c_temp.shape[1]:
        raise ValueError(f"c_temp must be square, got shape {c_temp.shape}")
    if c_spatial.ndim != 2 or c_spatial.shape[0] != c_spatial.shape[1]:
        raise ValueError(f"c_spatial must be square, got shape {c_spatial.shape}")
    return np.kron(c_temp, c_spatial)


def matrix_sqrt(c: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root A of c with A @ A.T == c.

    Uses the eigendecomposition root (unique symmetric PSD root), clipping
    roundoff-negative eigenvalues at zero. Raises if the input is visibly
    asymmetric or indefinite.
    """
    c = np.asarray(c, dtype=np.float64)
    asym = np.max(np.abs(c - c.T)) if c.size else 0.0
    if asym > SYM_TOL:
        raise ValueError(f"matrix_sqrt: input asymmetric (max |C - C^T| = {asym:.3e})")
    w, v = np.linalg.eigh(0.5 * (c + c.T))
    if w[0] < -EIG_TOL:
        raise ValueError(f"matrix_sqrt: input indefinite (min eigenvalue = {w[0]:.6e})")
    w = np.clip(w, 0.0, None)
    a = (v * np.sqrt(w)) @ v.T
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class CorrelationStructure:
    """Precomputed correlation matrices for one (horizon, control_dim, beta)."""

    horizon: int
    control_dim: int
    beta: float
    c_temp: np.ndarray    # (H, H)
    c_spatial: np.ndarray  # (d_u, d_u)
    c_rho: np.ndarray     # (H*d_u, H*d_u)
    a_rho: np.ndarray     # (H*d_u, H*d_u), a_rho @ a_rho.T == c_rho


@functools.lru_cache(maxsize=32)
def build_correlation(horizon: int, control_dim: int, beta: float) -> CorrelationStructure:
    """Build (and cache) the correlation structure with identity spatial part."""
    c_temp = colored_noise_correlation(horizon, beta)
    c_spatial = np.eye(control_dim)
    c_rho = kronecker(c_temp, c_spatial)
    a_rho = matrix_sqrt(c_rho)
    for arr in (c_temp, c_spatial, c_rho, a_rho):
        arr.setflags(write=False)
    return CorrelationStructure(horizon, control_dim, float(beta),
                                c_temp, c_spatial, c_rho, a_rho)


def dump_c_temp_csv(structure: CorrelationStructure, path) -> None:
    """Write the temporal correlation matrix to CSV for inspection."""
    np.savetxt(path, structure.c_temp, delimiter=",")
