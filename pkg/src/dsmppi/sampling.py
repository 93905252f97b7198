"""Deterministic standard-normal sample sets.

A pool is a fixed set of N points in R^d placed to approximate N(0, I),
used in place of random draws. Placement minimizes a modified Cramer-von
Mises distance between the localized cumulative distribution (LCD) of the
standard normal and that of the equally weighted Dirac mixture: Gaussian
kernels of width b are correlated against both distributions, the squared
LCD difference is integrated in closed form over kernel position, and the
kernel width is integrated numerically over (0, b_max] with weight b^(1-d).

Pools are generated offline (deterministically, from a scrambled-Sobol
initialization with a fixed seed), persisted in a small binary format, and
varied online either by selecting per-iteration column subsets from a
larger pool or by randomly permuting sample dimensions.
"""

from __future__ import annotations

import io
import json
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.stats import qmc

from .correlation import matrix_sqrt

# Generation quality gates on the realized sample moments. The mean gate
# applies from 20 samples up, the covariance gate once the sample covariance
# can plausibly have full rank (count >= dim + 5).
MEAN_GATE = 0.02
COV_GATE = 0.05

_MAGIC = b"DSPL"
_VERSION = 1


class PoolFormatError(ValueError):
    """Raised when a pool file cannot be parsed; names the offending field."""


class PoolGenerationError(RuntimeError):
    """Optimizer failed the moment gates; carries the best pool found."""

    def __init__(self, message, pool, mean_error, cov_error):
        super().__init__(message)
        self.pool = pool
        self.mean_error = mean_error
        self.cov_error = cov_error


@dataclass(frozen=True)
class SamplePool:
    """Immutable (count, dim) matrix of deterministic standard-normal points."""

    samples: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise ValueError(f"samples must be a (count, dim) matrix, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite entries")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class VariationScheme:
    """How the fixed pool is varied across optimizer iterations."""

    kind: str = "none"  # "multi_iteration" | "permutation" | "none"
    pool_dim_factor: int = 1

    def __post_init__(self):
        if self.kind not in ("multi_iteration", "permutation", "none"):
            raise ValueError(f"unknown variation scheme {self.kind!r}")
        if self.kind == "multi_iteration" and self.pool_dim_factor < 1:
            raise ValueError("multi_iteration requires pool_dim_factor >= 1")


@dataclass
class PoolOptimizerConfig:
    iterations: int = 400
    learning_rate: float = 0.02
    b_max: float | None = None  # None -> max(5, 2 sqrt(dim)); must scale with dim
    quad_nodes: int = 32
    init_seed: int = 1925
    init_points: np.ndarray | None = None
    moment_correction: bool = True

    def resolved_b_max(self, dim: int) -> float:
        return self.b_max if self.b_max is not None else max(5.0, 2.0 * np.sqrt(dim))


def _quad_tables(dim: int, count: int, b_max: float, nodes: int):
    """Per-node coefficients of the width integral, weight w(b) = b^(1-d).

    Closed forms in the kernel position leave three terms per width b:
      normal-normal   c_ff  = pi^(d/2) * b * (b^2 / (1 + b^2))^(d/2)
      normal-Dirac    c_fd  = b * (2 pi b^2 / (1 + 2 b^2))^(d/2) / N
      Dirac-Dirac     c_dd  = pi^(d/2) * b / N^2
    with sample-dependent factors exp(-|x_i|^2 / (2 (1 + 2 b^2))) and
    exp(-|x_i - x_j|^2 / (4 b^2)). Coefficients are built in log space.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    b = 0.5 * b_max * (gl_x + 1.0)
    q = 0.5 * b_max * gl_w
    d = float(dim)
    log_b = np.log(b)
    c_ff = np.exp(0.5 * d * np.log(np.pi) + (d + 1.0) * log_b - 0.5 * d * np.log1p(b * b))
    c_fd = np.exp(log_b + 0.5 * d * np.log(2.0 * np.pi * b * b / (1.0 + 2.0 * b * b))
                  - np.log(count))
    c_dd = np.exp(0.5 * d * np.log(np.pi) + log_b - 2.0 * np.log(count))
    s1 = 1.0 / (1.0 + 2.0 * b * b)
    norm = float(np.dot(q, c_ff))  # scale-free reference: the normal-normal integral
    return {"b": b, "q": q, "c_ff": c_ff, "c_fd": c_fd, "c_dd": c_dd, "s1": s1,
            "norm": norm}


def _cvm_value_grad(x: np.ndarray, tab: dict, with_grad: bool = True):
    """Modified CvM distance (normalized) and its gradient w.r.t. the points."""
    n = x.shape[0]
    sq_norm = np.einsum("ij,ij->i", x, x)
    gram = x @ x.T
    sqdist = sq_norm[:, None] + sq_norm[None, :] - 2.0 * gram
    np.maximum(sqdist, 0.0, out=sqdist)

    value = float(np.dot(tab["q"], tab["c_ff"]))
    grad = np.zeros_like(x) if with_grad else None
    for b, q, c_fd, c_dd, s1 in zip(tab["b"], tab["q"], tab["c_fd"], tab["c_dd"], tab["s1"]):
        g = np.exp(-0.5 * s1 * sq_norm)       # (N,)
        e = np.exp(-sqdist / (4.0 * b * b))   # (N, N)
        value += q * (-2.0 * c_fd * g.sum() + c_dd * e.sum())
        if with_grad:
            grad += (2.0 * q * c_fd * s1) * (g[:, None] * x)
            r = e.sum(axis=1)
            grad -= (q * c_dd / (b * b)) * (r[:, None] * x - e @ x)
    value /= tab["norm"]
    if with_grad:
        grad /= tab["norm"]
    return value, grad


def _moment_correct(x: np.ndarray) -> np.ndarray:
    """Center the points and, when the sample covariance has full rank,
    whiten them so the realized mean and covariance are exact."""
    n, d = x.shape
    x = x - x.mean(axis=0)
    if n <= d:
        std = x.std(axis=0)
        return x / np.where(std > 1e-12, std, 1.0)
    cov = x.T @ x / n
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 1e-8:
        std = np.sqrt(np.maximum(np.diag(cov), 1e-12))
        return x / std
    root = matrix_sqrt(cov)
    return np.linalg.solve(root, x.T).T


def moment_errors(samples: np.ndarray):
    """Max-abs sample mean and max-abs entrywise deviation of the sample
    covariance (biased, mean-centered) from the identity."""
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / n
    return float(np.max(np.abs(mean))), float(np.max(np.abs(cov - np.eye(samples.shape[1]))))


def generate_pool(dim: int, count: int,
                  optimizer_config: PoolOptimizerConfig | None = None) -> SamplePool:
    """Place `count` points in R^dim approximating N(0, I).

    Deterministic for a fixed config: initialization is scrambled Sobol
    (fixed seed) pushed through the normal inverse CDF, refined by Adam on
    the modified CvM distance, then moment-corrected (unless disabled).
    Raises PoolGenerationError when the moment gates fail at sizes where
    they apply; the exception carries the best pool found.
    """
    if dim < 1 or count < 2:
        raise ValueError(f"need dim >= 1 and count >= 2, got dim={dim}, count={count}")
    cfg = optimizer_config or PoolOptimizerConfig()

    if cfg.init_points is not None:
        x = np.array(cfg.init_points, dtype=np.float64)
        if x.shape != (count, dim):
            raise ValueError(f"init_points shape {x.shape} != ({count}, {dim})")
        init_kind = "explicit"
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # Sobol balance warning for non-2^k counts
            u = qmc.Sobol(d=dim, scramble=True, seed=cfg.init_seed).random(count)
        x = stats.norm.ppf(u)
        init_kind = "sobol"

    b_max = cfg.resolved_b_max(dim)
    tab = _quad_tables(dim, count, b_max, cfg.quad_nodes)
    cvm_initial, _ = _cvm_value_grad(x, tab, with_grad=False)

    # Adam in point space; the objective is smooth and scale-normalized.
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for it in range(cfg.iterations):
        _, grad = _cvm_value_grad(x, tab)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1 ** (it + 1))
        v_hat = v / (1.0 - beta2 ** (it + 1))
        x -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

    if cfg.moment_correction:
        x = _moment_correct(x)

    mean_err, cov_err = moment_errors(x)
    cvm_final, _ = _cvm_value_grad(x, tab, with_grad=False)
    converged = (count < 20 or mean_err <= MEAN_GATE) and \
                (count < dim + 5 or cov_err <= COV_GATE)
    pool = SamplePool(x, provenance={
        "method": "lcd-cvm-adam",
        "iterations": cfg.iterations,
        "learning_rate": cfg.learning_rate,
        "b_max": b_max,
        "quad_nodes": cfg.quad_nodes,
        "init": init_kind,
        "init_seed": cfg.init_seed,
        "moment_correction": cfg.moment_correction,
        "cvm_initial": cvm_initial,
        "cvm_final": cvm_final,
        "mean_error": mean_err,
        "cov_error": cov_err,
        "converged": converged,
    })
    if not converged:
        raise PoolGenerationError(
            f"pool ({count} x {dim}) failed moment gates within {cfg.iterations} "
            f"iterations: mean_error={mean_err:.4g} (gate {MEAN_GATE}), "
            f"cov_error={cov_err:.4g} (gate {COV_GATE})",
            pool=pool, mean_error=mean_err, cov_error=cov_err)
    return pool


@dataclass(frozen=True)
class QualityReport:
    mean_error: float
    cov_error: float
    cvm_value: float


def cvm_quality(pool: SamplePool, b_max: float | None = None, quad_nodes: int = 32) -> QualityReport:
    """Moment errors plus the (normalized) modified CvM distance of a pool."""
    mean_err, cov_err = moment_errors(pool.samples)
    if b_max is None:
        b_max = max(5.0, 2.0 * np.sqrt(pool.dim))
    tab = _quad_tables(pool.dim, pool.count, b_max, quad_nodes)
    value, _ = _cvm_value_grad(np.array(pool.samples), tab, with_grad=False)
    return QualityReport(mean_err, cov_err, value)


def save_pool(pool: SamplePool, path) -> None:
    """Write magic | version | dim | count | provenance JSON | row-major f64."""
    meta = json.dumps(pool.provenance, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _VERSION, pool.dim, pool.count))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(pool.samples.astype("<f8", copy=False).tobytes())


def load_pool(path) -> SamplePool:
    """Inverse of save_pool; bit-exact round trip of the sample matrix."""
    with open(path, "rb") as fh:
        raw = fh.read()
    buf = io.BytesIO(raw)
    magic = buf.read(4)
    if magic != _MAGIC:
        raise PoolFormatError(f"bad magic {magic!r}, expected {_MAGIC!r}")
    header = buf.read(12)
    if len(header) != 12:
        raise PoolFormatError("truncated header (version/dim/count)")
    version, dim, count = struct.unpack("<III", header)
    if version != _VERSION:
        raise PoolFormatError(f"unsupported version {version}")
    if dim < 1:
        raise PoolFormatError(f"invalid dim {dim}")
    if count < 1:
        raise PoolFormatError(f"invalid count {count}")
    meta_len_raw = buf.read(4)
    if len(meta_len_raw) != 4:
        raise PoolFormatError("truncated header (meta length)")
    (meta_len,) = struct.unpack("<I", meta_len_raw)
    meta_raw = buf.read(meta_len)
    if len(meta_raw) != meta_len:
        raise PoolFormatError("truncated provenance block")
    try:
        provenance = json.loads(meta_raw.decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PoolFormatError(f"malformed provenance JSON: {exc}") from exc
    body = buf.read()
    expected = dim * count * 8
    if len(body) != expected:
        raise PoolFormatError(
            f"sample matrix has {len(body)} bytes, expected {expected} (count x dim x 8)")
    samples = np.frombuffer(body, dtype="<f8").reshape(count, dim)
    if not np.all(np.isfinite(samples)):
        raise PoolFormatError("sample matrix contains non-finite entries")
    return SamplePool(samples, provenance)


def export_pool_text(pool: SamplePool, path) -> None:
    """Optional plain-text export (one sample per line, full precision)."""
    with open(path, "w") as fh:
        fh.write(f"# dim: {pool.dim}\n# count: {pool.count}\n")
        for row in pool.samples:
            fh.write(" ".join(repr(float(val)) for val in row) + "\n")


def select_iteration_subset(pool: SamplePool, iteration: int, per_iter_dim: int) -> np.ndarray:
    """Columns [j * per_iter_dim, (j+1) * per_iter_dim) of the pool, as a view."""
    if per_iter_dim < 1 or pool.dim % per_iter_dim != 0:
        raise ValueError(
            f"pool dim {pool.dim} is not a multiple of per-iteration dim {per_iter_dim}")
    n_blocks = pool.dim // per_iter_dim
    if not 0 <= iteration < n_blocks:
        raise IndexError(f"iteration {iteration} out of range [0, {n_blocks})")
    return pool.samples[:, iteration * per_iter_dim:(iteration + 1) * per_iter_dim]


def permute_dimensions(samples: np.ndarray, rng) -> np.ndarray:
    """Apply one rng-drawn column permutation identically to every sample row."""
    samples = np.asarray(samples)
    perm = rng.permutation(samples.shape[1])
    return samples[:, perm]


def permutation_rng(seed) -> np.random.Generator:
    """Dedicated counter-based generator for dimension permutations."""
    return np.random.Generator(np.random.Philox(seed))
