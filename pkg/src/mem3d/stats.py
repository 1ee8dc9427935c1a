"""Model-level statistics: the Mann-Whitney z-score over nearest-training distances
and the Frechet distance between Gaussians fitted to embeddings.

Sign convention for Z_U: U counts pairs where a generated distance exceeds a
test distance, so Z_U < 0 means generated samples sit closer to the training
set than held-out samples do (memorization).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .metrics import EmbeddingSet

NORMAL_APPROX_MIN = 20
SYMMETRY_TOL = 1e-9
NEGATIVE_EIG_TOL = 1e-8


@dataclass(frozen=True)
class DistanceSet:
    values: tuple[float, ...]
    source: str = "test"
    query_ids: tuple[str, ...] | None = None
    neighbor_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DataError(f"empty {self.source} distance set")
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"non-finite value in {self.source} distance set")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class MWUResult:
    u: float
    n: int
    m: int
    mu: float
    sigma: float
    z: float

    @property
    def delta_hat(self) -> float:
        """U / (n m), the empirical estimate of P(generated distance > test distance)."""
        return self.u / (self.n * self.m)

    def verdict(self) -> str:
        if self.z < 0:
            return "memorization: generated shapes are closer to training data than held-out shapes"
        return "no memorization evidence: generated shapes are not closer to training data than held-out shapes"


def average_ranks(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1-based ranks with ties sharing their mean rank, plus the tie-group sizes."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(values)]])
    sizes = ends - starts
    mean_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(values))
    ranks[order] = np.repeat(mean_rank, sizes)
    return ranks, sizes


def _as_array(d) -> np.ndarray:
    return d.array() if isinstance(d, DistanceSet) else np.asarray(d, dtype=np.float64).ravel()


def mann_whitney_u(d_test, d_gen) -> MWUResult:
    """Rank-form Mann-Whitney U of generated vs test distances, with tie correction.

    U = R_gen - m(m+1)/2 using average ranks, so every generated/test tie
    counts one half. sigma includes the standard tie correction and reduces
    to sqrt(nm(n+m+1)/12) when there are no ties.
    """
    a, b = _as_array(d_test), _as_array(d_gen)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise DataError("Mann-Whitney U needs non-empty test and generated sets")
    if n < NORMAL_APPROX_MIN or m < NORMAL_APPROX_MIN:
        warnings.warn(
            f"normal approximation for Z_U is unreliable below {NORMAL_APPROX_MIN} samples (n={n}, m={m})",
            RuntimeWarning,
            stacklevel=2,
        )
    ranks, ties = average_ranks(np.concatenate([a, b]))
    u = float(ranks[n:].sum() - m * (m + 1) / 2.0)
    total = n + m
    mu = n * m / 2.0
    tie_term = float((ties.astype(np.float64) ** 3 - ties).sum())
    correction = tie_term / (total * (total - 1)) if total > 1 else 0.0
    var = n * m / 12.0 * ((total + 1) - correction)
    if not var > 0:
        raise NumericalError("sigma_U is zero: all distances are identical")
    sigma = math.sqrt(var)
    return MWUResult(u=u, n=n, m=m, mu=mu, sigma=sigma, z=(u - mu) / sigma)


@dataclass(frozen=True, eq=False)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class FDResult:
    value: float
    mean_term: float
    trace_term: float
    clamped: bool = False


def fit_gaussian(embeds) -> GaussianStats:
    """Sample mean and unbiased (1/(n-1)) covariance, accumulated in sorted-id order."""
    if isinstance(embeds, EmbeddingSet):
        x = embeds.sorted_values()
    else:
        x = np.asarray(embeds, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise DataError("fitting a Gaussian needs at least 2 samples")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (len(x) - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean, cov, len(x))


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root by eigendecomposition.

    Eigenvalues in [-1e-8, 0) are clamped to zero; anything more negative is
    treated as a genuinely non-PSD input. For matrices whose largest
    eigenvalue exceeds 1 the threshold scales with it.
    """
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError(f"psd_sqrt needs a square matrix, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    if np.abs(a - a.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise NumericalError("matrix is not symmetric")
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    if w.size and w.min() < -NEGATIVE_EIG_TOL * max(1.0, float(np.abs(w).max())):
        raise NumericalError(f"matrix is not positive semi-definite (min eigenvalue {w.min():.3e})")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return (root + root.T) / 2.0


def frechet_distance(g1: GaussianStats, g2: GaussianStats) -> FDResult:
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)."""
    if g1.dim != g2.dim:
        raise DataError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    diff = g1.mean - g2.mean
    mean_term = float(diff @ diff)
    root1 = psd_sqrt(g1.cov)
    inner = root1 @ g2.cov @ root1
    cross = psd_sqrt((inner + inner.T) / 2.0)
    trace_term = float(np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * np.trace(cross))
    value = mean_term + trace_term
    if value < -1e-6:
        raise NumericalError(f"Frechet distance came out negative ({value:.3e})")
    clamped = value < 0
    return FDResult(max(value, 0.0), mean_term, trace_term, clamped)
