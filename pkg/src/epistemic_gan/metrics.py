"""Fidelity and diversity metrics for generated sample sets."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import GaussianMixtureSpec

EIG_FLOOR = 1e-12
PSD_TOL = 1e-8
SYM_TOL = 1e-9
PROJECTION_DIM = 16


class MetricError(ValueError):
    pass


@dataclass
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise MetricError(f"covariance shape {self.cov.shape} does not match mean dim {d}")
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > SYM_TOL * max(1.0, np.abs(self.cov).max()):
            raise MetricError("covariance is not symmetric")
        self.cov = 0.5 * (self.cov + self.cov.T)
        if d and np.linalg.eigvalsh(self.cov).min() < -PSD_TOL * max(1.0, np.abs(self.cov).max()):
            raise MetricError("covariance is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class MetricsReport:
    fid: float
    vendi: float
    modes_covered: int | None
    high_quality_fraction: float | None
    reference_vendi: float
    n: int
    bandwidth: float
    projection_seed: int | None
    feature_space: str

    def to_row(self) -> dict:
        return asdict(self)

    def render(self) -> str:
        lines = [
            f"FD (desk-scale, {self.feature_space}): {self.fid:.6f}",
            f"Vendi score: {self.vendi:.6f}",
            f"Vendi score (reference, real data): {self.reference_vendi:.6f}",
        ]
        if self.modes_covered is not None:
            lines.append(f"modes covered: {self.modes_covered}")
            lines.append(f"high-quality fraction: {self.high_quality_fraction:.6f}")
        lines.append(f"samples: {self.n}")
        lines.append(f"kernel: RBF, bandwidth {self.bandwidth:.6g}")
        if self.projection_seed is not None:
            lines.append(f"projection seed: {self.projection_seed}")
        return "\n".join(lines)


# --- Vendi ---------------------------------------------------------------------------


def median_bandwidth(points: np.ndarray) -> float:
    """Median pairwise Euclidean distance (0.0 if all points coincide)."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        raise MetricError("need at least 2 samples")
    return float(np.median(pdist(points)))


def rbf_kernel(points: np.ndarray, bandwidth: float) -> np.ndarray:
    """k(x, y) = exp(-|x - y|^2 / (2 h^2)); h = 0 degenerates to the identity-of-points kernel."""
    sq = squareform(pdist(points, "sqeuclidean"))
    if bandwidth <= 0:
        return (sq == 0).astype(np.float64)
    return np.exp(-sq / (2.0 * bandwidth * bandwidth))


def vendi_from_kernel(K: np.ndarray) -> float:
    """exp of the Shannon entropy of the eigenvalues of K / n."""
    K = np.asarray(K, dtype=np.float64)
    if not np.all(np.isfinite(K)):
        raise MetricError("kernel matrix has non-finite entries")
    n = K.shape[0]
    lam = np.linalg.eigvalsh(K / n)
    lam = lam[lam > EIG_FLOOR]
    return float(np.exp(-np.sum(lam * np.log(lam))))


def vendi_score(points: np.ndarray, kernel_bandwidth: float | str = "median") -> float:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) < 2:
        raise MetricError("vendi score needs n >= 2")
    h = median_bandwidth(points) if kernel_bandwidth == "median" else float(kernel_bandwidth)
    return vendi_from_kernel(rbf_kernel(points, h))


# --- Frechet distance ---------------------------------------------------------------------


def _sym_sqrt(M: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    Tr (S_a S_b)^(1/2) is evaluated as Tr (S_a^(1/2) S_b S_a^(1/2))^(1/2), which
    only needs symmetric eigendecompositions.
    """
    if a.dim != b.dim:
        raise MetricError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    ra = _sym_sqrt(a.cov)
    inner = ra @ b.cov @ ra
    w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    tr_sqrt = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    val = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)
    if val < 0:
        if val < -PSD_TOL * max(1.0, np.trace(a.cov) + np.trace(b.cov)):
            raise MetricError(f"negative Frechet distance {val}")
        val = 0.0
    return val


def random_projection(dim_in: int, seed: int, dim_out: int = PROJECTION_DIM) -> Callable[[np.ndarray], np.ndarray]:
    """Fixed Gaussian linear map R^dim_in -> R^dim_out, scaled by 1/sqrt(dim_out)."""
    P = np.random.default_rng(seed).standard_normal((dim_in, dim_out)) / np.sqrt(dim_out)
    return lambda x: np.asarray(x, dtype=np.float64) @ P


def fit_gaussian(points: np.ndarray, embed: Callable[[np.ndarray], np.ndarray] | None = None) -> GaussianStats:
    """Sample mean and unbiased covariance of the (optionally embedded) points."""
    x = np.asarray(points, dtype=np.float64)
    if embed is not None:
        x = embed(x)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n <= d:
        raise MetricError(f"need more samples ({n}) than feature dimensions ({d})")
    return GaussianStats(x.mean(axis=0), np.cov(x, rowvar=False, ddof=1).reshape(d, d))


# --- mode coverage ------------------------------------------------------------------------


def mode_coverage(points: np.ndarray, mixture: GaussianMixtureSpec) -> tuple[int, float]:
    """(modes covered, fraction of samples within 3 sigma of a mode).

    A mode counts as covered when at least ``max(20, n / (10 * modes))``
    high-quality samples are nearest to it.
    """
    means = np.asarray(mixture.means, dtype=np.float64)
    if len(means) == 0:
        raise MetricError("empty mixture")
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    if n == 0:
        return 0, 0.0
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1)
    nearest = d2.argmin(axis=1)
    good = np.sqrt(d2[np.arange(n), nearest]) <= 3.0 * mixture.sigma
    counts = np.bincount(nearest[good], minlength=len(means))
    threshold = max(20.0, n / (10.0 * len(means)))
    return int(np.sum(counts >= threshold)), float(good.mean())
