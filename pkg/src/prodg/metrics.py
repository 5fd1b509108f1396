"""Structural and distributional distances between image regions.

The structural side rests on the singular value spectrum of a region
matrix A (values in [0, 1]).  Truncating the SVD after n terms leaves a
mean squared error that is exactly the normalized tail of the spectrum:

    MSE(A, A_n) = (1 / MN) * sum_{i > n} sigma_i^2

The structural complexity C_eps(A) is the smallest n whose tail MSE
drops below a threshold eps; its smooth variant C'_eps(A) adds the
remaining tail MSE normalized by eps as a fractional part in [0, 1).
Two regions compare structurally as |C'_eps(A) - C'_eps(B)|, which is
blind to how often a motif repeats: a band of 4 evenly spaced windows
and a band of 10 have the same low rank.

A histogram side makes the comparison content-aware: intensity
histograms are compared with the Hellinger distance
sqrt(1 - sum_i sqrt(p(i) q(i))) in [0, 1].  The combined distance is
the weighted sum alpha * D_svd + beta * D_hist.

Separately, the evaluation metric is the sliced Wasserstein distance:
the average, over seeded random unit directions, of the 1-D
2-Wasserstein distance between the projected samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureSet",
    "MetricConfig",
    "MetricError",
    "SvdSpectrum",
    "combined_distance",
    "hellinger_distance",
    "singular_values",
    "sliced_wasserstein",
    "structural_complexity",
    "svd_distance",
]

class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class MetricConfig:
    """Weights and thresholds of the combined region distance."""

    epsilon: float = 1e-3
    alpha: float = 1.0
    beta: float = 1.0
    histogram_bins: int = 256

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise MetricError(f"epsilon must be positive, got {self.epsilon}")
        if self.alpha < 0 or self.beta < 0:
            raise MetricError("alpha and beta must be non-negative")
        if self.alpha + self.beta <= 0:
            raise MetricError("alpha + beta must be positive")
        if not isinstance(self.histogram_bins, int) or self.histogram_bins < 2:
            raise MetricError(f"histogram_bins must be an integer >= 2, got {self.histogram_bins}")

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": self.beta,
            "histogram_bins": self.histogram_bins,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricConfig":
        known = {"epsilon", "alpha", "beta", "histogram_bins"}
        unknown = set(obj) - known
        if unknown:
            raise MetricError(f"unknown metric config keys: {sorted(unknown)}")
        return cls(**obj)


# ---------------------------------------------------------------------------
# singular value spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvdSpectrum:
    """Non-increasing singular values of an M x N matrix."""

    sigmas: np.ndarray
    m: int
    n: int

    def tail_mse(self, rank: int) -> float:
        """(1/MN) sum of squared singular values beyond ``rank``."""
        tail = self.sigmas[rank:]
        return float(np.sum(tail * tail)) / (self.m * self.n)


def singular_values(a: np.ndarray) -> SvdSpectrum:
    """Singular values via the eigenvalues of the smaller Gram matrix.

    Only the spectrum is needed downstream, never the singular vectors,
    so the symmetric eigenproblem of A A^T (or A^T A, whichever is
    smaller) replaces a full SVD.  Eigenvalues within -1e-12 of zero are
    clamped before the square root.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise MetricError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    m, n = a.shape
    gram = a @ a.T if m <= n else a.T @ a
    eigs = np.linalg.eigvalsh(gram)
    eigs = np.clip(eigs, 0.0, None)
    sigmas = np.sqrt(eigs[::-1])
    sigmas.setflags(write=False)
    return SvdSpectrum(sigmas, m, n)


def structural_complexity(a: np.ndarray, epsilon: float) -> float:
    """C'_eps: smallest adequate rank plus the normalized residual MSE.

    The integer part is min{ n : tail MSE after n terms < eps }; the
    fractional part is that tail MSE divided by eps, always in [0, 1).
    """
    if not epsilon > 0:
        raise MetricError(f"epsilon must be positive, got {epsilon}")
    spectrum = singular_values(a)
    sq = spectrum.sigmas**2
    mn = spectrum.m * spectrum.n
    # tails[k] = (1/MN) sum_{i > k} sigma_i^2, k = 0..len(sq)
    tails = np.concatenate([np.cumsum(sq[::-1])[::-1], [0.0]]) / mn
    rank = int(np.argmax(tails < epsilon))  # first index meeting the threshold
    return rank + tails[rank] / epsilon


def svd_distance(a: np.ndarray, b: np.ndarray, epsilon: float) -> float:
    """Structural difference |C'_eps(A) - C'_eps(B)|."""
    return abs(structural_complexity(a, epsilon) - structural_complexity(b, epsilon))


# ---------------------------------------------------------------------------
# histogram distance
# ---------------------------------------------------------------------------

def intensity_histogram(a: np.ndarray, bins: int) -> np.ndarray:
    """Histogram counts of [0, 1] intensities (right edge inclusive)."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise MetricError("cannot histogram an empty matrix")
    counts, _ = np.histogram(a, bins=bins, range=(0.0, 1.0))
    return counts


def hellinger_from_histograms(p: np.ndarray, q: np.ndarray) -> float:
    """sqrt(1 - Bhattacharyya coefficient); accepts counts or probabilities.

    Normalization happens inside the coefficient,
    sum(sqrt(p q)) / sqrt(sum(p) sum(q)), which is scale-invariant and,
    thanks to the IEEE identity sqrt(x * x) == x, exactly 1 whenever the
    two histograms are identical, so the distance of a region to itself
    is exactly zero.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    num = float(np.sum(np.sqrt(p * q)))
    denom = math.sqrt(float(np.sum(p)) * float(np.sum(q)))
    if denom == 0.0:
        raise MetricError("histograms must have positive mass")
    bc = num / denom
    return math.sqrt(max(0.0, 1.0 - min(1.0, bc)))


def hellinger_distance(a: np.ndarray, b: np.ndarray, bins: int = 256) -> float:
    """Hellinger distance between the intensity histograms of two regions."""
    if bins < 2:
        raise MetricError(f"bins must be >= 2, got {bins}")
    return hellinger_from_histograms(intensity_histogram(a, bins), intensity_histogram(b, bins))


def combined_distance(a: np.ndarray, b: np.ndarray, cfg: MetricConfig) -> float:
    """alpha * D_svd + beta * D_hist under one config."""
    total = 0.0
    if cfg.alpha:
        total += cfg.alpha * svd_distance(a, b, cfg.epsilon)
    if cfg.beta:
        total += cfg.beta * hellinger_distance(a, b, cfg.histogram_bins)
    return total


# ---------------------------------------------------------------------------
# sliced Wasserstein distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureSet:
    """A bag of L2-normalized feature vectors, shape (count, dim)."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise MetricError(f"feature set must be a non-empty (count, dim) array, got shape {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise MetricError(f"feature vectors must be unit length (worst deviation {worst:.2e})")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @classmethod
    def from_raw(cls, vectors: np.ndarray) -> "FeatureSet":
        """Normalize raw feature vectors to unit length."""
        v = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise MetricError("cannot normalize zero feature vectors")
        return cls(v / norms)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _quantiles(values: np.ndarray, qs: np.ndarray) -> np.ndarray:
    # empirical quantile function, linearly interpolated between order
    # statistics placed at (i + 0.5)/n; reduces to plain sorting when
    # both samples have the same size
    v = np.sort(values)
    pos = (np.arange(v.size) + 0.5) / v.size
    return np.interp(qs, pos, v)


def wasserstein_1d(x: np.ndarray, y: np.ndarray) -> float:
    """2-Wasserstein distance between two 1-D samples."""
    k = max(x.size, y.size)
    qs = (np.arange(k) + 0.5) / k
    dx = _quantiles(np.asarray(x, dtype=np.float64), qs)
    dy = _quantiles(np.asarray(y, dtype=np.float64), qs)
    return float(np.sqrt(np.mean((dx - dy) ** 2)))


def sliced_wasserstein(
    a: FeatureSet | np.ndarray,
    b: FeatureSet | np.ndarray,
    n_projections: int = 500,
    seed: int = 0,
) -> float:
    """Average 1-D 2-Wasserstein distance over random unit directions.

    Directions are drawn from a seeded PCG64 generator, all at once, so
    the value is reproducible bit-for-bit for a fixed seed.  Unequal
    sample counts are handled by quantile interpolation.
    """
    va = a.vectors if isinstance(a, FeatureSet) else np.asarray(a, dtype=np.float64)
    vb = b.vectors if isinstance(b, FeatureSet) else np.asarray(b, dtype=np.float64)
    if va.ndim != 2 or vb.ndim != 2 or va.shape[0] < 1 or vb.shape[0] < 1:
        raise MetricError("feature sets must be non-empty (count, dim) arrays")
    if va.shape[1] != vb.shape[1]:
        raise MetricError(f"dimension mismatch: {va.shape[1]} vs {vb.shape[1]}")
    if n_projections < 1:
        raise MetricError(f"n_projections must be >= 1, got {n_projections}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_projections, va.shape[1]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    proj_a = va @ directions.T  # (count_a, n_projections)
    proj_b = vb @ directions.T
    values = np.empty(n_projections, dtype=np.float64)
    for i in range(n_projections):
        values[i] = wasserstein_1d(proj_a[:, i], proj_b[:, i])
    return float(np.mean(values))
