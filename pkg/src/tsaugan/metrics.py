"""Generation-quality metrics: DTW, nearest-neighbor set dissimilarity, Wasserstein.

The headline metric compares two sequence sets by drawing equal-size
subsamples, computing each subsampled sequence's nearest-neighbor DTW
distance into the other set, and averaging the absolute gap between those
cross-set distances and within-set reference distances.  A pooled
one-dimensional Wasserstein distance complements it with a purely
distributional view that ignores temporal ordering.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .data_pipeline import SequenceSet
from .errors import EmptySequence, EmptySet, SingletonReference, SubsampleTooLarge

WASSERSTEIN_QUANTILES = 1000


@dataclass(frozen=True)
class DedimsConfig:
    """Subsample size, seed, and per-pair base distance for set dissimilarity."""

    n: int
    seed: int = 0
    base_metric: str = "dtw"

    def __post_init__(self):
        if self.n < 2:
            raise SingletonReference("subsample size must be >= 2")
        if self.base_metric not in ("dtw", "euclidean"):
            raise ValueError(f"base_metric must be 'dtw' or 'euclidean', got {self.base_metric!r}")


@dataclass(frozen=True)
class MetricReport:
    """One monitoring snapshot: distributional plus temporal dissimilarity."""

    wasserstein: float
    dtw_dedims: float
    n_used: int
    seed: int
    base_metric: str = "dtw"

    def to_dict(self) -> dict:
        return {
            "wasserstein": self.wasserstein,
            "dtw_dedims": self.dtw_dedims,
            "n_used": self.n_used,
            "seed": self.seed,
            "base_metric": self.base_metric,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")


@njit(cache=True)
def _dtw_pair(x, y):
    """Cumulative alignment cost D[M, N] with squared pointwise cost.

    Two-row dynamic program; first row and column accumulate along their
    only predecessor.
    """
    m = x.shape[0]
    n = y.shape[0]
    prev = np.empty(n)
    curr = np.empty(n)
    d = x[0] - y[0]
    prev[0] = d * d
    for j in range(1, n):
        d = x[0] - y[j]
        prev[j] = prev[j - 1] + d * d
    for i in range(1, m):
        d = x[i] - y[0]
        curr[0] = prev[0] + d * d
        for j in range(1, n):
            best = prev[j]
            if prev[j - 1] < best:
                best = prev[j - 1]
            if curr[j - 1] < best:
                best = curr[j - 1]
            d = x[i] - y[j]
            curr[j] = best + d * d
        prev, curr = curr, prev
    return prev[n - 1]


@njit(cache=True)
def _dtw_cross_matrix(a, b):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _dtw_pair(a[i], b[j])
    return out


def dtw_distance(x, y) -> float:
    """Dynamic time warping distance between two 1-d sequences.

    Uses the full unconstrained recursion over monotone warping paths with
    cost (x_i - y_j)^2; returns the terminal cumulative cost.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("dtw_distance expects 1-d sequences")
    if x.size == 0 or y.size == 0:
        raise EmptySequence("dtw_distance requires non-empty sequences")
    return float(_dtw_pair(x, y))


def _euclidean_cross_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _pair_matrix(a: np.ndarray, b: np.ndarray, base_metric: str) -> np.ndarray:
    if base_metric == "dtw":
        return _dtw_cross_matrix(a, b)
    return _euclidean_cross_matrix(a, b)


def dedims(set_a: SequenceSet, set_b: SequenceSet, cfg: DedimsConfig) -> float:
    """Nearest-neighbor dissimilarity between two sequence sets.

    1. Draw size-n subsamples from each set (same seed, independent draws).
    2. For each subsampled a_i, find its nearest neighbor distance d_i into
       the b subsample.
    3. Build the reference list d'_i = nearest-neighbor distance of a_i
       within the a subsample itself, excluding the self-match.
    4. Return mean |d_i - d'_i|.
    """
    if len(set_a) == 0 or len(set_b) == 0:
        raise EmptySet("dedims requires non-empty sets")
    if cfg.n > min(len(set_a), len(set_b)):
        raise SubsampleTooLarge(
            f"subsample n={cfg.n} exceeds set sizes ({len(set_a)}, {len(set_b)})"
        )
    idx_a = np.random.default_rng(cfg.seed).choice(len(set_a), size=cfg.n, replace=False)
    idx_b = np.random.default_rng(cfg.seed).choice(len(set_b), size=cfg.n, replace=False)
    sub_a = set_a.values_matrix()[idx_a]
    sub_b = set_b.values_matrix()[idx_b]

    cross = _pair_matrix(sub_a, sub_b, cfg.base_metric)
    d = cross.min(axis=1)

    within = _pair_matrix(sub_a, sub_a, cfg.base_metric)
    np.fill_diagonal(within, np.inf)
    d_ref = within.min(axis=1)

    return float(np.mean(np.abs(d - d_ref)))


def dtw_dedims(set_a: SequenceSet, set_b: SequenceSet, cfg: DedimsConfig) -> float:
    """Set dissimilarity with DTW as the per-pair distance."""
    if cfg.base_metric != "dtw":
        cfg = DedimsConfig(cfg.n, cfg.seed, "dtw")
    return dedims(set_a, set_b, cfg)


def _pooled_quantiles(values: np.ndarray, qs: np.ndarray) -> np.ndarray:
    """Inverse empirical CDF at quantile levels qs (left-continuous inverse)."""
    ordered = np.sort(values)
    idx = np.ceil(qs * ordered.size).astype(np.int64) - 1
    np.clip(idx, 0, ordered.size - 1, out=idx)
    return ordered[idx]


def wasserstein_1d(set_a: SequenceSet, set_b: SequenceSet) -> float:
    """Order-1 Wasserstein distance between pooled value distributions.

    All scalar values from all sequences of each set are pooled into one
    empirical distribution per set; the distance is the mean absolute gap
    between matched quantiles on a fixed 1000-point grid.
    """
    if len(set_a) == 0 or len(set_b) == 0:
        raise EmptySet("wasserstein_1d requires non-empty sets")
    qs = (np.arange(WASSERSTEIN_QUANTILES) + 0.5) / WASSERSTEIN_QUANTILES
    qa = _pooled_quantiles(set_a.values_matrix().ravel(), qs)
    qb = _pooled_quantiles(set_b.values_matrix().ravel(), qs)
    return float(np.mean(np.abs(qa - qb)))


def default_subsample_size(set_a: SequenceSet, set_b: SequenceSet, cap: int = 64) -> int:
    """Default n: capped at 64 to keep the O(n^2) DTW sweep sub-second."""
    return min(cap, len(set_a), len(set_b))


def compare_sets(
    set_a: SequenceSet,
    set_b: SequenceSet,
    n: int | None = None,
    seed: int = 0,
) -> MetricReport:
    """Compute the full monitoring report between two sets."""
    n_used = default_subsample_size(set_a, set_b) if n is None else n
    cfg = DedimsConfig(n=n_used, seed=seed, base_metric="dtw")
    return MetricReport(
        wasserstein=wasserstein_1d(set_a, set_b),
        dtw_dedims=dtw_dedims(set_a, set_b, cfg),
        n_used=n_used,
        seed=seed,
    )
