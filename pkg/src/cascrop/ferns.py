"""Random-fern regressors.

A fern of depth S compares S feature values against S thresholds; the
resulting bits form an index into ``2**S`` stored outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Fern:
    feature_indices: np.ndarray  # (S,) int
    thresholds: np.ndarray  # (S,) float
    bin_values: np.ndarray  # (2**S,) float

    def __post_init__(self):
        idx = np.asarray(self.feature_indices, dtype=np.int64).reshape(-1)
        thr = np.asarray(self.thresholds, dtype=np.float64).reshape(-1)
        vals = np.asarray(self.bin_values, dtype=np.float64).reshape(-1)
        if idx.shape != thr.shape:
            raise ValueError("feature_indices and thresholds must have equal length")
        if vals.shape != (2 ** len(idx),):
            raise ValueError(f"expected {2 ** len(idx)} bin values, got {vals.size}")
        if np.any(idx < 0) or not (np.all(np.isfinite(thr)) and np.all(np.isfinite(vals))):
            raise ValueError("invalid fern parameters")
        for a in (idx, thr, vals):
            a.setflags(write=False)
        object.__setattr__(self, "feature_indices", idx)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "bin_values", vals)

    @property
    def depth(self) -> int:
        return len(self.feature_indices)

    def to_dict(self) -> dict:
        return {
            "indices": self.feature_indices.tolist(),
            "thresholds": self.thresholds.tolist(),
            "bins": self.bin_values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Fern":
        return cls(d["indices"], d["thresholds"], d["bins"])


@dataclass(frozen=True)
class FernPool:
    """How many candidate fern shapes to draw per boosting iteration, and from where."""

    size: int = 64
    seed: int = 0
    n_features: int = 928

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("fern pool size must be >= 1")


def bin_index(fern: Fern, x: np.ndarray) -> int:
    bits = np.asarray(x)[fern.feature_indices] >= fern.thresholds
    return int(np.dot(bits, 1 << np.arange(fern.depth)))


def bin_indices(indices: np.ndarray, thresholds: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Bin index of every row of ``X`` for one or many fern shapes.

    ``indices``/``thresholds`` of shape ``(S,)`` give an ``(N,)`` result;
    shape ``(Q, S)`` gives ``(N, Q)``.
    """
    X = np.asarray(X)
    indices = np.asarray(indices)
    weights = 1 << np.arange(indices.shape[-1])
    bits = X[:, indices] >= thresholds
    return bits @ weights


def fern_predict(fern: Fern, x: np.ndarray) -> float:
    return float(fern.bin_values[bin_index(fern, x)])


def fern_predict_many(fern: Fern, X: np.ndarray) -> np.ndarray:
    return fern.bin_values[bin_indices(fern.feature_indices, fern.thresholds, X)]


def bin_stats(bins: np.ndarray, residuals: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    sums = np.bincount(bins, weights=residuals, minlength=n_bins)
    counts = np.bincount(bins, minlength=n_bins).astype(np.float64)
    return sums, counts


def fit_bins(indices, thresholds, residuals, features, beta: float = 1.0) -> Fern:
    """Set each bin to the shrunk mean ``sum(e) / (count + beta)`` of its residuals."""
    residuals = np.asarray(residuals, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if len(residuals) == 0:
        raise ValueError("fit_bins needs at least one sample")
    if len(residuals) != len(features):
        raise ValueError("residuals and features differ in length")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    indices = np.asarray(indices, dtype=np.int64)
    n_bins = 2 ** len(indices)
    sums, counts = bin_stats(bin_indices(indices, thresholds, features), residuals, n_bins)
    denom = counts + beta
    values = np.divide(sums, denom, out=np.zeros(n_bins), where=denom > 0)
    return Fern(indices, thresholds, values)


def sample_pool(pool: FernPool, depth: int, feature_ranges: np.ndarray, rng=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Draw ``pool.size`` fern shapes (feature indices, thresholds).

    Each shape uses ``depth`` distinct feature dimensions; each threshold is
    uniform over the observed ``(min, max)`` range of its dimension.  Pass
    ``rng`` to continue an existing stream instead of seeding from the pool.
    """
    ranges = np.asarray(feature_ranges, dtype=np.float64)
    n_features = len(ranges)
    if depth > n_features:
        raise ValueError(f"fern depth {depth} exceeds feature dimension {n_features}")
    if np.any(ranges[:, 0] > ranges[:, 1]):
        raise ValueError("feature range with min > max")
    if rng is None:
        rng = np.random.default_rng(pool.seed)
    shapes = []
    for _ in range(pool.size):
        idx = rng.choice(n_features, size=depth, replace=False)
        lo, hi = ranges[idx, 0], ranges[idx, 1]
        thr = lo + rng.random(depth) * (hi - lo)
        shapes.append((idx.astype(np.int64), thr))
    return shapes


def feature_ranges(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.stack([X.min(axis=0), X.max(axis=0)], axis=1)
