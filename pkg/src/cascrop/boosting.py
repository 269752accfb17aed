"""Least-squares gradient boosting over random ferns.

Starting from ``g = 0``, every iteration draws a pool of candidate fern
shapes, fits each candidate's bins to the current residuals, and keeps the
candidate with the smallest squared error (step size one).  The ensemble of
kept ferns is one primitive regressor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ferns import Fern, FernPool, feature_ranges, fern_predict, fern_predict_many, sample_pool


@dataclass(frozen=True)
class PrimitiveRegressor:
    ferns: tuple[Fern, ...] = ()
    max_ferns: int = 20

    def predict(self, x: np.ndarray) -> float:
        return float(sum(fern_predict(f, x) for f in self.ferns))

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        for f in self.ferns:
            out += fern_predict_many(f, X)
        return out

    def to_dict(self) -> dict:
        return {"max_ferns": self.max_ferns, "ferns": [f.to_dict() for f in self.ferns]}

    @classmethod
    def from_dict(cls, d: dict) -> "PrimitiveRegressor":
        return cls(tuple(Fern.from_dict(f) for f in d["ferns"]), int(d["max_ferns"]))


@dataclass
class BoostingTrace:
    initial_sse: float = 0.0
    sse: list[float] = field(default_factory=list)  # after each accepted fern
    selected: list[int] = field(default_factory=list)  # winning candidate per iteration
    gamma: float = 0.0

    @property
    def n_accepted(self) -> int:
        return len(self.sse)


def _score_candidates(shapes, X, residuals, beta):
    """Fitted bin tables and residual SSE for every candidate shape."""
    idx = np.stack([s[0] for s in shapes])  # (Q, S)
    thr = np.stack([s[1] for s in shapes])
    q, depth = idx.shape
    n_bins = 2**depth
    bins = (X[:, idx] >= thr) @ (1 << np.arange(depth))  # (N, Q)
    flat = bins + np.arange(q) * n_bins
    sums = np.bincount(flat.ravel(), weights=np.repeat(residuals, q), minlength=q * n_bins).reshape(q, n_bins)
    counts = np.bincount(flat.ravel(), minlength=q * n_bins).reshape(q, n_bins).astype(np.float64)
    denom = counts + beta
    values = np.divide(sums, denom, out=np.zeros_like(sums), where=denom > 0)
    pred = np.take_along_axis(values, bins.T, axis=1)  # (Q, N)
    err = residuals[None, :] - pred
    sse = np.einsum("qn,qn->q", err, err)
    return values, sse


def boost_fit(features, targets, M: int = 20, S: int = 4, Q: int = 64, beta: float = 1.0, seed: int = 0):
    """Fit a primitive regressor of at most ``M`` ferns.

    Returns ``(PrimitiveRegressor, BoostingTrace)``.  Stops early when the
    best candidate of an iteration does not strictly lower the training SSE.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("boost_fit needs at least one sample")
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"features {X.shape} do not match {len(y)} targets")
    if M < 1:
        raise ValueError("M must be >= 1")

    rng = np.random.default_rng(seed)
    pool = FernPool(Q, seed, X.shape[1])
    ranges = feature_ranges(X)
    g = np.zeros(len(y))
    residuals = y.copy()
    sse = float(residuals @ residuals)
    trace = BoostingTrace(initial_sse=sse)
    ferns = []
    for _ in range(M):
        shapes = sample_pool(pool, S, ranges, rng)
        values, cand_sse = _score_candidates(shapes, X, residuals, beta)
        best = int(np.argmin(cand_sse))
        fern = Fern(shapes[best][0], shapes[best][1], values[best])
        g_next = g + fern_predict_many(fern, X)
        r_next = y - g_next
        sse_next = float(r_next @ r_next)
        if not sse_next < sse:
            break
        ferns.append(fern)
        g, residuals, sse = g_next, r_next, sse_next
        trace.sse.append(sse)
        trace.selected.append(best)

    centered = y - y.mean()
    baseline = float(centered @ centered)
    trace.gamma = sse / baseline if baseline > 0 else 0.0
    return PrimitiveRegressor(tuple(ferns), M), trace


def boost_predict(p: PrimitiveRegressor, x: np.ndarray) -> float:
    return p.predict(x)
