"""Slow, loop-based reference implementations used as test oracles."""

import math

import numpy as np


def naive_conv(x, kernels, biases):
    """Quadruple-loop same-size convolution with zero padding 2."""
    c_in, h, w = x.shape
    k_out = kernels.shape[0]
    out = np.zeros((k_out, h, w))
    for k in range(k_out):
        for y in range(h):
            for xx in range(w):
                acc = biases[k]
                for c in range(c_in):
                    for dy in range(5):
                        for dx in range(5):
                            yy, xs = y + dy - 2, xx + dx - 2
                            if 0 <= yy < h and 0 <= xs < w:
                                acc += kernels[k, c, dy, dx] * x[c, yy, xs]
                out[k, y, xx] = acc
    return out


def naive_maxpool(x):
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for k in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                out[k, i, j] = max(x[k, 2 * i + a, 2 * j + b] for a in range(2) for b in range(2))
    return out


def naive_spp(x, levels=(2, 3, 4)):
    c, h, w = x.shape
    vals = []
    for n in levels:
        for k in range(c):
            for i in range(n):
                for j in range(n):
                    r0, r1 = math.floor(i * h / n), math.floor((i + 1) * h / n)
                    c0, c1 = math.floor(j * w / n), math.floor((j + 1) * w / n)
                    vals.append(max(x[k, r, s] for r in range(r0, r1) for s in range(c0, c1)))
    return np.array(vals)


def fern_bin(indices, thresholds, x):
    idx = 0
    for k, (d, t) in enumerate(zip(indices, thresholds)):
        if x[d] >= t:
            idx += 2**k
    return idx


def replay_boosting(X, y, M, S, Q, beta, seed):
    """Gradient boosting re-derived with plain loops.

    Draws candidates from the same generator protocol as the library (per
    candidate: ``choice(F, S, replace=False)`` then ``random(S)``), but fits
    bins, scores candidates and updates residuals independently.
    Returns (list of (indices, thresholds, bin_values), sse trace).
    """
    X = np.asarray(X, dtype=float)
    y = [float(v) for v in y]
    n, f = X.shape
    lo = [min(X[i, d] for i in range(n)) for d in range(f)]
    hi = [max(X[i, d] for i in range(n)) for d in range(f)]
    rng = np.random.default_rng(seed)
    g = [0.0] * n
    sse = sum((y[i] - g[i]) ** 2 for i in range(n))
    ferns, trace = [], []
    for _ in range(M):
        e = [y[i] - g[i] for i in range(n)]
        best = None
        for _q in range(Q):
            idx = rng.choice(f, size=S, replace=False)
            r = rng.random(S)
            thr = np.array([lo[d] + r[k] * (hi[d] - lo[d]) for k, d in enumerate(idx)])
            bins = [fern_bin(idx, thr, X[i]) for i in range(n)]
            sums = [0.0] * 2**S
            counts = [0] * 2**S
            for i in range(n):
                sums[bins[i]] += e[i]
                counts[bins[i]] += 1
            vals = [sums[b] / (counts[b] + beta) if counts[b] + beta > 0 else 0.0 for b in range(2**S)]
            cand = sum((e[i] - vals[bins[i]]) ** 2 for i in range(n))
            if best is None or cand < best[0]:
                best = (cand, idx, thr, vals, bins)
        _, idx, thr, vals, bins = best
        g_next = [g[i] + vals[bins[i]] for i in range(n)]
        sse_next = sum((y[i] - g_next[i]) ** 2 for i in range(n))
        if not sse_next < sse:
            break
        g, sse = g_next, sse_next
        ferns.append((list(idx), list(thr), vals))
        trace.append(sse)
    return ferns, trace
