"""
Boosting random ferns
=====================

One primitive regressor is a sum of ferns fitted greedily to residuals.
Here it is trained on a toy problem so the SSE trace and the relative
error gamma can be read directly.
"""

import numpy as np

from cascrop.boosting import boost_fit
from cascrop.ferns import Fern, fern_predict

# %%
# A fern compares S features with S thresholds.  The comparison bits form a
# bin index and the fern returns the value stored in that bin.

fern = Fern(feature_indices=[0, 2], thresholds=[0.5, 0.1], bin_values=[0.0, 1.0, -1.0, 3.0])
x = np.array([0.9, 0.0, 0.4])
print("bits: x[0] >= 0.5 ->", x[0] >= 0.5, "; x[2] >= 0.1 ->", x[2] >= 0.1)
print("prediction:", fern_predict(fern, x))  # bin 0b11 = 3

# %%
# Boost 20 ferns of depth 4 on a noisy nonlinear target.

rng = np.random.default_rng(0)
X = rng.normal(size=(400, 50))
y = np.tanh(2 * X[:, 3]) - 0.5 * X[:, 10] * (X[:, 11] > 0) + 0.1 * rng.normal(size=400)
reg, trace = boost_fit(X[:300], y[:300], M=20, S=4, Q=64, beta=1.0, seed=1)

print("ferns accepted:", trace.n_accepted)
print("SSE: initial %.2f, after each fern:" % trace.initial_sse)
print(np.round(trace.sse, 2))
print(f"gamma = {trace.gamma:.3f}  (below 1 means better than predicting a constant)")

# %%
# Held-out error.  The bin shrinkage beta matters here: it pulls sparsely
# populated bins toward zero and trades training fit for stability.

for beta in (0.0, 1.0, 20.0, 100.0):
    reg, trace = boost_fit(X[:300], y[:300], M=20, S=4, Q=64, beta=beta, seed=1)
    test_mse = np.mean((y[300:] - reg.predict_many(X[300:])) ** 2)
    print(f"beta={beta:6.1f}  train gamma {trace.gamma:.3f}  test MSE {test_mse:.4f}")
