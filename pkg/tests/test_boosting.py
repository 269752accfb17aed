import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascrop.boosting import PrimitiveRegressor, boost_fit, boost_predict
from cascrop.ferns import Fern, fern_predict

from oracles import replay_boosting


def test_zero_targets_give_empty_regressor():
    X = np.random.default_rng(0).random((20, 5))
    reg, trace = boost_fit(X, np.zeros(20), M=5, S=2, Q=8, beta=1.0, seed=0)
    assert reg.ferns == ()
    assert trace.initial_sse == 0.0 and trace.sse == []
    assert trace.gamma == 0.0
    assert boost_predict(reg, X[0]) == 0.0


def test_constant_targets_single_bin():
    # every feature equals its range minimum, so every threshold sits at the
    # value and all samples land in the all-ones bin
    X = np.full((6, 4), 0.3)
    reg, trace = boost_fit(X, np.full(6, 2.5), M=3, S=2, Q=4, beta=0.0, seed=1)
    assert len(reg.ferns) == 1
    assert np.allclose(reg.predict_many(X), 2.5)
    assert trace.sse == [0.0]
    assert trace.gamma == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_matches_replay_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(5, 33))
    M = int(rng.integers(1, 5))
    S = int(rng.integers(1, 3))
    X = rng.random((n, 7))
    y = X[:, 0] - 2 * X[:, 3] + 0.1 * rng.normal(size=n)
    beta = [0.0, 1.0][seed % 2]
    reg, trace = boost_fit(X, y, M=M, S=S, Q=6, beta=beta, seed=seed)
    ferns, sse = replay_boosting(X, y, M, S, 6, beta, seed)
    assert len(reg.ferns) == len(ferns)
    for f, (idx, thr, vals) in zip(reg.ferns, ferns):
        assert f.feature_indices.tolist() == idx
        assert f.thresholds.tolist() == thr
        assert np.allclose(f.bin_values, vals, rtol=1e-12, atol=1e-14)
    assert np.allclose(trace.sse, sse, rtol=1e-12, atol=1e-14)


def test_predict_examples():
    x = np.random.default_rng(0).random(6)
    assert boost_predict(PrimitiveRegressor(), x) == 0.0
    f = Fern([1, 4], [0.3, 0.6], [1.0, -2.0, 0.5, 4.0])
    assert boost_predict(PrimitiveRegressor((f,)), x) == fern_predict(f, x)


def test_predict_is_sum_of_ferns():
    rng = np.random.default_rng(5)
    ferns = tuple(Fern(rng.choice(10, 2, replace=False), rng.random(2), rng.normal(size=4)) for _ in range(5))
    reg = PrimitiveRegressor(ferns, 5)
    for x in rng.random((20, 10)):
        assert abs(boost_predict(reg, x) - sum(fern_predict(f, x) for f in ferns)) < 1e-12
    X = rng.random((20, 10))
    assert np.allclose(reg.predict_many(X), [reg.predict(x) for x in X], atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sse_strictly_decreases_and_gamma_below_one(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 150))
    X = rng.normal(size=(n, 30))
    y = np.tanh(X[:, 2]) + 0.5 * X[:, 7] + rng.normal(scale=0.3, size=n) + rng.normal()
    reg, trace = boost_fit(X, y, M=20, S=4, Q=32, beta=1.0, seed=seed)
    seq = [trace.initial_sse] + trace.sse
    assert all(b < a for a, b in zip(seq, seq[1:]))
    assert len(reg.ferns) >= 1
    assert 0.0 <= trace.gamma < 1.0


def test_deterministic():
    rng = np.random.default_rng(9)
    X, y = rng.random((40, 12)), rng.normal(size=40)
    a, ta = boost_fit(X, y, M=6, S=3, Q=10, seed=4)
    b, tb = boost_fit(X, y, M=6, S=3, Q=10, seed=4)
    assert a.to_dict() == b.to_dict() and ta == tb


def test_scaling_targets_scales_predictions():
    # S=1 over a single informative feature: every candidate splits the same two groups
    X = np.array([[0.0]] * 5 + [[1.0]] * 5)
    y = np.array([1.0] * 5 + [3.0] * 5)
    a, _ = boost_fit(X, y, M=1, S=1, Q=3, beta=0.0, seed=0)
    b, _ = boost_fit(X, -2.5 * y, M=1, S=1, Q=3, beta=0.0, seed=0)
    assert np.allclose(b.predict_many(X), -2.5 * a.predict_many(X))


def test_m_one_is_first_fern_of_longer_run():
    rng = np.random.default_rng(3)
    X, y = rng.random((50, 20)), rng.normal(size=50)
    one, _ = boost_fit(X, y, M=1, S=4, Q=16, seed=8)
    many, _ = boost_fit(X, y, M=20, S=4, Q=16, seed=8)
    assert one.ferns[0].to_dict() == many.ferns[0].to_dict()


def test_input_errors():
    with pytest.raises(ValueError):
        boost_fit(np.zeros((0, 3)), [], M=2)
    with pytest.raises(ValueError):
        boost_fit(np.zeros((3, 3)), [1, 2, 3], M=0)
    with pytest.raises(ValueError):
        boost_fit(np.zeros((3, 3)), [1, 2], M=2)


def test_serialization_round_trip():
    rng = np.random.default_rng(1)
    reg, _ = boost_fit(rng.random((30, 8)), rng.normal(size=30), M=4, S=2, Q=5, seed=2)
    back = PrimitiveRegressor.from_dict(reg.to_dict())
    X = rng.random((10, 8))
    assert np.array_equal(back.predict_many(X), reg.predict_many(X))
