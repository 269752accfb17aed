import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cascrop import cnn
from cascrop.cnn import (
    FEATURE_DIM,
    ConvLayer,
    classify,
    config_from_dict,
    config_to_dict,
    conv2d_same,
    extract_features,
    forward_maps,
    load_weights,
    maxpool2,
    relu,
    save_weights,
    seeded_config,
    softmax,
    spp,
)
from cascrop.geometry import CropRegion
from cascrop.imaging import Image

from oracles import naive_conv, naive_maxpool, naive_spp


def random_layer(c_in, seed):
    rng = np.random.default_rng(seed)
    return ConvLayer(rng.normal(size=(32, c_in, 5, 5)), rng.normal(size=32))


def test_delta_kernel_is_identity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 9, 11))
    k = np.zeros((32, 3, 5, 5))
    k[7, 1, 2, 2] = 1.0
    out = conv2d_same(x, ConvLayer(k, np.zeros(32)))
    assert out.shape == (32, 9, 11)
    assert np.array_equal(out[7], x[1])


def test_zero_input_gives_bias_maps():
    layer = random_layer(3, 1)
    out = conv2d_same(np.zeros((3, 6, 5)), layer)
    assert np.allclose(out, layer.biases[:, None, None])


def test_conv_matches_naive_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 7, 7))
    layer = random_layer(3, 3)
    assert np.allclose(conv2d_same(x, layer), naive_conv(x, layer.kernels, layer.biases), atol=1e-6)


def test_conv_channel_mismatch():
    with pytest.raises(ValueError, match="channels"):
        conv2d_same(np.zeros((4, 8, 8)), random_layer(3, 0))


def test_relu_definition():
    assert relu(np.array([-1.0, 0.0, 2.5])).tolist() == [0.0, 0.0, 2.5]
    x = np.abs(np.random.default_rng(0).normal(size=(2, 3, 3)))
    assert np.array_equal(relu(x), x)
    assert not relu(-x - 1).any()


def test_maxpool_examples():
    assert maxpool2(np.array([[[1.0, 2.0], [3.0, 4.0]]])).tolist() == [[[4.0]]]
    assert np.array_equal(maxpool2(np.full((2, 6, 8), 3.0)), np.full((2, 3, 4), 3.0))
    x = np.random.default_rng(1).normal(size=(1, 5, 5))
    out = maxpool2(x)
    assert out.shape == (1, 2, 2)
    assert np.array_equal(out, naive_maxpool(x))


def test_maxpool_rejects_tiny():
    with pytest.raises(ValueError):
        maxpool2(np.zeros((1, 1, 4)))


def test_spp_dimension_and_constant():
    out = spp(np.full((32, 5, 7), 2.5))
    assert out.shape == (FEATURE_DIM,) == (928,)
    assert np.all(out == 2.5)


def test_spp_small_oracle():
    x = np.arange(1, 17, dtype=float).reshape(1, 4, 4)
    out = spp(x)
    assert out.shape == (29,)
    assert np.array_equal(out, naive_spp(x))
    # 2x2 level of the 1..16 grid
    assert out[:4].tolist() == [6.0, 8.0, 14.0, 16.0]


@settings(max_examples=25, deadline=None)
@given(st.integers(4, 23), st.integers(4, 23), st.integers(1, 3), st.integers(0, 2**16))
def test_spp_matches_oracle(h, w, c, seed):
    x = np.random.default_rng(seed).normal(size=(c, h, w))
    assert np.array_equal(spp(x), naive_spp(x))


def test_spp_rejects_small():
    with pytest.raises(ValueError):
        spp(np.zeros((32, 3, 10)))


def test_pool_chain_shrinks_by_floor_half():
    cfg = seeded_config(0)
    x = np.random.default_rng(0).random((37, 91, 3))
    maps = np.transpose(x, (2, 0, 1))
    h, w = 37, 91
    for i, layer in enumerate(cfg.layers[:4]):
        maps = maxpool2(relu(conv2d_same(maps, layer)))
        h, w = h // 2, w // 2
        assert maps.shape == (32, h, w)


def test_forward_maps_shape():
    cfg = seeded_config(0)
    out = forward_maps(np.random.default_rng(0).random((70, 64, 3)), cfg)
    assert out.shape == (32, 4, 4)
    assert np.all(out >= 0)


def structured_image(h=96, w=128):
    yy, xx = np.mgrid[0:h, 0:w]
    px = np.stack([(xx % 16) / 15.0, (yy % 8) / 7.0, ((xx + yy) % 32) / 31.0], axis=-1)
    px[h // 4 : h // 2, w // 2 :] = 1.0
    return Image(px)


def test_extract_is_deterministic():
    cfg = seeded_config(5, cap=128)
    img = structured_image()
    c = CropRegion(0.1, 0.05, 0.8, 0.6)
    a = extract_features(img, c, cfg)
    b = extract_features(img, c, cfg)
    assert a.shape == (928,)
    assert a.tobytes() == b.tobytes()


def test_extract_constant_image_equal_shape_crops():
    cfg = seeded_config(1, cap=128)
    img = Image(np.full((120, 160, 3), 0.4))
    a = extract_features(img, CropRegion(0.0, 0.0, 0.5, 0.5), cfg)
    b = extract_features(img, CropRegion(0.3, 0.2, 0.8, 0.7), cfg)
    assert np.array_equal(a, b)
    direct = spp(forward_maps(np.full((80, 80, 3), 0.4), cfg))
    assert np.array_equal(a, direct)


def test_extract_is_crop_indexed():
    cfg = seeded_config(2, cap=128)
    img = structured_image()
    full = extract_features(img, CropRegion(0, 0, 1, 0.75), cfg)
    quarter = extract_features(img, CropRegion(0.5, 0.0, 1.0, 0.375), cfg)
    assert not np.allclose(full, quarter)


def test_extract_pads_small_crops():
    cfg = seeded_config(0, cap=128)
    img = structured_image(40, 30)
    with pytest.warns(cnn.SmallCropWarning):
        f = extract_features(img, CropRegion(0, 0, 0.75, 1.0), cfg)
    assert f.shape == (928,) and np.all(np.isfinite(f))


def test_extract_respects_cap():
    cfg = seeded_config(0, cap=128)
    img = structured_image(256, 512)
    direct = spp(forward_maps(img.pixels.reshape(64, 4, 128, 4, 3).mean(axis=(1, 3)), cfg))
    assert np.allclose(extract_features(img, CropRegion(0, 0, 1, 0.5), cfg), direct, atol=1e-12)


def test_classify_examples():
    cfg = seeded_config(0, classifier=True)
    zero = cnn.ExtractorConfig(cfg.layers, cap=cfg.cap, classifier_weights=np.zeros((928, 2)),
                               classifier_biases=np.zeros(2))
    label, p = classify(np.ones(928), zero)
    assert p.tolist() == [0.5, 0.5]
    assert label == "low"
    assert softmax([3.7, 3.7]).tolist() == [0.5, 0.5]
    e = math.e
    assert np.allclose(softmax([1.0, 0.0]), [e / (e + 1), 1 / (e + 1)], atol=1e-12)
    assert softmax([1.0, 0.0])[0] == pytest.approx(0.7311, abs=1e-4)
    _, p = classify(np.random.default_rng(0).random(928), cfg)
    assert abs(p.sum() - 1.0) < 1e-9


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-100, 100))
def test_softmax_shift_invariant(a, b, shift):
    assert np.allclose(softmax([a, b]), softmax([a + shift, b + shift]), atol=1e-12)


def test_classify_without_head():
    with pytest.raises(ValueError, match="classifier"):
        classify(np.zeros(928), seeded_config(0))


def test_seeded_config_scale():
    cfg = seeded_config(9)
    assert cfg.weight_seed == 9
    assert np.abs(cfg.layers[0].kernels).max() <= 1 / math.sqrt(75)
    assert np.abs(cfg.layers[1].kernels).max() <= 1 / math.sqrt(800)
    assert np.array_equal(seeded_config(9).layers[3].kernels, cfg.layers[3].kernels)


def test_weight_file_round_trip(tmp_path):
    cfg = seeded_config(4, cap=96, classifier=True)
    save_weights(cfg, tmp_path / "w.json")
    back = load_weights(tmp_path / "w.json")
    assert back.weight_seed is None and back.cap == 96
    for a, b in zip(cfg.layers, back.layers):
        assert np.array_equal(a.kernels.astype(np.float32), b.kernels)
    img = structured_image()
    f1 = extract_features(img, CropRegion(0, 0, 1, 0.75), back)
    f2 = extract_features(img, CropRegion(0, 0, 1, 0.75), load_weights(tmp_path / "w.json"))
    assert np.array_equal(f1, f2)
    assert classify(f1, back)[1].sum() == pytest.approx(1.0)


def test_weight_doc_by_seed():
    cfg = seeded_config(11, cap=128)
    doc = config_to_dict(cfg)
    assert doc["weight_seed"] == 11 and "layers" not in doc
    back = config_from_dict(doc)
    assert np.array_equal(back.layers[4].kernels, cfg.layers[4].kernels)


def test_config_validation():
    cfg = seeded_config(0)
    with pytest.raises(ValueError):
        cnn.ExtractorConfig(cfg.layers[:4])
    with pytest.raises(ValueError):
        cnn.ExtractorConfig(cfg.layers, cap=16)
    with pytest.raises(ValueError):
        ConvLayer(np.zeros((16, 3, 5, 5)), np.zeros(16))
