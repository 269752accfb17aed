"""Forward-only convolutional feature extractor.

Five 5x5 convolution layers with 32 output maps each, ReLU after every
convolution, 2x2 max pooling after the first four, and a spatial pyramid
pooling head over 2x2, 3x3 and 4x4 grids.  With 32 channels the pooled
vector has (4 + 9 + 16) * 32 = 928 entries.

Feature maps are plain ``(channels, height, width)`` float64 arrays.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import CropRegion
from .imaging import DEFAULT_CAP, Image, crop_extract, downscale_cap

N_KERNELS = 32
KERNEL_SIZE = 5
N_LAYERS = 5
N_POOLS = 4
SPP_LEVELS = (2, 3, 4)
FEATURE_DIM = sum(n * n for n in SPP_LEVELS) * N_KERNELS
# smallest side that still leaves 4x4 maps after four 2x2 pools
MIN_EXTRACT_SIDE = 4 * 2**N_POOLS

WEIGHT_FILE_VERSION = 1


class SmallCropWarning(UserWarning):
    """The crop window was zero-padded so that four pools leave 4x4 maps."""


@dataclass(frozen=True, eq=False)
class ConvLayer:
    kernels: np.ndarray  # (32, in_channels, 5, 5)
    biases: np.ndarray  # (32,)

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if k.ndim != 4 or k.shape[0] != N_KERNELS or k.shape[2:] != (KERNEL_SIZE, KERNEL_SIZE):
            raise ValueError(f"kernels must have shape (32, C, 5, 5), got {k.shape}")
        if b.shape != (k.shape[0],):
            raise ValueError(f"expected {k.shape[0]} biases, got {b.shape}")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite layer weights")
        k.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "biases", b)

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]


@dataclass(frozen=True, eq=False)
class ExtractorConfig:
    layers: tuple[ConvLayer, ...]
    spp_levels: tuple[int, ...] = SPP_LEVELS
    cap: int = DEFAULT_CAP
    weight_seed: int | None = None
    classifier_weights: np.ndarray | None = None  # (928, 2)
    classifier_biases: np.ndarray | None = None  # (2,)
    _weights_matrix: tuple = field(default=(), repr=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) != N_LAYERS:
            raise ValueError(f"expected {N_LAYERS} conv layers, got {len(layers)}")
        if layers[0].in_channels != 3:
            raise ValueError("first layer must take 3 input channels")
        for layer in layers[1:]:
            if layer.in_channels != N_KERNELS:
                raise ValueError("inner layers must take 32 input channels")
        if tuple(self.spp_levels) != SPP_LEVELS:
            raise ValueError(f"spp_levels must be {SPP_LEVELS}")
        if self.cap < 32:
            raise ValueError(f"cap must be >= 32, got {self.cap}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "spp_levels", tuple(self.spp_levels))
        if self.classifier_weights is not None:
            w = np.asarray(self.classifier_weights, dtype=np.float64)
            b = np.asarray(self.classifier_biases, dtype=np.float64).reshape(-1)
            if w.shape != (FEATURE_DIM, 2) or b.shape != (2,):
                raise ValueError("classifier head must be a (928, 2) matrix and 2 biases")
            object.__setattr__(self, "classifier_weights", w)
            object.__setattr__(self, "classifier_biases", b)
        # kernels flattened once for the im2col product
        mats = tuple(layer.kernels.reshape(N_KERNELS, -1) for layer in layers)
        object.__setattr__(self, "_weights_matrix", mats)

    @property
    def has_classifier(self) -> bool:
        return self.classifier_weights is not None

    def with_cap(self, cap: int) -> "ExtractorConfig":
        return ExtractorConfig(
            self.layers, self.spp_levels, cap, self.weight_seed, self.classifier_weights, self.classifier_biases
        )


def seeded_config(seed: int = 0, cap: int = DEFAULT_CAP, classifier: bool = False) -> ExtractorConfig:
    """Pseudo-random weights drawn uniformly with scale ``1/sqrt(fan_in)``."""
    rng = np.random.default_rng(seed)
    layers = []
    in_ch = 3
    for _ in range(N_LAYERS):
        fan_in = in_ch * KERNEL_SIZE * KERNEL_SIZE
        bound = 1.0 / np.sqrt(fan_in)
        k = rng.uniform(-bound, bound, size=(N_KERNELS, in_ch, KERNEL_SIZE, KERNEL_SIZE))
        b = rng.uniform(-bound, bound, size=N_KERNELS)
        layers.append(ConvLayer(k, b))
        in_ch = N_KERNELS
    cw = cb = None
    if classifier:
        bound = 1.0 / np.sqrt(FEATURE_DIM)
        cw = rng.uniform(-bound, bound, size=(FEATURE_DIM, 2))
        cb = np.zeros(2)
    return ExtractorConfig(tuple(layers), SPP_LEVELS, cap, seed, cw, cb)


# -- layers ------------------------------------------------------------------


def _im2col(x: np.ndarray) -> np.ndarray:
    """(C, H, W) -> (C*25, H*W) patches of the zero-padded input."""
    c, h, w = x.shape
    p = KERNEL_SIZE // 2
    padded = np.zeros((c, h + 2 * p, w + 2 * p))
    padded[:, p : p + h, p : p + w] = x
    cols = np.empty((c, KERNEL_SIZE, KERNEL_SIZE, h, w))
    for dy in range(KERNEL_SIZE):
        for dx in range(KERNEL_SIZE):
            cols[:, dy, dx] = padded[:, dy : dy + h, dx : dx + w]
    return cols.reshape(c * KERNEL_SIZE * KERNEL_SIZE, h * w)


def _conv(x: np.ndarray, wmat: np.ndarray, biases: np.ndarray) -> np.ndarray:
    _, h, w = x.shape
    out = wmat @ _im2col(x)
    out += biases[:, None]
    return out.reshape(-1, h, w)


def conv2d_same(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Stride-1 convolution with 2 pixels of zero padding (same-size output)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != layer.in_channels:
        raise ValueError(f"input has {x.shape[0] if x.ndim == 3 else '?'} channels, layer expects {layer.in_channels}")
    return _conv(x, layer.kernels.reshape(N_KERNELS, -1), layer.biases)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def maxpool2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    if h < 2 or w < 2:
        raise ValueError(f"maxpool2 needs spatial dims >= 2, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    return x[:, : 2 * h2, : 2 * w2].reshape(c, h2, 2, w2, 2).max(axis=(2, 4))


def spp(x: np.ndarray, levels=SPP_LEVELS) -> np.ndarray:
    """Max over n x n grid cells for each level n.

    Cell ``i`` along an axis of length ``d`` spans ``[floor(i*d/n),
    floor((i+1)*d/n))``.  Output order is level, then channel, then cell in
    row-major order.
    """
    c, h, w = x.shape
    top = max(levels)
    if h < top or w < top:
        raise ValueError(f"spp needs spatial dims >= {top}, got {h}x{w}")
    parts = []
    for n in levels:
        rows = (np.arange(n) * h) // n
        cols = (np.arange(n) * w) // n
        grid = np.maximum.reduceat(np.maximum.reduceat(x, rows, axis=1), cols, axis=2)
        parts.append(grid.reshape(-1))
    return np.concatenate(parts)


# -- pipeline ----------------------------------------------------------------


def forward_maps(pixels: np.ndarray, cfg: ExtractorConfig) -> np.ndarray:
    """Run the five conv stages on a ``(H, W, 3)`` array; returns the last maps."""
    x = np.ascontiguousarray(np.transpose(pixels, (2, 0, 1)), dtype=np.float64)
    for i, layer in enumerate(cfg.layers):
        x = relu(_conv(x, cfg._weights_matrix[i], layer.biases))
        if i < N_POOLS:
            x = maxpool2(x)
    return x


def _pad_to_min(pixels: np.ndarray) -> np.ndarray:
    h, w, _ = pixels.shape
    nh, nw = max(h, MIN_EXTRACT_SIDE), max(w, MIN_EXTRACT_SIDE)
    if (nh, nw) == (h, w):
        return pixels
    warnings.warn(
        f"crop of {w}x{h} px zero-padded to {nw}x{nh} for feature extraction", SmallCropWarning, stacklevel=3
    )
    out = np.zeros((nh, nw, 3))
    oy, ox = (nh - h) // 2, (nw - w) // 2
    out[oy : oy + h, ox : ox + w] = pixels
    return out


def extract_features(img: Image, c: CropRegion, cfg: ExtractorConfig) -> np.ndarray:
    """The 928-dim feature vector of the crop window ``c`` of ``img``."""
    window = downscale_cap(crop_extract(img, c), cfg.cap)
    maps = forward_maps(_pad_to_min(window.pixels), cfg)
    return spp(maps, cfg.spp_levels)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def classify(feat: np.ndarray, cfg: ExtractorConfig) -> tuple[str, np.ndarray]:
    """Two-class head: returns ("low" | "high", [p_low, p_high])."""
    if not cfg.has_classifier:
        raise ValueError("extractor config has no classifier head")
    probs = softmax(np.asarray(feat, dtype=np.float64) @ cfg.classifier_weights + cfg.classifier_biases)
    return ("low", "high")[int(np.argmax(probs))], probs


# -- weight file -------------------------------------------------------------


def config_to_dict(cfg: ExtractorConfig, inline: bool | None = None) -> dict:
    """JSON-ready description; seeded configs are stored by seed unless ``inline``."""
    if inline is None:
        inline = cfg.weight_seed is None
    doc = {
        "format": "cascrop-weights",
        "version": WEIGHT_FILE_VERSION,
        "spp_levels": list(cfg.spp_levels),
        "cap": int(cfg.cap),
        "weight_seed": None if inline else int(cfg.weight_seed),
    }
    if inline:
        doc["layers"] = [
            {
                "kernels": layer.kernels.astype(np.float32).astype(np.float64).tolist(),
                "biases": layer.biases.astype(np.float32).astype(np.float64).tolist(),
            }
            for layer in cfg.layers
        ]
        if cfg.has_classifier:
            doc["classifier"] = {
                "weights": cfg.classifier_weights.astype(np.float32).astype(np.float64).tolist(),
                "biases": cfg.classifier_biases.astype(np.float32).astype(np.float64).tolist(),
            }
    else:
        doc["classifier_seeded"] = cfg.has_classifier
    return doc


def config_from_dict(doc: dict) -> ExtractorConfig:
    cap = int(doc.get("cap", DEFAULT_CAP))
    if tuple(doc.get("spp_levels", SPP_LEVELS)) != SPP_LEVELS:
        raise ValueError(f"unsupported spp_levels {doc.get('spp_levels')}")
    if doc.get("weight_seed") is not None:
        return seeded_config(int(doc["weight_seed"]), cap, classifier=bool(doc.get("classifier_seeded")))
    try:
        layers = tuple(
            ConvLayer(np.asarray(layer["kernels"], dtype=np.float64), np.asarray(layer["biases"], dtype=np.float64))
            for layer in doc["layers"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed layer entry: {exc}") from exc
    head = doc.get("classifier")
    cw = cb = None
    if head is not None:
        cw = np.asarray(head["weights"], dtype=np.float64)
        cb = np.asarray(head["biases"], dtype=np.float64)
    return ExtractorConfig(layers, SPP_LEVELS, cap, None, cw, cb)


def save_weights(cfg: ExtractorConfig, path: str | os.PathLike, inline: bool = True) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg, inline=inline), fh)


def load_weights(path: str | os.PathLike) -> ExtractorConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
