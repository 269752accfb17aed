"""Automatic image cropping by cascaded regression over boosted random ferns.

A convolutional extractor turns the current crop window into a 928-dim
feature vector; each cascade stage predicts per-coordinate offsets with a
gradient-boosted ensemble of random ferns and moves the crop.
"""

from .boosting import BoostingTrace, PrimitiveRegressor, boost_fit, boost_predict
from .cascade import (
    CascadeModel,
    Hyper,
    TrainSample,
    ccr_predict,
    ccr_predict_many,
    ccr_train,
    load_model,
    save_model,
)
from .cnn import ExtractorConfig, extract_features, seeded_config
from .data import SynthSpec, load_dataset, synth_generate, synth_samples
from .ferns import Fern, FernPool
from .geometry import CropRegion, ImageDims, bde, denormalize, iou, normalize
from .imaging import Image, load_ppm, save_ppm

__version__ = "0.1.0"

__all__ = [
    "BoostingTrace", "PrimitiveRegressor", "boost_fit", "boost_predict",
    "CascadeModel", "Hyper", "TrainSample", "ccr_predict", "ccr_predict_many", "ccr_train", "load_model", "save_model",
    "ExtractorConfig", "extract_features", "seeded_config",
    "SynthSpec", "load_dataset", "synth_generate", "synth_samples",
    "Fern", "FernPool",
    "CropRegion", "ImageDims", "bde", "denormalize", "iou", "normalize",
    "Image", "load_ppm", "save_ppm",
]
