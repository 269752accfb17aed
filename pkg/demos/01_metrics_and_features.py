"""
Crop geometry and CNN features
==============================

A tour of the two ingredients every cascade stage relies on: the metrics
used to score crops, and the fixed-length feature vector pulled out of the
current crop window.
"""

import numpy as np

from cascrop import cnn
from cascrop.geometry import CropRegion, ImageDims, bde, denormalize, iou, normalize
from cascrop.imaging import Image

# %%
# Crops live in normalized coordinates: pixel corners divided by the longer
# image side.  A 400x300 image therefore spans x in [0, 1] and y in [0, 0.75].

dims = ImageDims(400, 300)
crop = normalize((40, 30, 240, 180), dims)
print("normalized:", crop)
print("back to pixels:", denormalize(crop, dims))

# %%
# IoU rewards overlap, BDE penalises how far the four edges moved.  Shifting
# one edge of the unit square halfway costs 0.25 squared displacement, spread
# over four edges.

a = CropRegion(0.0, 0.0, 0.5, 0.5)
b = CropRegion(0.25, 0.25, 0.75, 0.75)
print(f"iou(a, b) = {iou(a, b):.6f}")  # 1/7
print(f"bde = {bde((0, 0, 1, 1), (0, 0, 1, 0.5)):.4f}")
print(f"bde (absolute) = {bde((0, 0, 1, 1), (0, 0, 1, 0.5), squared=False):.4f}")

# %%
# The extractor is five 5x5 convolutions with 32 kernels each, max pooling
# after the first four, and a pyramid pooling layer over 2x2, 3x3 and 4x4
# grids: 32 * (4 + 9 + 16) = 928 numbers whatever the crop size.

cfg = cnn.seeded_config(seed=0, cap=128)
yy, xx = np.mgrid[0:300, 0:400]
px = np.stack([(xx % 32) / 31, (yy % 16) / 15, np.full(xx.shape, 0.3)], axis=-1)
img = Image(px)

for c in [CropRegion(0, 0, 1, 0.75), CropRegion(0.1, 0.1, 0.4, 0.3)]:
    f = cnn.extract_features(img, c, cfg)
    print(f"crop {tuple(round(v, 2) for v in c)} -> {f.shape[0]} features, mean {f.mean():.4f}")

# %%
# Pyramid pooling is what makes the length fixed.  Any 32-channel map of at
# least 4x4 cells gives 928 outputs.

for h, w in [(4, 4), (7, 19), (33, 12)]:
    print((h, w), cnn.spp(np.random.default_rng(0).random((32, h, w))).shape)
