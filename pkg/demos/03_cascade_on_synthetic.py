"""
A cropping cascade on the synthetic benchmark
=============================================

Builds a small version of the synthetic benchmark, trains a cascade, prints
the per-stage curve and writes crop overlays to ``demo_out/``.  Scaled down
(120 images, 8 stages, cap 96) so it finishes in well under a minute.
"""

import warnings
from pathlib import Path

import numpy as np

from cascrop import cnn
from cascrop.cascade import Hyper, ccr_predict, ccr_train, load_model, save_model
from cascrop.cnn import SmallCropWarning
from cascrop.data import SynthSpec, split, synth_samples
from cascrop.geometry import denormalize
from cascrop.harness import crop_sequence, run_curve

warnings.simplefilter("ignore", SmallCropWarning)
out = Path("demo_out")
out.mkdir(exist_ok=True)

# %%
# Each image is a dark noisy background with one checkered subject.  The
# target crop is the subject plus a 25% margin on every side.

samples = synth_samples(SynthSpec(count=120, seed=0))
train, test = split(samples, 0.7, seed=0)
print(len(train), "train /", len(test), "test")

# %%
# Train eight stages.  Each stage re-extracts features at the current crops
# and fits four boosted-fern regressors, one per crop coordinate.

cfg = cnn.seeded_config(seed=0, cap=96)
hyper = Hyper(T=8, M=20, beta=100.0, patience=None)
model = ccr_train(train, hyper, cfg, progress=lambda t, tr, va: print(f"stage {t}: train IoU {tr:.3f} val IoU {va:.3f}"))

# %%
# Test curve: stage 0 is the full frame.

for p in run_curve(model, test, timing=False):
    print(f"stage {p.stage:2d}  IoU {p.mean_iou:.3f}  BDE {p.mean_bde:.4f}")

# %%
# Models are JSON with a checksum.  A reloaded model predicts the same
# trajectory bit for bit.

save_model(model, out / "model.json")
again = load_model(out / "model.json")
img = test[0].image
crop, traj = ccr_predict(model, img)
_, traj2 = ccr_predict(again, img)
print("identical after reload:", np.array_equal(traj, traj2))
print("predicted", denormalize(crop, img.dims), "truth", denormalize(test[0].truth, img.dims))

paths = crop_sequence(model, img, out / "overlay", stages=(0, 1, 2, 4, 8))
print("overlays:", [p.name for p in paths])
