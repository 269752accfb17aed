"""
Ablation sweeps
===============

The harness trains every cell of a sweep on one split and writes per-stage
curves to CSV.  This runs the primitive-regressor sweep (20 ferns per
stage against a single fern) at toy scale.  The full-size version is
``cascrop bench --sweep primitive``.
"""

import warnings

from cascrop import cnn
from cascrop.cascade import Hyper
from cascrop.cnn import SmallCropWarning
from cascrop.data import SynthSpec, split, synth_samples
from cascrop.harness import curve_table, read_curves_csv, run_sweep, sweep_grid

warnings.simplefilter("ignore", SmallCropWarning)

samples = synth_samples(SynthSpec(count=100, seed=1))
train, test = split(samples, 0.7, seed=0)
cfg = cnn.seeded_config(0, cap=96)

# %%
# The grid maps cell names to hyperparameters.  Other sweeps: "ferns"
# (M in 1, 5, 10, 20, 40) and "init" (three initial-crop sizes).

grid = sweep_grid("primitive", Hyper(T=6, beta=100.0, patience=None))
print({k: (h.M, h.T) for k, h in grid.items()})

curves, models = run_sweep(grid, train, test, cfg, sweep="primitive", out_dir="demo_out/sweep", timing=False)
print(curve_table(curves))

# %%
# The CSV has one row per (cell, stage).

for cell, points in read_curves_csv("demo_out/sweep/primitive.csv").items():
    print(cell, [round(p.mean_iou, 3) for p in points])

# %%
# Models are cached by hyperparameters, so a second sweep that repeats a
# cell does not retrain it.

cache = {h: models[k] for k, h in grid.items()}
init_grid = sweep_grid("init", grid["CCR"])
curves, _ = run_sweep(init_grid, train, test, cfg, sweep="init", models=cache, timing=False)
print(curve_table(curves))
