"""Per-stage evaluation curves, ablation sweeps and crop-sequence overlays."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import cnn
from .cascade import CascadeModel, Hyper, apply_stage, ccr_predict, ccr_train, extract_all, initial_crop
from .geometry import canonical_rows, denormalize, iou_many
from .imaging import Image, save_ppm

CSV_FIELDS = ("sweep", "cell", "stage", "mean_iou", "mean_bde", "seconds")
OVERLAY_STAGES = (1, 5, 10, 15, 20, 30)


@dataclass(frozen=True)
class CurvePoint:
    stage: int
    mean_iou: float
    mean_bde: float
    seconds: float = 0.0


def curve_from_trajectories(traj: np.ndarray, truth: np.ndarray, seconds=None, squared_bde: bool = True) -> list[CurvePoint]:
    """Mean IoU / BDE against ``truth`` at every stage of ``(N, T+1, 4)`` trajectories."""
    truth = np.asarray(truth, dtype=np.float64)
    points = []
    for t in range(traj.shape[1]):
        boxes = canonical_rows(traj[:, t])
        d = boxes - truth
        per_edge = d**2 if squared_bde else np.abs(d)
        points.append(
            CurvePoint(
                t,
                float(iou_many(boxes, truth).mean()),
                float(per_edge.sum(axis=1).mean() / 4.0),
                0.0 if seconds is None else float(seconds[t]),
            )
        )
    return points


def run_curve(model: CascadeModel, test_samples, threads: int = 1, timing: bool = True,
              squared_bde: bool = True) -> list[CurvePoint]:
    """Evaluate ``model`` on ``test_samples`` after every stage (stage 0 = initial crop).

    With ``timing`` the cumulative wall time of the prediction is recorded;
    without it the ``seconds`` column is zero and curves are reproducible
    byte for byte.
    """
    test_samples = list(test_samples)
    if not test_samples:
        raise ValueError("run_curve needs a non-empty test set")
    images = [s.image for s in test_samples]
    truth = np.array([s.truth for s in test_samples], dtype=np.float64)
    start = time.perf_counter()
    c = np.array([initial_crop(img.dims, model.hyper.init_crop) for img in images], dtype=np.float64)
    traj, secs = [c], [0.0]
    for stage in model.stages:
        c = apply_stage(stage, extract_all(images, c, model.extractor, threads), c, model.lam)
        traj.append(c)
        secs.append(time.perf_counter() - start)
    return curve_from_trajectories(np.stack(traj, axis=1), truth, secs if timing else None, squared_bde)


def sweep_grid(kind: str, base: Hyper) -> dict[str, Hyper]:
    """Named cells of one of the ablation sweeps."""
    if kind == "ferns":
        return {f"M={m}": replace(base, M=m) for m in (1, 5, 10, 20, 40)}
    if kind == "primitive":
        return {"CCR": replace(base, M=20), "CCR-": replace(base, M=1)}
    if kind == "init":
        return {name: replace(base, init_crop=name) for name in ("full", "scale-0.5", "scale-0.25")}
    raise ValueError(f"unknown sweep {kind!r}; choose ferns, primitive or init")


def config_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def run_dir(base: str | os.PathLike, config) -> Path:
    path = Path(base) / f"run-{config_hash(config)}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_curves_csv(path, sweep: str, curves: dict[str, list[CurvePoint]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for cell, points in curves.items():
            for p in points:
                w.writerow([sweep, cell, p.stage, f"{p.mean_iou:.6f}", f"{p.mean_bde:.6f}", f"{p.seconds:.3f}"])


def read_curves_csv(path) -> dict[str, list[CurvePoint]]:
    out: dict[str, list[CurvePoint]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["cell"], []).append(
                CurvePoint(int(row["stage"]), float(row["mean_iou"]), float(row["mean_bde"]), float(row["seconds"]))
            )
    return out


def run_sweep(grid: dict[str, Hyper], train, test, extractor: cnn.ExtractorConfig, sweep: str = "sweep",
              out_dir=None, threads: int = 1, timing: bool = True, models: dict | None = None):
    """Train and evaluate every cell on the same split.

    Returns ``(curves, models)`` keyed by cell name.  Trained models are
    looked up in (and added to) ``models`` by hyperparameters, so cells
    shared between sweeps are trained once.  With ``out_dir`` the curves go
    to ``out_dir/<sweep>.csv``.
    """
    if not grid:
        raise ValueError("empty sweep grid")
    cache = {} if models is None else models
    curves, trained = {}, {}
    for cell, hyper in grid.items():
        if hyper not in cache:
            cache[hyper] = ccr_train(train, hyper, extractor, threads=threads)
        trained[cell] = cache[hyper]
        curves[cell] = run_curve(trained[cell], test, threads=threads, timing=timing)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_curves_csv(Path(out_dir) / f"{sweep}.csv", sweep, curves)
    return curves, trained


def draw_rect(img: Image, rect_px, color=(1.0, 0.0, 0.0), thickness: int = 2) -> Image:
    px = np.array(img.pixels)
    x1, y1, x2, y2 = rect_px
    t = thickness
    px[y1 : min(y1 + t, y2), x1:x2] = color
    px[max(y2 - t, y1) : y2, x1:x2] = color
    px[y1:y2, x1 : min(x1 + t, x2)] = color
    px[y1:y2, max(x2 - t, x1) : x2] = color
    return Image(px)


def crop_sequence(model: CascadeModel, img: Image, out_dir, stages=OVERLAY_STAGES, stem: str = "stage") -> list[Path]:
    """Write the image with the crop outlined at each listed stage (capped at ``model.T``)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, traj = ccr_predict(model, img)
    paths = []
    for t in stages:
        if t > model.T:
            continue
        rect = denormalize(traj[t], img.dims)
        path = out_dir / f"{stem}_{t:02d}.ppm"
        save_ppm(draw_rect(img, rect), path)
        paths.append(path)
    return paths


def curve_table(curves: dict[str, list[CurvePoint]]) -> str:
    lines = []
    for cell, points in curves.items():
        final = points[-1]
        lines.append(f"{cell}: stage0 IoU {points[0].mean_iou:.3f} -> stage {final.stage} IoU {final.mean_iou:.3f}")
    return "\n".join(lines)
