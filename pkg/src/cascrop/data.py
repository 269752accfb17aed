"""Annotations, splits, aesthetic labels and the synthetic cropping benchmark."""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cascade import TrainSample
from .geometry import CropRegion, normalize
from .imaging import Image, load_image, save_ppm

ANNOTATION_FILE = "annotations.csv"


class AnnotationError(ValueError):
    pass


class AnnotationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    image_path: str
    x1: int
    y1: int
    x2: int
    y2: int
    annotator: int = 1

    @property
    def rect(self) -> tuple[int, int, int, int]:
        return self.x1, self.y1, self.x2, self.y2


# -- CSV ---------------------------------------------------------------------


def parse_annotation_line(line: str, lineno: int = 1) -> AnnotationRecord:
    fields = next(csv.reader([line]))
    if len(fields) != 6:
        raise AnnotationError(f"line {lineno}: expected 6 fields, got {len(fields)}")
    path = fields[0].strip()
    try:
        x1, y1, x2, y2, who = (int(f.strip()) for f in fields[1:])
    except ValueError:
        raise AnnotationError(f"line {lineno}: non-integer coordinate or annotator in {line.strip()!r}") from None
    if x1 == x2 or y1 == y2:
        raise AnnotationError(f"line {lineno}: zero-area rectangle")
    if x1 > x2 or y1 > y2:
        warnings.warn(f"line {lineno}: inverted rectangle repaired by swapping", AnnotationWarning, stacklevel=2)
        x1, x2 = sorted((x1, x2))
        y1, y2 = sorted((y1, y2))
    return AnnotationRecord(path, x1, y1, x2, y2, who)


def load_annotations(path: str | os.PathLike) -> list[AnnotationRecord]:
    records = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            records.append(parse_annotation_line(line, lineno))
    return records


def write_annotations(records, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in records:
            w.writerow([r.image_path, r.x1, r.y1, r.x2, r.y2, r.annotator])


def load_dataset(data_dir: str | os.PathLike, annotator: int | None = None) -> list[TrainSample]:
    """Images plus normalized ground-truth crops from ``data_dir/annotations.csv``."""
    data_dir = Path(data_dir)
    records = load_annotations(data_dir / ANNOTATION_FILE)
    samples = []
    for r in records:
        if annotator is not None and r.annotator != annotator:
            continue
        img = load_image(data_dir / r.image_path)
        if not (0 <= r.x1 < r.x2 <= img.width and 0 <= r.y1 < r.y2 <= img.height):
            raise AnnotationError(f"{r.image_path}: crop {r.rect} outside {img.width}x{img.height} image")
        samples.append(TrainSample(img, normalize(r.rect, img.dims), r.image_path))
    return samples


# -- labels and augmentation -------------------------------------------------


def ava_label(mean_score: float, delta: float = 1.0) -> str:
    """``"low"`` below 5-delta, ``"high"`` from 5+delta up, otherwise ``"discard"``."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if mean_score < 5.0 - delta:
        return "low"
    if mean_score >= 5.0 + delta:
        return "high"
    return "discard"


def flip_record(record: AnnotationRecord, image_width: int, image_path: str | None = None) -> AnnotationRecord:
    """Mirror an annotation to match a horizontally flipped image."""
    return AnnotationRecord(
        image_path or record.image_path,
        image_width - record.x2,
        record.y1,
        image_width - record.x1,
        record.y2,
        record.annotator,
    )


def split(records, fraction: float, seed: int = 0):
    """Seeded shuffle into ``(first, rest)`` with ``round(fraction * N)`` items first."""
    records = list(records)
    if len(records) < 2:
        raise ValueError("split needs at least 2 records")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(records))
    k = min(max(int(round(fraction * len(records))), 1), len(records) - 1)
    return [records[i] for i in order[:k]], [records[i] for i in order[k:]]


# -- synthetic benchmark -----------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic cropping benchmark.

    Each image is a dark noisy background holding one bright checkered
    subject.  The ground-truth crop is the subject grown by ``margin`` times
    its width / height on every side, clipped to the image.
    """

    count: int = 500
    size_range: tuple[int, int] = (160, 256)  # image sides, pixels
    subject_range: tuple[float, float] = (0.2, 0.45)  # subject side / image side
    noise: float = 0.1
    margin: float = 0.25
    checker: int = 6  # checker cell, pixels
    seed: int = 0
    max_retries: int = 20

    def __post_init__(self):
        object.__setattr__(self, "size_range", tuple(int(v) for v in self.size_range))
        object.__setattr__(self, "subject_range", tuple(float(v) for v in self.subject_range))
        lo, hi = self.size_range
        if self.count < 1 or lo < 8 or hi < lo:
            raise ValueError("invalid count or size_range")
        slo, shi = self.subject_range
        if not 0.0 < slo <= shi <= 1.0:
            raise ValueError("subject_range must satisfy 0 < min <= max <= 1")
        if self.margin < 0 or self.noise < 0 or self.checker < 1:
            raise ValueError("margin, noise must be >= 0 and checker >= 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        return cls(**json.loads(text))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SynthSpec":
        return cls.from_json(Path(path).read_text())


def synth_image(spec: SynthSpec, index: int) -> tuple[Image, tuple[int, int, int, int], tuple[int, int, int, int]]:
    """Render image ``index``; returns (image, subject rect, ground-truth rect) in pixels."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    for _ in range(spec.max_retries):
        w = int(rng.integers(spec.size_range[0], spec.size_range[1] + 1))
        h = int(rng.integers(spec.size_range[0], spec.size_range[1] + 1))
        sw = int(round(rng.uniform(*spec.subject_range) * w))
        sh = int(round(rng.uniform(*spec.subject_range) * h))
        if 1 <= sw < w and 1 <= sh < h:
            break
    else:
        raise RuntimeError(f"image {index}: subject does not fit after {spec.max_retries} tries")
    sx = int(rng.integers(0, w - sw + 1))
    sy = int(rng.integers(0, h - sh + 1))

    base = rng.uniform(0.05, 0.25, size=3)
    px = base + spec.noise * rng.uniform(-1.0, 1.0, size=(h, w, 3))
    color_a = rng.uniform(0.7, 1.0, size=3)
    color_b = color_a * rng.uniform(0.4, 0.8)
    yy, xx = np.mgrid[0:sh, 0:sw]
    checker = ((yy // spec.checker + xx // spec.checker) % 2).astype(bool)
    patch = np.where(checker[..., None], color_a, color_b)
    patch = patch + spec.noise * rng.uniform(-1.0, 1.0, size=(sh, sw, 3))
    px[sy : sy + sh, sx : sx + sw] = patch
    img = Image.from_uint8(np.floor(np.clip(px, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8))

    mx = int(round(spec.margin * sw))
    my = int(round(spec.margin * sh))
    gt = (max(sx - mx, 0), max(sy - my, 0), min(sx + sw + mx, w), min(sy + sh + my, h))
    return img, (sx, sy, sx + sw, sy + sh), gt


def synth_generate(spec: SynthSpec, out_dir: str | os.PathLike) -> list[AnnotationRecord]:
    """Write the benchmark as PPM images plus ``annotations.csv`` and ``spec.json``."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(spec.count):
        img, _, gt = synth_image(spec, i)
        rel = f"images/synth_{i:05d}.ppm"
        save_ppm(img, out_dir / rel)
        records.append(AnnotationRecord(rel, *gt, annotator=1))
    write_annotations(records, out_dir / ANNOTATION_FILE)
    (out_dir / "spec.json").write_text(spec.to_json() + "\n")
    return records


def synth_samples(spec: SynthSpec) -> list[TrainSample]:
    """The benchmark built in memory, without touching the file system."""
    out = []
    for i in range(spec.count):
        img, _, gt = synth_image(spec, i)
        out.append(TrainSample(img, normalize(gt, img.dims), f"images/synth_{i:05d}.ppm"))
    return out


def truth_array(samples) -> np.ndarray:
    return np.array([s.truth for s in samples], dtype=np.float64).reshape(-1, 4)


def as_region(row) -> CropRegion:
    return CropRegion(*(float(v) for v in row))
