"""Crop-region arithmetic, coordinate normalization and the IoU / BDE metrics.

All model-internal state uses *normalized* coordinates: pixel coordinates
divided by ``max(width, height)`` of the image, on both axes.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

MIN_SIDE_PX = 8


class DegenerateRegionError(ValueError):
    """Raised when a rectangle has zero width or height."""


class ImageDims(NamedTuple):
    width: int
    height: int

    @property
    def scale(self) -> int:
        return max(self.width, self.height)

    def check(self) -> "ImageDims":
        if self.width < 1 or self.height < 1:
            raise ValueError(f"invalid image dims {self.width}x{self.height}")
        return self


class CropRegion(NamedTuple):
    """Axis-aligned rectangle given by its top-left and bottom-right corners."""

    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    def canonical(self) -> "CropRegion":
        """Return the rectangle with swapped coordinates where inverted."""
        x1, x2 = sorted((float(self.x1), float(self.x2)))
        y1, y2 = sorted((float(self.y1), float(self.y2)))
        return CropRegion(x1, y1, x2, y2)

    def scaled(self, factor: float) -> "CropRegion":
        """Scale side lengths by ``factor`` about the center."""
        cx, cy = self.center
        hw, hh = self.width * factor / 2.0, self.height * factor / 2.0
        return CropRegion(cx - hw, cy - hh, cx + hw, cy + hh)

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


def full_frame(dims: ImageDims) -> CropRegion:
    s = dims.scale
    return CropRegion(0.0, 0.0, dims.width / s, dims.height / s)


def canonicalize(rect) -> CropRegion:
    c = CropRegion(*(float(v) for v in rect)).canonical()
    if not all(math.isfinite(v) for v in c):
        raise ValueError(f"non-finite coordinates in {tuple(rect)}")
    if c.x1 == c.x2 or c.y1 == c.y2:
        raise DegenerateRegionError(f"zero-area rectangle {tuple(rect)}")
    return c


def normalize(rect_px, dims: ImageDims) -> CropRegion:
    """Divide pixel coordinates by ``max(width, height)`` and canonicalize."""
    dims = ImageDims(*dims).check()
    s = float(dims.scale)
    return canonicalize([v / s for v in rect_px])


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def _clamp_interval(lo: int, hi: int, limit: int) -> tuple[int, int]:
    lo = min(max(lo, 0), limit)
    hi = min(max(hi, 0), limit)
    return lo, hi


def _grow(lo: int, hi: int, limit: int, min_side: int) -> tuple[int, int]:
    need = min(min_side, limit)
    if hi - lo >= need:
        return lo, hi
    # symmetric expansion about the center, then shift back inside
    center2 = lo + hi  # twice the center, kept integral
    lo = (center2 - need) // 2
    hi = lo + need
    if lo < 0:
        lo, hi = 0, need
    if hi > limit:
        lo, hi = limit - need, limit
    return lo, hi


def denormalize(c: CropRegion, dims: ImageDims, min_side: int = MIN_SIDE_PX) -> tuple[int, int, int, int]:
    """Map a normalized region to an in-bounds integer pixel rectangle.

    Coordinates are rounded half-up and clamped into the image.  Sides
    shorter than ``min_side`` pixels are grown symmetrically about their
    center (capped at the image size).
    """
    dims = ImageDims(*dims).check()
    c = CropRegion(*c).canonical()
    s = dims.scale
    x1, x2 = _clamp_interval(_round_half_up(c.x1 * s), _round_half_up(c.x2 * s), dims.width)
    y1, y2 = _clamp_interval(_round_half_up(c.y1 * s), _round_half_up(c.y2 * s), dims.height)
    x1, x2 = _grow(x1, x2, dims.width, min_side)
    y1, y2 = _grow(y1, y2, dims.height, min_side)
    return x1, y1, x2, y2


def iou(a: CropRegion, b: CropRegion) -> float:
    ax1, ay1, ax2, ay2 = a
    bx1, by1, bx2, by2 = b
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return float(inter / union)


def bde(p: CropRegion, m: CropRegion, squared: bool = True) -> float:
    """Boundary displacement error averaged over the four edges.

    ``squared=True`` gives ``sum((p - m)**2) / 4``; ``squared=False`` the
    mean absolute edge displacement.
    """
    d = np.asarray(p, dtype=np.float64) - np.asarray(m, dtype=np.float64)
    if squared:
        return float(np.dot(d, d) / 4.0)
    return float(np.abs(d).sum() / 4.0)


def iou_many(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Row-wise IoU of two ``(N, 4)`` arrays of canonical rectangles."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    iw = np.clip(np.minimum(pred[:, 2], truth[:, 2]) - np.maximum(pred[:, 0], truth[:, 0]), 0.0, None)
    ih = np.clip(np.minimum(pred[:, 3], truth[:, 3]) - np.maximum(pred[:, 1], truth[:, 1]), 0.0, None)
    inter = iw * ih
    area_p = (pred[:, 2] - pred[:, 0]) * (pred[:, 3] - pred[:, 1])
    area_t = (truth[:, 2] - truth[:, 0]) * (truth[:, 3] - truth[:, 1])
    union = area_p + area_t - inter
    out = np.zeros(len(pred))
    ok = union > 0
    out[ok] = inter[ok] / union[ok]
    return out


def canonical_rows(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    out = boxes.copy()
    out[:, 0] = np.minimum(boxes[:, 0], boxes[:, 2])
    out[:, 2] = np.maximum(boxes[:, 0], boxes[:, 2])
    out[:, 1] = np.minimum(boxes[:, 1], boxes[:, 3])
    out[:, 3] = np.maximum(boxes[:, 1], boxes[:, 3])
    return out
