"""RGB raster images: binary PPM I/O, crop extraction, box downscaling, flips."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .geometry import CropRegion, ImageDims, denormalize

DEFAULT_CAP = 256


class PPMError(ValueError):
    """Malformed or unsupported PPM data."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class Image:
    """RGB image with float pixels in [0, 1], stored as a ``(H, W, 3)`` array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        px = np.array(px, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def dims(self) -> ImageDims:
        return ImageDims(self.width, self.height)

    def to_uint8(self) -> np.ndarray:
        return np.floor(self.pixels * 255.0 + 0.5).astype(np.uint8)

    @classmethod
    def from_uint8(cls, data: np.ndarray) -> "Image":
        return cls(np.asarray(data, dtype=np.float64) / 255.0)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


# -- PPM ---------------------------------------------------------------------

_WHITESPACE = b" \t\n\r\v\f"


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        ch = buf[pos : pos + 1]
        if ch in _WHITESPACE and ch:
            pos += 1
        elif ch == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos : pos + 1] not in _WHITESPACE and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PPMError("unexpected end of header", start)
    return buf[start:pos], pos


def decode_ppm(buf: bytes) -> Image:
    if buf[:2] != b"P6":
        raise PPMError(f"unsupported magic {buf[:2]!r}, expected b'P6'", 0)
    pos = 2
    values = []
    for name in ("width", "height", "maxval"):
        start = pos
        tok, pos = _read_header_token(buf, pos)
        if not tok.isdigit():
            raise PPMError(f"invalid {name} {tok!r}", start)
        values.append(int(tok))
    width, height, maxval = values
    if width < 1 or height < 1:
        raise PPMError(f"invalid size {width}x{height}", 2)
    if maxval != 255:
        raise PPMError(f"unsupported maxval {maxval}", pos)
    if pos >= len(buf) or buf[pos : pos + 1] not in _WHITESPACE:
        raise PPMError("missing whitespace after header", pos)
    pos += 1
    need = width * height * 3
    payload = buf[pos : pos + need]
    if len(payload) < need:
        raise PPMError(f"truncated payload: {len(payload)} of {need} bytes", pos + len(payload))
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image.from_uint8(data)


def encode_ppm(img: Image) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.to_uint8().tobytes()


def load_ppm(path: str | os.PathLike) -> Image:
    with open(path, "rb") as fh:
        return decode_ppm(fh.read())


def save_ppm(img: Image, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_ppm(img))


def load_image(path: str | os.PathLike) -> Image:
    """Load PPM natively; other formats go through Pillow when it is installed."""
    if str(path).lower().endswith((".ppm", ".pnm")):
        return load_ppm(path)
    try:
        from PIL import Image as PILImage
    except ImportError:  # pragma: no cover
        return load_ppm(path)
    with PILImage.open(path) as im:
        return Image.from_uint8(np.asarray(im.convert("RGB")))


# -- transforms --------------------------------------------------------------


def crop_extract(img: Image, c: CropRegion) -> Image:
    x1, y1, x2, y2 = denormalize(c, img.dims)
    return Image(img.pixels[y1:y2, x1:x2])


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) matrix averaging each output cell's input interval."""
    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo = edges[:-1, None]
    hi = edges[1:, None]
    left = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, left + 1) - np.maximum(lo, left), 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def resample_area(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    ry = _area_weights(pixels.shape[0], out_h)
    rx = _area_weights(pixels.shape[1], out_w)
    tmp = np.tensordot(ry, pixels, axes=(1, 0))  # (out_h, W, 3)
    return np.tensordot(tmp, rx, axes=(1, 1)).transpose(0, 2, 1)


def downscale_cap(img: Image, cap: int = DEFAULT_CAP) -> Image:
    """Box-resample so that the longer side is at most ``cap`` pixels."""
    if cap < 32:
        raise ValueError(f"cap must be >= 32, got {cap}")
    longest = max(img.width, img.height)
    if longest <= cap:
        return img
    f = cap / longest
    out_w = max(1, int(round(img.width * f)))
    out_h = max(1, int(round(img.height * f)))
    out = resample_area(img.pixels, out_h, out_w)
    return Image(np.clip(out, 0.0, 1.0))


def hflip(img: Image) -> Image:
    return Image(img.pixels[:, ::-1])
