"""Image containers, PGM/PPM and IDX ingestion, synthetic shapes data.

Images are float64 arrays of shape ``(height, width, channels)`` with
intensities in [0, 1]; quantization to bytes happens only at file I/O.
"""
from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

SHAPE_NAMES = ("disk", "square", "cross", "ring")


class FormatError(ValueError):
    """Base class for file decoding errors."""


class MalformedHeaderError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class UnsupportedMagicError(FormatError):
    pass


class MagicMismatchError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass


@dataclass
class SampleSet:
    """An ordered batch of equally sized images with optional integer labels.

    ``images`` has shape ``(n, height, width, channels)``.
    """

    images: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        if images.ndim == 3:
            images = images[..., None]
        if images.ndim != 4:
            raise ValueError(f"images must be (n, h, w, c), got shape {images.shape}")
        if images.shape[-1] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {images.shape[-1]}")
        self.images = images
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (images.shape[0],):
                raise ValueError(
                    f"{labels.shape[0] if labels.ndim else 0} labels for {images.shape[0]} images"
                )
            self.labels = labels

    def __len__(self):
        return self.images.shape[0]

    @property
    def shape(self):
        return self.images.shape[1:]

    def subset(self, index) -> SampleSet:
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return SampleSet(self.images[index], labels)

    def with_images(self, images: np.ndarray) -> SampleSet:
        """Same labels, new pixels."""
        return SampleSet(images, self.labels)

    def grayscale(self) -> np.ndarray:
        """(n, h, w) luma planes."""
        if self.images.shape[-1] == 1:
            return self.images[..., 0]
        return self.images @ LUMA_WEIGHTS


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma; returns a (h, w, 1) image. Identity on 1-channel input."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[..., None]
    if img.shape[-1] == 1:
        return img
    if img.shape[-1] != 3:
        raise ValueError(f"channels must be 1 or 3, got {img.shape[-1]}")
    return np.clip(img @ LUMA_WEIGHTS, 0.0, 1.0)[..., None]


# -- PGM / PPM ---------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(raw: bytes, count: int):
    tokens = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise MalformedHeaderError("header ends early")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def decode_raster(raw: bytes) -> np.ndarray:
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedMagicError(f"unsupported magic {magic!r}; expected P5 or P6")
    tokens, pos = _header_tokens(raw, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer header field: {exc}") from None
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise MalformedHeaderError(f"maxval {maxval} outside 1..255")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise MalformedHeaderError("missing whitespace after maxval")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = raw[pos : pos + expected]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"expected {expected} payload bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / maxval
    if data.max(initial=0.0) > 1.0:
        raise MalformedHeaderError("sample value exceeds maxval")
    return data.reshape(height, width, channels)


def load_raster(path) -> np.ndarray:
    return decode_raster(Path(path).read_bytes())


def encode_raster(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
    height, width, channels = img.shape
    magic = {1: b"P5", 3: b"P6"}[channels]
    body = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8).tobytes()
    return magic + b"\n%d %d\n255\n" % (width, height) + body


def save_raster(path, img: np.ndarray) -> None:
    atomic_write_bytes(path, encode_raster(img))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# -- IDX -----------------------------------------------------------------------


def _read_idx(raw: bytes, magic: int, ndim: int, what: str):
    header_len = 4 * (1 + ndim)
    if len(raw) < header_len:
        raise TruncatedPayloadError(f"{what} file shorter than its header")
    fields = struct.unpack(">%dI" % (1 + ndim), raw[:header_len])
    if fields[0] != magic:
        raise MagicMismatchError(f"{what} magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    dims = fields[1:]
    size = int(np.prod(dims))
    payload = raw[header_len : header_len + size]
    if len(payload) < size:
        raise TruncatedPayloadError(f"{what} payload has {len(payload)} of {size} bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> SampleSet:
    images = _read_idx(Path(images_path).read_bytes(), IDX_IMAGES_MAGIC, 3, "images")
    labels = _read_idx(Path(labels_path).read_bytes(), IDX_LABELS_MAGIC, 1, "labels")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return SampleSet(images.astype(np.float64)[..., None] / 255.0, labels.astype(np.int64))


def encode_idx(samples: SampleSet) -> tuple[bytes, bytes]:
    gray = samples.grayscale()
    n, h, w = gray.shape
    pixels = np.round(np.clip(gray, 0, 1) * 255).astype(np.uint8)
    img_bytes = struct.pack(">4I", IDX_IMAGES_MAGIC, n, h, w) + pixels.tobytes()
    labels = samples.labels if samples.labels is not None else np.zeros(n, dtype=np.int64)
    lab_bytes = struct.pack(">2I", IDX_LABELS_MAGIC, n) + labels.astype(np.uint8).tobytes()
    return img_bytes, lab_bytes


# -- synthetic shapes -----------------------------------------------------------


def _render_shape(kind: int, side: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64) + 0.5
    cy, cx = side / 2 + rng.uniform(-0.12, 0.12, size=2) * side
    radius = rng.uniform(0.24, 0.34) * side
    dy, dx = yy - cy, xx - cx

    # signed distance to the shape boundary (positive inside), 1px soft edge
    if kind == 0:
        sd = radius - np.hypot(dx, dy)
    elif kind == 1:
        half = 0.82 * radius
        sd = half - np.maximum(np.abs(dx), np.abs(dy))
    elif kind == 2:
        arm = 0.3 * radius
        horiz = np.minimum(arm - np.abs(dy), radius - np.abs(dx))
        vert = np.minimum(arm - np.abs(dx), radius - np.abs(dy))
        sd = np.maximum(horiz, vert)
    else:
        dist = np.hypot(dx, dy)
        width = 0.38 * radius
        sd = np.minimum(radius - dist, dist - (radius - width))
    mask = np.clip(sd + 0.5, 0.0, 1.0)

    background = rng.uniform(0.1, 0.25)
    fy, fx = rng.uniform(0.15, 0.6, size=2)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    texture = 0.04 * (np.sin(fy * yy + phase[0]) + np.sin(fx * xx + phase[1]))
    texture += rng.normal(0.0, 0.02, size=(side, side))
    foreground = rng.uniform(0.6, 0.9)
    img = background + texture + mask * (foreground - background)
    return np.clip(img, 0.0, 1.0)


def synth_dataset(n: int, side: int = 28, classes: int = 4, seed: int = 0) -> SampleSet:
    """Class-balanced grayscale shapes (disk, square, cross, ring) on textured backgrounds."""
    if classes > len(SHAPE_NAMES) or classes < 1:
        raise ValueError(f"classes must be in 1..{len(SHAPE_NAMES)}, got {classes}")
    if side < 16:
        raise ValueError(f"side must be >= 16, got {side}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    images = np.empty((n, side, side, 1))
    for i, kind in enumerate(labels):
        images[i, ..., 0] = _render_shape(int(kind), side, rng)
    return SampleSet(images, labels)
