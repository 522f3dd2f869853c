"""Interchange rasters shared with the labeling pipeline.

AVPM files are little-endian: a 20-byte header (magic, version, width,
height, channels) followed by planar float32 samples.  Label and FOV
images are 8-bit single-channel PNGs; label codes are 0 background,
1 artery, 2 vein, 255 outside the field of view.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image

from .errors import FormatError, IoFailure

AVPM_MAGIC = b"AVPM"
AVPM_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

BACKGROUND = 0
ARTERY = 1
VEIN = 2
OUTSIDE = 255


def read_avpm(path) -> np.ndarray:
    """Read a planar float32 raster as a (channels, height, width) array."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: header incomplete ({len(data)} bytes)")
    magic, version, width, height, channels = _HEADER.unpack_from(data)
    if magic != AVPM_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != AVPM_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    need = width * height * channels * 4
    body = data[_HEADER.size :]
    if len(body) != need:
        raise FormatError(f"{path}: expected {need} sample bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(channels, height, width).copy()


def write_avpm(samples: np.ndarray, path) -> None:
    """Write a (channels, height, width) float32 array in planar layout."""
    if samples.ndim != 3:
        raise FormatError(f"expected a (channels, height, width) array, got shape {samples.shape}")
    channels, height, width = samples.shape
    header = _HEADER.pack(AVPM_MAGIC, AVPM_VERSION, width, height, channels)
    body = np.ascontiguousarray(samples, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(body)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_label_png(path) -> np.ndarray:
    """Read a label map stored as 8-bit single-channel PNG."""
    try:
        img = Image.open(path)
        img.load()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.uint8)


def read_fov_png(path) -> np.ndarray:
    """Read a field-of-view mask PNG as a boolean array (nonzero = inside)."""
    return read_label_png(path) > 0
