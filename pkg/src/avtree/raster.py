"""Raster containers, label codes, and bit-exact file I/O.

Arrays are indexed ``[row, column]``; pixel coordinates elsewhere in the
package are ``(x, y)`` with ``x`` the column. Multi-channel sample data is
planar: shape ``(channels, height, width)``, so one channel is a contiguous
2-D slice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    BadMagic,
    DimensionMismatch,
    IoFailure,
    NonFiniteSample,
    TrailingData,
    TruncatedFile,
)

AVPM_MAGIC = b"AVPM"
AVPM_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

BACKGROUND = 0
ARTERY = 1
VEIN = 2
OUTSIDE = 255


@dataclass(frozen=True)
class Raster2D:
    """Planar float32 image of one or more channels."""

    samples: np.ndarray  # (channels, height, width) float32

    def __post_init__(self):
        a = self.samples
        if a.ndim != 3:
            raise ValueError(f"samples must be (channels, height, width), got shape {a.shape}")
        c, h, w = a.shape
        if c < 1 or h < 1 or w < 1:
            raise ValueError(f"degenerate raster shape {a.shape}")
        if a.dtype != np.float32:
            raise ValueError(f"samples must be float32, got {a.dtype}")
        if not np.isfinite(a).all():
            raise NonFiniteSample("raster contains non-finite samples")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    def channel(self, i: int) -> np.ndarray:
        """Contiguous (height, width) view of one channel."""
        return self.samples[i]

    @classmethod
    def from_array(cls, a: np.ndarray) -> "Raster2D":
        """Build from (h, w) or (c, h, w) data, converting to float32."""
        a = np.asarray(a)
        if a.ndim == 2:
            a = a[None, :, :]
        return cls(np.ascontiguousarray(a, dtype=np.float32))


@dataclass(frozen=True)
class FovMask:
    """Boolean field-of-view mask; True inside the imaged retina."""

    inside: np.ndarray  # (height, width) bool

    def __post_init__(self):
        m = self.inside
        if m.ndim != 2 or m.dtype != np.bool_:
            raise ValueError("mask must be a 2-D boolean array")
        if not m.any():
            raise ValueError("mask has no inside pixels")

    @property
    def height(self) -> int:
        return self.inside.shape[0]

    @property
    def width(self) -> int:
        return self.inside.shape[1]

    def vertical_extent(self) -> int:
        """Pixel count of the vertical span covered by inside pixels."""
        rows = np.flatnonzero(self.inside.any(axis=1))
        return int(rows[-1] - rows[0] + 1)

    @classmethod
    def full(cls, height: int, width: int) -> "FovMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def disc(cls, height: int, width: int, cx: float, cy: float, radius: float) -> "FovMask":
        yy, xx = np.mgrid[0:height, 0:width]
        return cls((xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2)


@dataclass(frozen=True)
class ProbabilityTriplet:
    """Per-pixel class probabilities for background, artery, and vein."""

    p_back: np.ndarray
    p_artery: np.ndarray
    p_vein: np.ndarray

    SIMPLEX_TOL = 1e-3

    def __post_init__(self):
        shape = self.p_back.shape
        for name in ("p_back", "p_artery", "p_vein"):
            a = getattr(self, name)
            if a.ndim != 2 or a.dtype != np.float32:
                raise ValueError(f"{name} must be a 2-D float32 array")
            if a.shape != shape:
                raise DimensionMismatch("probability planes differ in shape")
            if not np.isfinite(a).all():
                raise NonFiniteSample(f"{name} contains non-finite values")
            if a.min() < 0.0 or a.max() > 1.0:
                raise ValueError(f"{name} outside [0, 1]")

    @property
    def height(self) -> int:
        return self.p_back.shape[0]

    @property
    def width(self) -> int:
        return self.p_back.shape[1]

    def check_simplex(self, mask: FovMask) -> None:
        """Verify probabilities sum to 1 (within tolerance) inside the FOV."""
        if mask.inside.shape != self.p_back.shape:
            raise DimensionMismatch("mask shape differs from probability planes")
        total = (
            self.p_back.astype(np.float64)
            + self.p_artery
            + self.p_vein
        )
        bad = np.abs(total - 1.0) > self.SIMPLEX_TOL
        if (bad & mask.inside).any():
            worst = float(np.abs(total[mask.inside] - 1.0).max())
            raise ValueError(f"probabilities leave the unit simplex inside FOV (max |sum-1| = {worst:.4g})")

    @classmethod
    def from_raster(cls, r: Raster2D) -> "ProbabilityTriplet":
        """Interpret a 3-channel raster as (background, artery, vein) planes."""
        if r.channels != 3:
            raise DimensionMismatch(f"expected 3 channels, got {r.channels}")
        return cls(r.channel(0).copy(), r.channel(1).copy(), r.channel(2).copy())

    def to_raster(self) -> Raster2D:
        return Raster2D(np.stack([self.p_back, self.p_artery, self.p_vein]).astype(np.float32))


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class codes: 0 background, 1 artery, 2 vein, 255 outside FOV."""

    codes: np.ndarray  # (height, width) uint8

    _VALID = frozenset({BACKGROUND, ARTERY, VEIN, OUTSIDE})

    def __post_init__(self):
        a = self.codes
        if a.ndim != 2 or a.dtype != np.uint8:
            raise ValueError("codes must be a 2-D uint8 array")
        present = set(np.unique(a).tolist())
        if not present <= self._VALID:
            raise ValueError(f"unknown label codes {sorted(present - self._VALID)}")

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    def vessel_mask(self) -> np.ndarray:
        """Boolean mask of pixels labeled artery or vein."""
        return (self.codes == ARTERY) | (self.codes == VEIN)

    def check_against(self, mask: FovMask) -> None:
        """Outside-FOV sentinel must appear exactly where the mask is outside."""
        if mask.inside.shape != self.codes.shape:
            raise DimensionMismatch("mask shape differs from label map")
        if ((self.codes == OUTSIDE) != ~mask.inside).any():
            raise ValueError("outside-FOV sentinel does not match the mask")


def read_avpm(path) -> Raster2D:
    """Read a planar float32 raster file; bit-exact inverse of write_avpm."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(data) < _HEADER.size:
        if data[: len(AVPM_MAGIC)] != AVPM_MAGIC[: len(data)]:
            raise BadMagic(f"{path}: not an AVPM file")
        raise TruncatedFile(f"{path}: header incomplete ({len(data)} bytes)")
    magic, version, width, height, channels = _HEADER.unpack_from(data)
    if magic != AVPM_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != AVPM_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if width < 1 or height < 1 or channels < 1:
        raise TruncatedFile(f"{path}: degenerate dimensions {width}x{height}x{channels}")
    need = width * height * channels * 4
    body = data[_HEADER.size :]
    if len(body) < need:
        raise TruncatedFile(f"{path}: expected {need} sample bytes, found {len(body)}")
    if len(body) > need:
        raise TrailingData(f"{path}: {len(body) - need} bytes past declared samples")
    samples = np.frombuffer(body, dtype="<f4").reshape(channels, height, width)
    samples = np.ascontiguousarray(samples).astype(np.float32, copy=False)
    if not np.isfinite(samples).all():
        raise NonFiniteSample(f"{path}: non-finite samples")
    return Raster2D(samples)


def write_avpm(r: Raster2D, path) -> None:
    """Write a raster in little-endian planar float32 layout."""
    header = _HEADER.pack(AVPM_MAGIC, AVPM_VERSION, r.width, r.height, r.channels)
    body = np.ascontiguousarray(r.samples, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(body)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def argmax_labels(p: ProbabilityTriplet, mask: FovMask) -> LabelMap:
    """Hard per-pixel classification.

    Ties resolve in favor of background, then artery, then vein; outside-FOV
    pixels get the sentinel code.
    """
    if mask.inside.shape != p.p_back.shape:
        raise DimensionMismatch("mask shape differs from probability planes")
    stacked = np.stack([p.p_back, p.p_artery, p.p_vein])
    codes = np.argmax(stacked, axis=0).astype(np.uint8)
    codes[~mask.inside] = OUTSIDE
    return LabelMap(codes)


def read_label_png(path) -> LabelMap:
    """Read a label map stored as 8-bit single-channel PNG."""
    try:
        img = Image.open(path)
        img.load()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if img.mode != "L":
        img = img.convert("L")
    return LabelMap(np.asarray(img, dtype=np.uint8))


def write_label_png(labels: LabelMap, path) -> None:
    try:
        Image.fromarray(labels.codes, mode="L").save(path, format="PNG")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def read_rgb_png(path) -> Raster2D:
    """Read an 8-bit RGB photograph into a 3-channel raster (values 0..255)."""
    try:
        img = Image.open(path)
        img.load()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if img.mode != "RGB":
        img = img.convert("RGB")
    arr = np.asarray(img, dtype=np.float32)  # (h, w, 3)
    return Raster2D(np.ascontiguousarray(arr.transpose(2, 0, 1)))


def read_fov_png(path) -> FovMask:
    """Read a FOV mask PNG; any nonzero pixel counts as inside."""
    try:
        img = Image.open(path)
        img.load()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if img.mode != "L":
        img = img.convert("L")
    return FovMask(np.asarray(img) > 0)


def write_fov_png(mask: FovMask, path) -> None:
    try:
        Image.fromarray(mask.inside.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
