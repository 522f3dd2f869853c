"""Training patch selection: vessel-centered windows plus near-vessel background."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .avpm import ARTERY, VEIN
from .errors import ShapeError


@dataclass(frozen=True)
class PatchSet:
    """Windows cut from one labeled image, with their center pixels."""

    images: np.ndarray  # (n, channels, patch, patch) float32
    labels: np.ndarray  # (n, patch, patch) uint8
    centers: np.ndarray  # (n, 2) int32 as (y, x)

    def __len__(self) -> int:
        return len(self.images)


def _empty(channels: int, patch: int) -> PatchSet:
    return PatchSet(
        images=np.zeros((0, channels, patch, patch), dtype=np.float32),
        labels=np.zeros((0, patch, patch), dtype=np.uint8),
        centers=np.zeros((0, 2), dtype=np.int32),
    )


def sample_patches(
    image: np.ndarray,
    truth: np.ndarray,
    count: int,
    patch: int,
    rng: np.random.Generator,
    near_distance: float = 20.0,
) -> PatchSet:
    """Cut `count` windows whose centers sit on vessels or on background near them.

    Alternates exact vessel centers with jittered background centers;
    every center lies within `near_distance` of a vessel pixel, so far
    background never enters the training set.  An image with no vessel
    pixels yields an empty set.
    """
    if image.ndim != 3 or image.shape[1:] != truth.shape:
        raise ShapeError(f"stack {image.shape} does not cover labels {truth.shape}")
    h, w = truth.shape
    if patch < 1 or patch > min(h, w):
        raise ShapeError(f"patch {patch} does not fit in {h}x{w}")
    channels = image.shape[0]
    vessel = (truth == ARTERY) | (truth == VEIN)
    lo = patch // 2
    hi_y = h - patch + lo  # last center row keeping the window inside
    hi_x = w - patch + lo
    inside = np.zeros_like(vessel)
    inside[lo : hi_y + 1, lo : hi_x + 1] = True
    vy, vx = np.nonzero(vessel & inside)
    if count < 1 or len(vy) == 0:
        return _empty(channels, patch)
    near = ndimage.distance_transform_edt(~vessel) <= near_distance

    centers = np.empty((count, 2), dtype=np.int32)
    jitter = max(1, int(near_distance))
    for i in range(count):
        k = rng.integers(len(vy))
        cy, cx = int(vy[k]), int(vx[k])
        if i % 2 == 1:
            # walk off the vessel onto nearby background; keep the vessel
            # center when the walk cannot find any
            for _ in range(16):
                ty = int(np.clip(cy + rng.integers(-jitter, jitter + 1), lo, hi_y))
                tx = int(np.clip(cx + rng.integers(-jitter, jitter + 1), lo, hi_x))
                if not vessel[ty, tx] and near[ty, tx]:
                    cy, cx = ty, tx
                    break
        centers[i] = cy, cx

    images = np.empty((count, channels, patch, patch), dtype=np.float32)
    labels = np.empty((count, patch, patch), dtype=np.uint8)
    for i, (cy, cx) in enumerate(centers):
        ys, xs = cy - lo, cx - lo
        images[i] = image[:, ys : ys + patch, xs : xs + patch]
        labels[i] = truth[ys : ys + patch, xs : xs + patch]
    return PatchSet(images=images, labels=labels, centers=centers)
