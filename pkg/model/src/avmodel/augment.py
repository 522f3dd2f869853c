"""Patch augmentation: principal-component intensity shifts and 2-D rotation."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import ShapeError


def patch_eigenvectors(patches: np.ndarray, count: int = 5) -> np.ndarray:
    """Top principal directions of the flattened, centered patch stack.

    Rows of the result are orthonormal and patch-shaped when reshaped.
    """
    if patches.ndim != 4:
        raise ShapeError(f"expected (n, channels, patch, patch), got {patches.shape}")
    flat = patches.reshape(len(patches), -1).astype(np.float64)
    if len(flat) < count:
        raise ShapeError(f"need at least {count} patches, got {len(flat)}")
    flat = flat - flat.mean(axis=0)
    _, _, vt = np.linalg.svd(flat, full_matrices=False)
    return vt[:count].astype(np.float32)


def pca_augment(
    patch: np.ndarray,
    eigvecs: np.ndarray,
    magnitude: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Add a random fraction of one randomly chosen principal direction."""
    if eigvecs.shape[1] != patch.size:
        raise ShapeError(f"eigenvector length {eigvecs.shape[1]} does not match patch {patch.shape}")
    if magnitude == 0.0:
        return patch.copy()
    k = int(rng.integers(len(eigvecs)))
    alpha = float(rng.uniform(-magnitude, magnitude))
    return (patch + alpha * eigvecs[k].reshape(patch.shape)).astype(patch.dtype)


def rotate_patch(patch: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate all channels about the patch center, bilinear, same size."""
    if patch.ndim != 3:
        raise ShapeError(f"expected (channels, patch, patch), got {patch.shape}")
    out = ndimage.rotate(patch, degrees, axes=(1, 2), reshape=False, order=1, mode="nearest")
    return out.astype(patch.dtype)
