"""Pure numpy/scipy backend for the hot raster kernels.

Reference implementations: always available, no JIT warm-up. The numba
backend must produce bit-identical results; tests compare the two.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_STRUCT8 = np.ones((3, 3), dtype=bool)


def median_filter(image: np.ndarray, kernel: int) -> np.ndarray:
    out = ndimage.median_filter(image.astype(np.float32, copy=False), size=kernel, mode="nearest")
    return out.astype(np.float32, copy=False)


def zhang_suen(mask: np.ndarray) -> np.ndarray:
    """Thin a binary mask to a unit-width skeleton.

    Classic two-subiteration scheme: each subiteration marks deletable
    pixels against the frozen image, then deletes them all at once.
    Neighbors outside the image count as background.
    """
    img = np.pad(mask.astype(np.uint8), 1)
    center = img[1:-1, 1:-1]
    while True:
        deleted = 0
        for step in (0, 1):
            p2 = img[:-2, 1:-1]
            p3 = img[:-2, 2:]
            p4 = img[1:-1, 2:]
            p5 = img[2:, 2:]
            p6 = img[2:, 1:-1]
            p7 = img[2:, :-2]
            p8 = img[1:-1, :-2]
            p9 = img[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9)
            b = np.zeros(center.shape, dtype=np.uint8)
            for q in ring:
                b += q
            a = np.zeros(center.shape, dtype=np.uint8)
            for k in range(8):
                a += ((ring[k] == 0) & (ring[(k + 1) % 8] == 1)).astype(np.uint8)
            if step == 0:
                c1 = p2 * p4 * p6 == 0
                c2 = p4 * p6 * p8 == 0
            else:
                c1 = p2 * p4 * p8 == 0
                c2 = p2 * p6 * p8 == 0
            kill = (center == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            n = int(kill.sum())
            if n:
                center[kill] = 0
                deleted += n
        if deleted == 0:
            break
    return center.astype(np.bool_)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels, numbered by first raster-scan occurrence."""
    labels, n = ndimage.label(mask, structure=_STRUCT8)
    labels = labels.astype(np.int32, copy=False)
    if n == 0:
        return labels, 0
    flat = labels.ravel()
    vals, first = np.unique(flat, return_index=True)
    keep = vals != 0
    vals = vals[keep]
    first = first[keep]
    order = np.argsort(first, kind="stable")
    lut = np.zeros(n + 1, dtype=np.int32)
    lut[vals[order]] = np.arange(1, n + 1, dtype=np.int32)
    return lut[flat].reshape(mask.shape), int(n)
