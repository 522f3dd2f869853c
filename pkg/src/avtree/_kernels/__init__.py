"""Backend dispatch for the raster kernels.

The environment variable AVTREE_BACKEND selects the implementation:
"numba" (JIT), "numpy" (scipy/numpy reference), or "auto" (numba when
importable, else numpy). The variable is read on every call so tests can
flip backends at runtime; the auto resolution is cached.
"""

from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

from ..errors import ConfigError, EvenKernel

BACKEND_ENV = "AVTREE_BACKEND"

_auto = None


def _resolve():
    choice = os.environ.get(BACKEND_ENV, "auto").strip().lower()
    if choice == "numpy":
        from . import numpy_impl

        return numpy_impl
    if choice == "numba":
        from . import numba_impl

        return numba_impl
    if choice != "auto":
        raise ConfigError(f"{BACKEND_ENV} must be auto, numba, or numpy, got {choice!r}")
    global _auto
    if _auto is None:
        try:
            from . import numba_impl as mod
        except ImportError:
            from . import numpy_impl as mod
        _auto = mod
    return _auto


def active_backend() -> str:
    """Name of the backend the next kernel call will use."""
    return _resolve().__name__.rsplit(".", 1)[-1].removesuffix("_impl")


def median_filter(image: np.ndarray, kernel: int) -> np.ndarray:
    """Square-window median with replicated borders."""
    if kernel < 1 or kernel % 2 == 0:
        raise EvenKernel(f"median window must be odd and >= 1, got {kernel}")
    if image.ndim != 2:
        raise ValueError("median_filter expects a 2-D array")
    image = image.astype(np.float32, copy=False)
    if kernel == 1:
        return image.copy()
    return _resolve().median_filter(image, kernel)


def zhang_suen(mask: np.ndarray) -> np.ndarray:
    """Thin a boolean mask to a unit-width skeleton (out-of-image = background).

    Preserves the 8-connectivity component count of the input: parallel
    deletion can annihilate a small symmetric component outright (its last
    remnant is an isolated 2x2 square, whose four pixels all satisfy both
    sub-iteration conditions at once), so any input component left with no
    skeleton pixels is restored as its innermost pixel.
    """
    if mask.ndim != 2:
        raise ValueError("zhang_suen expects a 2-D array")
    mask = mask.astype(bool)
    impl = _resolve()
    skel = impl.zhang_suen(mask)
    labels, count = impl.label_components(mask)
    if count:
        survived = np.zeros(count + 1, dtype=bool)
        survived[labels[skel]] = True
        gone = np.flatnonzero(~survived[1:]) + 1
        if gone.size:
            # max distance-to-background pixel, ties broken in raster order
            depth = ndimage.distance_transform_edt(mask).ravel()
            flat_labels = labels.ravel()
            for cid in gone:
                pixels = np.flatnonzero(flat_labels == cid)
                best = pixels[np.argmax(depth[pixels])]
                skel[np.unravel_index(best, skel.shape)] = True
    return skel


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels (int32, background 0), first-occurrence order."""
    if mask.ndim != 2:
        raise ValueError("label_components expects a 2-D array")
    return _resolve().label_components(mask.astype(bool))
