"""Illumination correction and six-channel input assembly.

The background illumination of a fundus photograph varies smoothly; a
large median filter estimates it, and each channel is recentered to 128
with a fixed standard deviation over the field of view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatch
from .raster import FovMask, Raster2D


@dataclass(frozen=True)
class NormalizationParams:
    sigma0: float = 50.0
    kernel_fraction: float = 0.1
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not 0 < self.kernel_fraction < 1:
            raise ValueError("kernel_fraction must be in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def median_filter(channel: Raster2D, kernel_px: int) -> Raster2D:
    """Square-window median of a single-channel raster, borders replicated."""
    if channel.channels != 1:
        raise DimensionMismatch("median_filter expects a single-channel raster")
    return Raster2D(_kernels.median_filter(channel.channel(0), kernel_px)[None])


def background_kernel(params: NormalizationParams, mask: FovMask) -> int:
    """Median window size: a fraction of the vertical FOV extent, made odd."""
    k = int(math.floor(params.kernel_fraction * mask.vertical_extent() + 0.5))
    if k < 1:
        k = 1
    if k % 2 == 0:
        k += 1
    return k


def illumination_normalize(
    channel: Raster2D, med: Raster2D, params: NormalizationParams, mask: FovMask
) -> Raster2D:
    """Recenter a channel: sigma0 * (I - I_med) / max(std, epsilon) + 128.

    The standard deviation is taken over inside-FOV pixels only; the black
    surround would otherwise bias it.
    """
    if channel.channels != 1 or med.channels != 1:
        raise DimensionMismatch("expected single-channel rasters")
    if channel.samples.shape != med.samples.shape:
        raise DimensionMismatch("channel and median raster differ in shape")
    if (channel.height, channel.width) != (mask.height, mask.width):
        raise DimensionMismatch("mask shape differs from channel")
    residual = channel.channel(0).astype(np.float64) - med.channel(0)
    sigma = float(residual[mask.inside].std())
    scale = params.sigma0 / max(sigma, params.epsilon)
    out = residual * scale + 128.0
    return Raster2D(out.astype(np.float32)[None])


def assemble_six_channel(rgb: Raster2D, params: NormalizationParams, mask: FovMask) -> Raster2D:
    """Stack the raw RGB channels with their normalized counterparts."""
    if rgb.channels != 3:
        raise DimensionMismatch(f"expected a 3-channel raster, got {rgb.channels}")
    if (rgb.height, rgb.width) != (mask.height, mask.width):
        raise DimensionMismatch("mask shape differs from image")
    kernel = background_kernel(params, mask)
    planes = [rgb.channel(i).copy() for i in range(3)]
    for i in range(3):
        ch = Raster2D(rgb.channel(i)[None])
        med = median_filter(ch, kernel)
        planes.append(illumination_normalize(ch, med, params, mask).channel(0))
    return Raster2D(np.stack(planes).astype(np.float32))
