"""Vessel diameters and the arterio-venous ratio measures.

Widths come from the distance transform at skeleton pixels. Local AVR is
the CRAE/CRVE ratio of the six widest arteries and veins measured in an
annulus around the optic disc; Global AVR compares pixel-weighted mean
diameters over the whole field of view.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    EmptyList,
    IoFailure,
    MissingClass,
    MissingClassInAnnulus,
    SkeletonOutsideMask,
)
from .raster import ARTERY, VEIN
from .skeleton import Branch, Skeleton

# annulus around the optic disc where local AVR is measured, in disc diameters
ANNULUS_INNER_DD = 0.5
ANNULUS_OUTER_DD = 2.0

MAX_VESSELS_PER_CLASS = 6


@dataclass(frozen=True)
class OpticDiscSpec:
    cx: float
    cy: float
    dd: float  # disc diameter in pixels

    def __post_init__(self):
        if not self.dd > 0:
            raise ValueError("disc diameter must be positive")

    @classmethod
    def from_json(cls, path) -> "OpticDiscSpec":
        try:
            with open(path, "r", encoding="utf-8") as f:
                d = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise IoFailure(f"cannot read optic disc spec {path}: {e}") from e
        return cls(float(d["cx"]), float(d["cy"]), float(d["dd"]))

    def to_json(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump({"cx": self.cx, "cy": self.cy, "dd": self.dd}, f)
        except OSError as e:
            raise IoFailure(f"cannot write optic disc spec {path}: {e}") from e


@dataclass(frozen=True)
class KnudtsonConstants:
    c_artery: float = 0.88
    c_vein: float = 0.95

    def __post_init__(self):
        if not (0 < self.c_artery <= 1 and 0 < self.c_vein <= 1):
            raise ValueError("pairing constants must be in (0, 1]")


@dataclass(frozen=True)
class VesselSegmentMeasure:
    branch_id: int
    label: int  # ARTERY or VEIN
    mean_diameter: float
    point: tuple[float, float]  # representative (x, y): midpoint of the measured run
    n_pixels: int

    def __post_init__(self):
        if self.label not in (ARTERY, VEIN):
            raise ValueError("segment label must be artery or vein")
        if not self.mean_diameter > 0:
            raise ValueError("diameter must be positive")
        if self.n_pixels < 1:
            raise ValueError("a measured segment covers at least one pixel")


def diameter_map(vessel_mask: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    """Per-pixel vessel width 2*EDT - 1 at skeleton pixels, 0 elsewhere."""
    if skeleton.on.shape != vessel_mask.shape:
        raise SkeletonOutsideMask("skeleton shape differs from mask")
    if (skeleton.on & ~vessel_mask).any():
        raise SkeletonOutsideMask("skeleton pixel outside the vessel mask")
    edt = ndimage.distance_transform_edt(vessel_mask)
    out = np.zeros(vessel_mask.shape, dtype=np.float64)
    out[skeleton.on] = 2.0 * edt[skeleton.on] - 1.0
    return out


def spread_diameters(vessel_mask: np.ndarray, skeleton: Skeleton, diam: np.ndarray) -> np.ndarray:
    """Give every vessel pixel the diameter of its nearest skeleton pixel."""
    if not skeleton.on.any():
        return np.zeros(vessel_mask.shape, dtype=np.float64)
    _, (iy, ix) = ndimage.distance_transform_edt(~skeleton.on, return_indices=True)
    out = diam[iy, ix]
    out[~vessel_mask] = 0.0
    return out


def _annulus_filter(pixels: np.ndarray, od: OpticDiscSpec) -> np.ndarray:
    d = np.hypot(pixels[:, 0] - od.cx, pixels[:, 1] - od.cy)
    return (d >= ANNULUS_INNER_DD * od.dd) & (d <= ANNULUS_OUTER_DD * od.dd)


def measure_segments(
    branches: list[Branch],
    branch_labels: np.ndarray,
    diam: np.ndarray,
    od: OpticDiscSpec | None = None,
) -> list[VesselSegmentMeasure]:
    """Mean diameter per branch; with an optic disc, only the annulus part.

    Branches crossing the annulus boundary contribute their inside run
    only; branches entirely outside (or with no positive width) yield no
    measure.
    """
    out: list[VesselSegmentMeasure] = []
    for b in branches:
        label = int(branch_labels[b.id])
        if label not in (ARTERY, VEIN):
            continue
        pixels = b.pixels
        if od is not None:
            pixels = pixels[_annulus_filter(pixels, od)]
        if pixels.shape[0] == 0:
            continue
        widths = diam[pixels[:, 1], pixels[:, 0]]
        keep = widths > 0
        pixels = pixels[keep]
        widths = widths[keep]
        if pixels.shape[0] == 0:
            continue
        mid = pixels[pixels.shape[0] // 2]
        out.append(
            VesselSegmentMeasure(
                branch_id=b.id,
                label=label,
                mean_diameter=float(widths.mean()),
                point=(float(mid[0]), float(mid[1])),
                n_pixels=int(pixels.shape[0]),
            )
        )
    return out


def annulus_select(
    measures: list[VesselSegmentMeasure], od: OpticDiscSpec
) -> tuple[list[VesselSegmentMeasure], list[VesselSegmentMeasure]]:
    """Keep annulus segments, the six widest per class, widest first."""
    inner = ANNULUS_INNER_DD * od.dd
    outer = ANNULUS_OUTER_DD * od.dd

    def select(label: int) -> list[VesselSegmentMeasure]:
        kept = []
        for m in measures:
            if m.label != label:
                continue
            d = math.hypot(m.point[0] - od.cx, m.point[1] - od.cy)
            if inner <= d <= outer:
                kept.append(m)
        kept.sort(key=lambda m: (-m.mean_diameter, m.branch_id))
        return kept[:MAX_VESSELS_PER_CLASS]

    return select(ARTERY), select(VEIN)


def knudtson_equivalent(widths: list[float], c: float) -> float:
    """Collapse up to six widths into one by iterative pairing.

    Each round pairs the widest with the narrowest as c*sqrt(w1^2 + w2^2);
    an odd count carries its median to the next round.
    """
    if not widths:
        raise EmptyList("no widths to combine")
    vals = sorted(float(w) for w in widths)
    while len(vals) > 1:
        n = len(vals)
        nxt = [c * math.hypot(vals[n - 1 - i], vals[i]) for i in range(n // 2)]
        if n % 2 == 1:
            nxt.append(vals[n // 2])
        vals = sorted(nxt)
    return vals[0]


def local_avr(
    arteries: list[VesselSegmentMeasure],
    veins: list[VesselSegmentMeasure],
    k: KnudtsonConstants,
) -> float:
    """CRAE over CRVE for the selected annulus vessels."""
    if not arteries or not veins:
        raise MissingClassInAnnulus("both classes must appear in the annulus")
    crae = knudtson_equivalent([m.mean_diameter for m in arteries], k.c_artery)
    crve = knudtson_equivalent([m.mean_diameter for m in veins], k.c_vein)
    return crae / crve


def global_avr(measures: list[VesselSegmentMeasure]) -> float:
    """Pixel-weighted mean artery diameter over mean vein diameter."""
    a_sum = a_n = v_sum = v_n = 0.0
    for m in measures:
        if m.label == ARTERY:
            a_sum += m.mean_diameter * m.n_pixels
            a_n += m.n_pixels
        else:
            v_sum += m.mean_diameter * m.n_pixels
            v_n += m.n_pixels
    if a_n == 0 or v_n == 0:
        raise MissingClass("need at least one artery and one vein segment")
    return (a_sum / a_n) / (v_sum / v_n)
