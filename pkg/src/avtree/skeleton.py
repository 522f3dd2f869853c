"""Skeletonization and decomposition of the vessel mask into branches.

The vessel segmentation is thinned to a unit-width skeleton, junction
pixels (three or more skeleton neighbors) are removed, and what remains
splits into junction-free segments: the branches of the vascular tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels

_NEIGHBOR_KERNEL = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=np.uint8)

# branch-end orientation is fit through at most this many pixels
ORIENTATION_SPAN = 5


@dataclass(frozen=True)
class Skeleton:
    """Unit-width binary skeleton; thinning it again changes nothing."""

    on: np.ndarray  # (height, width) bool

    def __post_init__(self):
        if self.on.ndim != 2 or self.on.dtype != np.bool_:
            raise ValueError("skeleton must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.on.shape[0]

    @property
    def width(self) -> int:
        return self.on.shape[1]


@dataclass(frozen=True)
class Branch:
    """One junction-free skeleton segment.

    pixels are ordered and 8-connected; endpoints are the first and last
    entries. Orientations live in [0, pi) since a branch has no direction.
    """

    id: int
    pixels: np.ndarray  # (N, 2) int32, columns (x, y), ordered
    alpha1: float
    alpha2: float
    degenerate: bool = False

    def __post_init__(self):
        if self.pixels.ndim != 2 or self.pixels.shape[1] != 2 or self.pixels.shape[0] < 1:
            raise ValueError("pixels must be a non-empty (N, 2) array")

    @property
    def count(self) -> int:
        return self.pixels.shape[0]

    @property
    def endpoint1(self) -> tuple[int, int]:
        return int(self.pixels[0, 0]), int(self.pixels[0, 1])

    @property
    def endpoint2(self) -> tuple[int, int]:
        return int(self.pixels[-1, 0]), int(self.pixels[-1, 1])


def zhang_suen_thin(vessel_mask: np.ndarray) -> Skeleton:
    """Thin a boolean vessel mask to a unit-width skeleton."""
    return Skeleton(_kernels.zhang_suen(vessel_mask))


def neighbor_counts(on: np.ndarray) -> np.ndarray:
    """Number of 8-neighbors that are skeleton pixels, per pixel."""
    return ndimage.convolve(on.astype(np.uint8), _NEIGHBOR_KERNEL, mode="constant", cval=0)


def detect_junctions(s: Skeleton) -> set[tuple[int, int]]:
    """Skeleton pixels where three or more branches meet."""
    counts = neighbor_counts(s.on)
    ys, xs = np.nonzero(s.on & (counts >= 3))
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def _fit_orientation(points: np.ndarray) -> float:
    """Angle in [0, pi) of the least-squares line through a point set.

    Principal direction of the centered coordinates; handles vertical
    runs that a y-on-x regression cannot.
    """
    pts = points.astype(np.float64)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    # 2x2 symmetric eigenproblem, largest eigenvector
    t = cov[0, 0] + cov[1, 1]
    d = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    lam = t / 2.0 + math.sqrt(max(t * t / 4.0 - d, 0.0))
    vx = cov[0, 1]
    vy = lam - cov[0, 0]
    if abs(vx) < 1e-12 and abs(vy) < 1e-12:
        vx = lam - cov[1, 1]
        vy = cov[1, 0]
    if abs(vx) < 1e-12 and abs(vy) < 1e-12:
        return 0.0
    angle = math.atan2(vy, vx) % math.pi
    if angle >= math.pi:  # guard for atan2(±0.0, -1.0) folding
        angle = 0.0
    return angle


def _trace(component: set[tuple[int, int]]) -> list[tuple[int, int]]:
    """Order a degree-<=2 pixel set into an 8-connected walk.

    Starts at the endpoint (or, for cycles, the pixel) with smallest
    (y, x); at forks the smaller (y, x) neighbor wins, for determinism.
    """

    def neighbors(p):
        x, y = p
        out = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                q = (x + dx, y + dy)
                if q in component:
                    out.append(q)
        return out

    by_scan = sorted(component, key=lambda p: (p[1], p[0]))
    endpoints = [p for p in by_scan if len(neighbors(p)) <= 1]
    start = endpoints[0] if endpoints else by_scan[0]

    order = [start]
    seen = {start}
    cur = start
    while True:
        nxt = [q for q in neighbors(cur) if q not in seen]
        if not nxt:
            break
        cur = min(nxt, key=lambda p: (p[1], p[0]))
        order.append(cur)
        seen.add(cur)
    # a mid-path start leaves the other arm unvisited; walk it backwards
    cur = start
    while len(seen) < len(component):
        nxt = [q for q in neighbors(cur) if q not in seen]
        if not nxt:
            break
        cur = min(nxt, key=lambda p: (p[1], p[0]))
        order.insert(0, cur)
        seen.add(cur)
    return order


def extract_branches(s: Skeleton) -> list[Branch]:
    """Cut the skeleton at junctions and trace each remaining component.

    Junction pixels belong to no branch; branch pixels plus junction
    pixels partition the skeleton.
    """
    junctions = detect_junctions(s)
    pruned = s.on.copy()
    for x, y in junctions:
        pruned[y, x] = False
    labels, n = _kernels.label_components(pruned)
    branches: list[Branch] = []
    for cid in range(1, n + 1):
        ys, xs = np.nonzero(labels == cid)
        component = {(int(x), int(y)) for x, y in zip(xs, ys)}
        order = _trace(component)
        pixels = np.array(order, dtype=np.int32)
        if len(order) == 1:
            branches.append(Branch(cid - 1, pixels, 0.0, 0.0, degenerate=True))
            continue
        span = min(ORIENTATION_SPAN, len(order))
        alpha1 = _fit_orientation(pixels[:span])
        alpha2 = _fit_orientation(pixels[-span:])
        branches.append(Branch(cid - 1, pixels, alpha1, alpha2))
    return branches
