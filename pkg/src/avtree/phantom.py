"""Synthetic vascular phantoms with known artery/vein ground truth.

Two binary trees of thick line segments are rasterized into a disc field
of view: arteries on the left half, veins on the right (unless crossings
are enabled). corrupt() then fabricates model-like probability maps with
a controlled fraction of score-flipped segments plus Gaussian noise, so
the propagation stage has known errors to fix.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.ndimage

from .errors import IoFailure, SpecInfeasible
from .raster import (
    ARTERY,
    BACKGROUND,
    OUTSIDE,
    VEIN,
    FovMask,
    LabelMap,
    ProbabilityTriplet,
    Raster2D,
    read_avpm,
    read_fov_png,
    read_label_png,
    read_rgb_png,
    write_avpm,
    write_fov_png,
    write_label_png,
)
from .avr import OpticDiscSpec

MIN_IMAGE_SIZE = 96

# background/vessel gray levels of the synthetic photograph
_GRAY_FIELD = 170
_GRAY_VESSEL = 60


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    depth: int = 3
    branch_length: tuple[float, float] = (34.0, 55.0)
    width_range: tuple[int, int] = (3, 6)
    image_size: int = 600
    flip_fraction: float = 0.0
    noise_sigma: float = 0.0
    score_margin: float = 0.3
    allow_crossings: bool = False

    def __post_init__(self):
        lo, hi = self.branch_length
        wlo, whi = self.width_range
        if not (0 < lo <= hi):
            raise ValueError("branch_length range must be positive and ordered")
        if not (1 <= wlo <= whi):
            raise ValueError("width_range must be ordered and >= 1")
        if not 0 <= self.flip_fraction <= 1:
            raise ValueError("flip_fraction must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 < self.score_margin <= 0.5:
            raise ValueError("score_margin must be in (0, 0.5]")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")


@dataclass(frozen=True)
class PhantomSegment:
    id: int
    label: int  # ARTERY or VEIN
    width: int
    start: tuple[float, float]
    end: tuple[float, float]
    pixels: np.ndarray  # (N, 2) int32 (x, y), pixels this segment painted first


@dataclass(frozen=True)
class PhantomBundle:
    spec: PhantomSpec
    truth: LabelMap
    fov: FovMask
    segments: tuple[PhantomSegment, ...]
    probs: ProbabilityTriplet
    od: OpticDiscSpec
    image: Raster2D  # synthetic gray photograph, 3 equal channels


def _disc_offsets(radius: float) -> np.ndarray:
    r = int(math.ceil(radius))
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dx * dx + dy * dy <= radius * radius
    return np.stack([dx[keep], dy[keep]], axis=1)


class _Painter:
    """Rasterizes thick segments; the first segment to touch a pixel owns it."""

    def __init__(self, size: int):
        self.owner = np.full((size, size), -1, dtype=np.int32)
        self.size = size

    def paint(self, seg_id: int, start, end, width: int) -> np.ndarray:
        x0, y0 = start
        x1, y1 = end
        length = math.hypot(x1 - x0, y1 - y0)
        steps = max(int(length * 2), 1)
        ts = np.linspace(0.0, 1.0, steps + 1)
        cx = x0 + ts * (x1 - x0)
        cy = y0 + ts * (y1 - y0)
        offsets = _disc_offsets(width / 2.0)
        xs = (np.round(cx).astype(np.int64)[:, None] + offsets[None, :, 0]).ravel()
        ys = (np.round(cy).astype(np.int64)[:, None] + offsets[None, :, 1]).ravel()
        inside = (xs >= 0) & (xs < self.size) & (ys >= 0) & (ys < self.size)
        xs, ys = xs[inside], ys[inside]
        free = self.owner[ys, xs] == -1
        self.owner[ys[free], xs[free]] = seg_id
        ys2, xs2 = np.nonzero(self.owner == seg_id)
        return np.stack([xs2, ys2], axis=1).astype(np.int32)


def _grow_tree(
    rng: np.random.Generator,
    painter: _Painter,
    spec: PhantomSpec,
    label: int,
    root: tuple[float, float],
    theta0: float,
    x_range: tuple[float, float],
    angle_sign: float,
    next_id: int,
    segments: list[PhantomSegment],
) -> int:
    size = spec.image_size
    cx = cy = size / 2.0
    fov_r = 0.48 * size
    y_lo, y_hi = 0.10 * size, 0.92 * size
    lo_len, hi_len = spec.branch_length
    w_lo, w_hi = spec.width_range

    def fits(x: float, y: float, width: float) -> bool:
        pad = width / 2.0 + 2.0
        if not (x_range[0] + pad <= x <= x_range[1] - pad):
            return False
        if not (y_lo <= y <= y_hi):
            return False
        return math.hypot(x - cx, y - cy) <= fov_r - pad

    def grow(start, theta, depth_left, level, seg_index) -> int:
        scale = 0.85**level
        width = max(w_lo, w_hi - level)
        length = rng.uniform(lo_len, hi_len) * scale
        placed = None
        for cand in (theta, -theta, 0.6 * theta, 0.0):
            for frac in (1.0, 0.7, 0.5):
                ln = length * frac
                ex = start[0] + ln * math.sin(cand)
                ey = start[1] - ln * math.cos(cand)
                if fits(ex, ey, width):
                    placed = (cand, (ex, ey))
                    break
            if placed:
                break
        if placed is None:
            return seg_index
        theta, end = placed
        pixels = painter.paint(seg_index, start, end, width)
        if pixels.shape[0] == 0:  # fully on pixels already owned upstream
            return seg_index
        segments.append(PhantomSegment(seg_index, label, width, tuple(start), end, pixels))
        seg_index += 1
        if depth_left > 0:
            deltas = (-rng.uniform(0.3, 0.65) * angle_sign, rng.uniform(0.3, 0.65) * angle_sign)
            for d in deltas:
                child = max(-0.9, min(0.9, theta + d))
                seg_index = grow(end, child, depth_left - 1, level + 1, seg_index)
        return seg_index

    if not fits(root[0], root[1], w_hi):
        raise SpecInfeasible("tree root does not fit the image")
    produced = grow(root, theta0, spec.depth, 0, next_id)
    if produced == next_id:
        raise SpecInfeasible("root segment does not fit the image")
    return produced


def generate(spec: PhantomSpec) -> tuple[LabelMap, FovMask, tuple[PhantomSegment, ...]]:
    """Render the two trees; deterministic for a given spec.

    The vein tree replays the artery tree's random draws with x mirrored,
    so both classes carry near-identical total vessel mass. Matching the
    anatomical balance of real vasculature keeps synthetic corruption
    experiments from being dominated by a lopsided class prior.
    """
    size = spec.image_size
    if size < MIN_IMAGE_SIZE:
        raise SpecInfeasible(f"image_size must be >= {MIN_IMAGE_SIZE}")
    rng = np.random.default_rng([spec.seed, 0])
    painter = _Painter(size)
    segments: list[PhantomSegment] = []

    if spec.allow_crossings:
        artery_x = (0.05 * size, 0.95 * size)
        artery_root_x = 0.30 * size
        theta = rng.uniform(-0.25, 0.25)
    else:
        artery_x = (0.02 * size, 0.34 * size)
        artery_root_x = 0.18 * size
        theta = rng.uniform(-0.45, -0.05)
    vein_x = (size - artery_x[1], size - artery_x[0])
    root_y = 0.80 * size

    grow_a = np.random.default_rng([spec.seed, 2])
    grow_v = np.random.default_rng([spec.seed, 2])
    n = _grow_tree(
        grow_a, painter, spec, ARTERY, (artery_root_x, root_y), theta, artery_x, 1.0, 0, segments
    )
    _grow_tree(
        grow_v, painter, spec, VEIN, (size - artery_root_x, root_y), -theta, vein_x, -1.0, n, segments
    )

    fov = FovMask.disc(size, size, size / 2.0, size / 2.0, 0.48 * size)
    codes = np.full((size, size), BACKGROUND, dtype=np.uint8)
    for seg in segments:
        codes[seg.pixels[:, 1], seg.pixels[:, 0]] = seg.label
    codes[~fov.inside] = OUTSIDE
    return LabelMap(codes), fov, tuple(segments)


def _noise_fields(
    rng: np.random.Generator, shape: tuple[int, ...], sigma: float
) -> np.ndarray:
    """Band-limited Gaussian random fields with per-plane std exactly sigma.

    Spatially correlated noise mimics model error: it shifts whole branch
    scores instead of sprinkling isolated false-vessel pixels, so the
    perturbation stresses score margins rather than inventing geometry.
    Structure wider than ~a tree is removed so the field has no class-level
    bias, only local disturbance.
    """
    h, w = shape[1], shape[2]
    corr = max(3.0, w / 80.0)
    step = max(1, int(corr / 1.5))
    grid = (h // step + 2, w // step + 2)
    fields = np.empty(shape)
    for c in range(shape[0]):
        white = rng.normal(0.0, 1.0, grid)
        smooth = scipy.ndimage.gaussian_filter(white, corr / step, mode="nearest")
        smooth -= scipy.ndimage.gaussian_filter(smooth, 8.0 * corr / step, mode="nearest")
        full = scipy.ndimage.zoom(smooth, step, order=1)[:h, :w]
        fields[c] = full * (sigma / max(full.std(), 1e-12))
    return fields


def _pick_flips(
    rng: np.random.Generator, segments: tuple[PhantomSegment, ...], n_flip: int
) -> np.ndarray:
    """Pick exactly n_flip segments, drawn as artery/vein rank pairs.

    Pairing keeps the corruption load balanced between the classes. An
    unbalanced draw can gut one tree's score mass and make the bundle
    unrecoverable regardless of classifier quality, which would test luck
    rather than propagation.
    """
    arteries = np.flatnonzero(np.array([s.label == ARTERY for s in segments]))
    veins = np.flatnonzero(np.array([s.label == VEIN for s in segments]))
    if arteries.size == 0 or veins.size == 0:
        pool = veins if arteries.size == 0 else arteries
        return rng.choice(pool, size=min(n_flip, pool.size), replace=False)

    def touching(ids: np.ndarray) -> bool:
        points: set[tuple[float, float]] = set()
        for k in ids:
            for pt in (segments[k].start, segments[k].end):
                if pt in points:
                    return True
                points.add(pt)
        return False

    k_pairs = min(n_flip // 2, arteries.size, veins.size)
    n_ranks = min(arteries.size, veins.size)
    chosen = None
    for _ in range(200):
        ranks = rng.choice(n_ranks, size=k_pairs, replace=False)
        cand = np.concatenate([arteries[ranks], veins[ranks]])
        remaining = n_flip - 2 * k_pairs
        if remaining:
            pool = np.setdiff1d(np.arange(len(segments)), cand)
            cand = np.concatenate([cand, rng.choice(pool, size=remaining, replace=False)])
        chosen = cand
        if not touching(cand):
            break
    return chosen


def corrupt(
    truth: LabelMap, spec: PhantomSpec, segments: tuple[PhantomSegment, ...]
) -> ProbabilityTriplet:
    """Model-like probabilities: the correct class gets 0.5 + score_margin.

    A ceil(flip_fraction * n) subset of segments has its artery/vein
    probabilities swapped; Gaussian noise is added and the simplex
    restored by renormalization. Outside the FOV everything is background.
    """
    h, w = truth.codes.shape
    rng = np.random.default_rng([spec.seed, 1])
    hi = 0.5 + spec.score_margin
    lo = (0.5 - spec.score_margin) / 2.0

    planes = {
        BACKGROUND: np.full((h, w), lo),
        ARTERY: np.full((h, w), lo),
        VEIN: np.full((h, w), lo),
    }
    inside = truth.codes != OUTSIDE
    planes[BACKGROUND][truth.codes == BACKGROUND] = hi
    planes[ARTERY][truth.codes == ARTERY] = hi
    planes[VEIN][truth.codes == VEIN] = hi

    n_flip = math.ceil(spec.flip_fraction * len(segments))
    if n_flip:
        for k in _pick_flips(rng, segments, n_flip):
            seg = segments[k]
            ys, xs = seg.pixels[:, 1], seg.pixels[:, 0]
            pa = planes[ARTERY][ys, xs].copy()
            planes[ARTERY][ys, xs] = planes[VEIN][ys, xs]
            planes[VEIN][ys, xs] = pa

    stack = np.stack([planes[BACKGROUND], planes[ARTERY], planes[VEIN]])
    if spec.noise_sigma > 0:
        stack = stack + _noise_fields(rng, stack.shape, spec.noise_sigma)
        stack = np.maximum(stack, 1e-6)
        stack /= stack.sum(axis=0, keepdims=True)
    stack[0, ~inside] = 1.0
    stack[1:, ~inside] = 0.0
    stack = stack.astype(np.float32)
    return ProbabilityTriplet(stack[0], stack[1], stack[2])


def default_optic_disc(spec: PhantomSpec) -> OpticDiscSpec:
    """Disc placed between the trees so both classes reach the annulus."""
    size = spec.image_size
    return OpticDiscSpec(cx=0.5 * size, cy=0.55 * size, dd=0.22 * size)


def synth_photo(truth: LabelMap) -> Raster2D:
    """Flat gray field with darker vessels, as a stand-in photograph."""
    gray = np.full(truth.codes.shape, float(_GRAY_FIELD), dtype=np.float32)
    gray[truth.vessel_mask()] = _GRAY_VESSEL
    gray[truth.codes == OUTSIDE] = 0.0
    return Raster2D(np.stack([gray, gray, gray]))


def make_bundle(spec: PhantomSpec) -> PhantomBundle:
    truth, fov, segments = generate(spec)
    probs = corrupt(truth, spec, segments)
    return PhantomBundle(
        spec=spec,
        truth=truth,
        fov=fov,
        segments=segments,
        probs=probs,
        od=default_optic_disc(spec),
        image=synth_photo(truth),
    )


def branch_accuracy(labels: LabelMap, segments: tuple[PhantomSegment, ...]) -> float:
    """Fraction of segments whose pixels' majority A/V vote is correct."""
    if not segments:
        raise ValueError("no segments to score")
    other = {ARTERY: VEIN, VEIN: ARTERY}
    correct = 0
    for seg in segments:
        codes = labels.codes[seg.pixels[:, 1], seg.pixels[:, 0]]
        right = int((codes == seg.label).sum())
        wrong = int((codes == other[seg.label]).sum())
        if right > wrong:
            correct += 1
    return correct / len(segments)


def save_bundle(bundle: PhantomBundle, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from PIL import Image

    arr = np.clip(bundle.image.samples, 0, 255).astype(np.uint8).transpose(1, 2, 0)
    try:
        Image.fromarray(arr, mode="RGB").save(out / "image.png", format="PNG")
    except OSError as e:
        raise IoFailure(f"cannot write {out / 'image.png'}: {e}") from e
    write_label_png(bundle.truth, out / "truth.png")
    write_fov_png(bundle.fov, out / "fov.png")
    write_avpm(bundle.probs.to_raster(), out / "probs.avpm")
    bundle.od.to_json(out / "od.json")
    meta = {
        "spec": {
            "seed": bundle.spec.seed,
            "depth": bundle.spec.depth,
            "branch_length": list(bundle.spec.branch_length),
            "width_range": list(bundle.spec.width_range),
            "image_size": bundle.spec.image_size,
            "flip_fraction": bundle.spec.flip_fraction,
            "noise_sigma": bundle.spec.noise_sigma,
            "score_margin": bundle.spec.score_margin,
            "allow_crossings": bundle.spec.allow_crossings,
        },
        "segments": [
            {
                "id": seg.id,
                "label": seg.label,
                "width": seg.width,
                "start": list(seg.start),
                "end": list(seg.end),
                "pixels": seg.pixels.tolist(),
            }
            for seg in bundle.segments
        ],
    }
    try:
        with open(out / "segments.json", "w", encoding="utf-8") as f:
            json.dump(meta, f)
    except OSError as e:
        raise IoFailure(f"cannot write {out / 'segments.json'}: {e}") from e


def load_bundle(in_dir) -> PhantomBundle:
    src = Path(in_dir)
    try:
        with open(src / "segments.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read {src / 'segments.json'}: {e}") from e
    d = meta["spec"]
    spec = PhantomSpec(
        seed=d["seed"],
        depth=d["depth"],
        branch_length=tuple(d["branch_length"]),
        width_range=tuple(d["width_range"]),
        image_size=d["image_size"],
        flip_fraction=d["flip_fraction"],
        noise_sigma=d["noise_sigma"],
        score_margin=d["score_margin"],
        allow_crossings=d["allow_crossings"],
    )
    segments = tuple(
        PhantomSegment(
            id=s["id"],
            label=s["label"],
            width=s["width"],
            start=tuple(s["start"]),
            end=tuple(s["end"]),
            pixels=np.array(s["pixels"], dtype=np.int32).reshape(-1, 2),
        )
        for s in meta["segments"]
    )
    truth = read_label_png(src / "truth.png")
    fov = read_fov_png(src / "fov.png")
    probs = ProbabilityTriplet.from_raster(read_avpm(src / "probs.avpm"))
    od = OpticDiscSpec.from_json(src / "od.json")
    image = read_rgb_png(src / "image.png")
    return PhantomBundle(spec, truth, fov, segments, probs, od, image)
