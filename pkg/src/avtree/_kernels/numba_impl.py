"""Numba backend for the hot raster kernels.

Each function mirrors numpy_impl exactly; the dispatcher in __init__ picks
one backend per process. Median filtering gets a sliding-histogram fast
path for 8-bit-valued inputs (illumination correction runs on raw photo
channels) and a partition-based path for arbitrary float data.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _hist_median(hist, target):
    acc = 0
    for b in range(256):
        acc += hist[b]
        if acc >= target:
            return np.float32(b)
    return np.float32(255)


@njit(cache=True)
def _median_hist(img, k, out):
    h, w = img.shape
    r = k // 2
    target = (k * k) // 2 + 1
    hist = np.zeros(256, dtype=np.int32)
    for y in range(h):
        for b in range(256):
            hist[b] = 0
        for dy in range(-r, r + 1):
            yy = min(max(y + dy, 0), h - 1)
            for dx in range(-r, r + 1):
                xx = min(max(dx, 0), w - 1)
                hist[img[yy, xx]] += 1
        out[y, 0] = _hist_median(hist, target)
        for x in range(1, w):
            xo = min(max(x - 1 - r, 0), w - 1)
            xn = min(max(x + r, 0), w - 1)
            for dy in range(-r, r + 1):
                yy = min(max(y + dy, 0), h - 1)
                hist[img[yy, xo]] -= 1
                hist[img[yy, xn]] += 1
            out[y, x] = _hist_median(hist, target)


@njit(cache=True)
def _median_partition(img, k, out):
    h, w = img.shape
    r = k // 2
    n = k * k
    mid = n // 2
    buf = np.empty(n, dtype=np.float32)
    for y in range(h):
        for x in range(w):
            i = 0
            for dy in range(-r, r + 1):
                yy = min(max(y + dy, 0), h - 1)
                for dx in range(-r, r + 1):
                    xx = min(max(x + dx, 0), w - 1)
                    buf[i] = img[yy, xx]
                    i += 1
            out[y, x] = np.partition(buf, mid)[mid]


def median_filter(image: np.ndarray, kernel: int) -> np.ndarray:
    image = image.astype(np.float32, copy=False)
    out = np.empty(image.shape, dtype=np.float32)
    lo = float(image.min())
    hi = float(image.max())
    if lo >= 0.0 and hi <= 255.0 and np.all(image == np.floor(image)):
        _median_hist(image.astype(np.uint8), kernel, out)
    else:
        _median_partition(np.ascontiguousarray(image), kernel, out)
    return out


@njit(cache=True)
def _thin(img, marks):
    h, w = img.shape
    changed = True
    while changed:
        changed = False
        for step in range(2):
            n = 0
            for y in range(1, h - 1):
                for x in range(1, w - 1):
                    if img[y, x] == 0:
                        continue
                    p2 = img[y - 1, x]
                    p3 = img[y - 1, x + 1]
                    p4 = img[y, x + 1]
                    p5 = img[y + 1, x + 1]
                    p6 = img[y + 1, x]
                    p7 = img[y + 1, x - 1]
                    p8 = img[y, x - 1]
                    p9 = img[y - 1, x - 1]
                    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
                    if b < 2 or b > 6:
                        continue
                    a = 0
                    if p2 == 0 and p3 == 1:
                        a += 1
                    if p3 == 0 and p4 == 1:
                        a += 1
                    if p4 == 0 and p5 == 1:
                        a += 1
                    if p5 == 0 and p6 == 1:
                        a += 1
                    if p6 == 0 and p7 == 1:
                        a += 1
                    if p7 == 0 and p8 == 1:
                        a += 1
                    if p8 == 0 and p9 == 1:
                        a += 1
                    if p9 == 0 and p2 == 1:
                        a += 1
                    if a != 1:
                        continue
                    if step == 0:
                        if p2 * p4 * p6 != 0 or p4 * p6 * p8 != 0:
                            continue
                    else:
                        if p2 * p4 * p8 != 0 or p2 * p6 * p8 != 0:
                            continue
                    marks[y, x] = 1
                    n += 1
            if n > 0:
                changed = True
                for y in range(1, h - 1):
                    for x in range(1, w - 1):
                        if marks[y, x] == 1:
                            img[y, x] = 0
                            marks[y, x] = 0


def zhang_suen(mask: np.ndarray) -> np.ndarray:
    img = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=np.uint8)
    img[1:-1, 1:-1] = mask
    marks = np.zeros_like(img)
    _thin(img, marks)
    return img[1:-1, 1:-1].astype(np.bool_)


@njit(cache=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True)
def _label8(mask, labels, parent):
    h, w = mask.shape
    nxt = 1
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            a = labels[y - 1, x - 1] if (y > 0 and x > 0) else 0
            b = labels[y - 1, x] if y > 0 else 0
            c = labels[y - 1, x + 1] if (y > 0 and x + 1 < w) else 0
            d = labels[y, x - 1] if x > 0 else 0
            if a == 0 and b == 0 and c == 0 and d == 0:
                parent[nxt] = nxt
                labels[y, x] = nxt
                nxt += 1
                continue
            rmin = 0
            for v in (a, b, c, d):
                if v != 0:
                    rv = _find(parent, v)
                    if rmin == 0 or rv < rmin:
                        rmin = rv
            for v in (a, b, c, d):
                if v != 0:
                    rv = _find(parent, v)
                    if rv != rmin:
                        parent[rv] = rmin
            labels[y, x] = rmin
    # renumber roots by first occurrence in raster order
    remap = np.zeros(nxt, dtype=np.int32)
    count = 0
    for y in range(h):
        for x in range(w):
            v = labels[y, x]
            if v == 0:
                continue
            r = _find(parent, v)
            if remap[r] == 0:
                count += 1
                remap[r] = count
            labels[y, x] = remap[r]
    return count


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    m = mask.astype(np.uint8)
    labels = np.zeros(m.shape, dtype=np.int32)
    parent = np.zeros(m.size // 2 + 2, dtype=np.int32)
    n = _label8(m, labels, parent)
    return labels, int(n)
