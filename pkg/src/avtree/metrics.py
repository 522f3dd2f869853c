"""Evaluation: ROC/AUC sweeps, 3-class accuracy, A/V rates, diameter strata.

Positive detections are artery pixels, negatives are veins; the A/V rates
are evaluated on ground-truth vessel pixels only, optionally restricted to
the truth centerline for datasets annotated that way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClass, DimensionMismatch
from .raster import ARTERY, VEIN, FovMask, LabelMap, ProbabilityTriplet
from .skeleton import zhang_suen_thin

EPS_DIV = 1e-6

# diameter strata bounds in pixels: [lo, hi) with an unbounded last stratum
STRATA_BOUNDS = ((0.0, 2.0), (2.0, 4.0), (4.0, np.inf))


@dataclass(frozen=True)
class RocCurve:
    """TPR/TNR over a threshold sweep; sentinels cover the two endpoints."""

    thresholds: np.ndarray  # ascending, first -inf, last +inf
    tpr: np.ndarray
    tnr: np.ndarray

    def __post_init__(self):
        if not (len(self.thresholds) == len(self.tpr) == len(self.tnr)):
            raise ValueError("curve arrays must have equal length")
        if np.any(np.diff(self.thresholds) < 0):
            raise ValueError("thresholds must be ascending")


@dataclass(frozen=True)
class StratumMetrics:
    lo: float
    hi: float
    n_pixels: int
    fraction: float
    sensitivity: float  # nan when the stratum is empty or one-class
    specificity: float
    accuracy: float

    @property
    def empty(self) -> bool:
        return self.n_pixels == 0


def vessel_probability(p: ProbabilityTriplet) -> np.ndarray:
    """Vesselness score max(p_artery, p_vein) / p_back; may exceed 1."""
    num = np.maximum(p.p_artery, p.p_vein).astype(np.float64)
    return num / np.maximum(p.p_back, EPS_DIV)


def roc_auc(
    scores: np.ndarray, positives: np.ndarray, mask: FovMask
) -> tuple[RocCurve, float]:
    """Threshold sweep over all observed score values, trapezoidal area.

    A pixel is called positive when its score >= threshold, so -inf gives
    (TPR, FPR) = (1, 1) and +inf gives (0, 0).
    """
    if scores.shape != mask.inside.shape or positives.shape != mask.inside.shape:
        raise DimensionMismatch("scores/positives shape differs from mask")
    s = scores[mask.inside].astype(np.float64)
    y = positives[mask.inside].astype(bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass("ROC needs at least one positive and one negative")
    thresholds = np.concatenate(([-np.inf], np.unique(s), [np.inf]))
    pos_sorted = np.sort(s[y])
    neg_sorted = np.sort(s[~y])
    tp = n_pos - np.searchsorted(pos_sorted, thresholds, side="left")
    fp = n_neg - np.searchsorted(neg_sorted, thresholds, side="left")
    tpr = tp / n_pos
    fpr = fp / n_neg
    auc = float(np.trapezoid(tpr[::-1], fpr[::-1]))
    return RocCurve(thresholds, tpr, 1.0 - fpr), auc


def three_class_accuracy(pred: LabelMap, truth: LabelMap, mask: FovMask) -> float:
    """Fraction of inside-FOV pixels whose class matches the truth."""
    if pred.codes.shape != truth.codes.shape or pred.codes.shape != mask.inside.shape:
        raise DimensionMismatch("label maps and mask must share a shape")
    inside = mask.inside
    return float((pred.codes[inside] == truth.codes[inside]).mean())


def av_sensitivity_specificity(
    pred: LabelMap, truth: LabelMap, mask: FovMask, centerline_only: bool = False
) -> tuple[float, float]:
    """Artery recall and vein recall over ground-truth vessel pixels."""
    if pred.codes.shape != truth.codes.shape or pred.codes.shape != mask.inside.shape:
        raise DimensionMismatch("label maps and mask must share a shape")
    eval_mask = mask.inside.copy()
    if centerline_only:
        eval_mask &= zhang_suen_thin(truth.vessel_mask()).on
    artery = (truth.codes == ARTERY) & eval_mask
    vein = (truth.codes == VEIN) & eval_mask
    if not artery.any() or not vein.any():
        raise DegenerateClass("truth must contain both artery and vein pixels")
    sens = float((pred.codes[artery] == ARTERY).mean())
    spec = float((pred.codes[vein] == VEIN).mean())
    return sens, spec


def stratify_by_diameter(
    diameters: np.ndarray,
    pred: LabelMap,
    truth: LabelMap,
    mask: FovMask,
) -> list[StratumMetrics]:
    """Per-stratum A/V rates and accuracy over truth vessel pixels.

    diameters holds the per-pixel truth vessel width (any value outside
    the truth vessel mask is ignored). Empty or one-class strata are
    reported with nan metrics rather than raised.
    """
    if diameters.shape != truth.codes.shape:
        raise DimensionMismatch("diameter map shape differs from labels")
    vessel = truth.vessel_mask() & mask.inside
    total = int(vessel.sum())
    out: list[StratumMetrics] = []
    for lo, hi in STRATA_BOUNDS:
        sel = vessel & (diameters >= lo) & (diameters < hi)
        n = int(sel.sum())
        if n == 0:
            out.append(StratumMetrics(lo, hi, 0, 0.0, np.nan, np.nan, np.nan))
            continue
        acc = float((pred.codes[sel] == truth.codes[sel]).mean())
        artery = sel & (truth.codes == ARTERY)
        vein = sel & (truth.codes == VEIN)
        sens = float((pred.codes[artery] == ARTERY).mean()) if artery.any() else np.nan
        spec = float((pred.codes[vein] == VEIN).mean()) if vein.any() else np.nan
        frac = n / total if total else 0.0
        out.append(StratumMetrics(lo, hi, n, frac, sens, spec, acc))
    return out
