import numpy as np
import pytest

from avtree.errors import DegenerateClass, DimensionMismatch
from avtree.metrics import (
    STRATA_BOUNDS,
    av_sensitivity_specificity,
    roc_auc,
    stratify_by_diameter,
    three_class_accuracy,
    vessel_probability,
)
from avtree.raster import ARTERY, BACKGROUND, VEIN, FovMask, LabelMap, ProbabilityTriplet

from oracles import mann_whitney_auc


def _as_plane(values):
    return np.asarray(values, dtype=np.float64).reshape(1, -1)


def test_roc_auc_matches_mann_whitney():
    rng = np.random.default_rng(31)
    for trial in range(40):
        n = int(rng.integers(10, 200))
        scores = rng.choice([0.0, 0.2, 0.2, 0.5, 0.9, 1.3], size=n)  # heavy ties
        scores += rng.normal(0, 0.2, size=n) * (rng.uniform(size=n) < 0.5)
        positive = rng.uniform(size=n) < 0.5
        if positive.all() or not positive.any():
            continue
        curve, auc = roc_auc(_as_plane(scores), positive.reshape(1, -1), FovMask.full(1, n))
        assert abs(auc - mann_whitney_auc(scores, positive)) < 1e-9
        assert curve.thresholds[0] == -np.inf and curve.thresholds[-1] == np.inf


def test_roc_auc_perfect_and_constant():
    pos = np.array([[5.0, 6.0, 7.0, 1.0, 2.0]])
    truth = np.array([[True, True, True, False, False]])
    mask = FovMask.full(1, 5)
    _, auc = roc_auc(pos, truth, mask)
    assert auc == 1.0
    _, auc = roc_auc(np.ones((1, 5)), truth, mask)
    assert auc == 0.5


def test_roc_auc_needs_both_classes():
    mask = FovMask.full(1, 4)
    with pytest.raises(DegenerateClass):
        roc_auc(np.ones((1, 4)), np.ones((1, 4), dtype=bool), mask)


def test_vessel_probability_ratio():
    p = ProbabilityTriplet(
        np.array([[0.5, 0.2]], dtype=np.float32),
        np.array([[0.25, 0.7]], dtype=np.float32),
        np.array([[0.25, 0.1]], dtype=np.float32),
    )
    v = vessel_probability(p)
    assert abs(v[0, 0] - 0.5) < 1e-6
    assert abs(v[0, 1] - 3.5) < 1e-5


def test_three_class_accuracy_counts_inside_only():
    pred = LabelMap(np.array([[1, 2, 0, 255]], dtype=np.uint8))
    truth = LabelMap(np.array([[1, 1, 0, 255]], dtype=np.uint8))
    mask = FovMask(np.array([[True, True, True, False]]))
    assert three_class_accuracy(pred, truth, mask) == pytest.approx(2.0 / 3.0)
    with pytest.raises(DimensionMismatch):
        three_class_accuracy(pred, truth, FovMask.full(2, 4))


def test_av_rates_over_truth_vessels():
    truth = LabelMap(np.array([[1, 1, 2, 2, 0]], dtype=np.uint8))
    pred = LabelMap(np.array([[1, 2, 2, 1, 1]], dtype=np.uint8))
    mask = FovMask.full(1, 5)
    sens, spec = av_sensitivity_specificity(pred, truth, mask)
    assert sens == 0.5  # one of two artery pixels recovered
    assert spec == 0.5
    only_art = LabelMap(np.array([[1, 1, 0, 0, 0]], dtype=np.uint8))
    with pytest.raises(DegenerateClass):
        av_sensitivity_specificity(pred, only_art, mask)


def test_stratify_by_diameter_buckets():
    truth = np.zeros((3, 12), dtype=np.uint8)
    truth[1, 0:4] = ARTERY
    truth[1, 4:8] = VEIN
    truth[1, 8:10] = ARTERY
    diam = np.zeros((3, 12))
    diam[1, 0:4] = 1.0
    diam[1, 4:8] = 3.0
    diam[1, 8:10] = 7.0
    pred = truth.copy()
    pred[1, 0] = VEIN  # one thin artery pixel wrong
    out = stratify_by_diameter(diam, LabelMap(pred), LabelMap(truth), FovMask.full(3, 12))
    assert len(out) == len(STRATA_BOUNDS)
    thin, mid, thick = out
    assert thin.n_pixels == 4 and mid.n_pixels == 4 and thick.n_pixels == 2
    assert thin.accuracy == 0.75 and mid.accuracy == 1.0 and thick.accuracy == 1.0
    assert thin.fraction == 0.4
    assert np.isnan(thin.specificity)  # no thin veins in truth
    assert np.isnan(mid.sensitivity)
    assert thick.sensitivity == 1.0


def test_stratify_empty_stratum_reports_nan():
    truth = np.zeros((2, 4), dtype=np.uint8)
    truth[0, 0] = ARTERY
    truth[0, 1] = VEIN
    diam = np.full((2, 4), 1.0)
    out = stratify_by_diameter(diam, LabelMap(truth), LabelMap(truth), FovMask.full(2, 4))
    assert out[0].n_pixels == 2
    assert out[1].empty and np.isnan(out[1].accuracy)
    assert out[2].empty
