import math

import numpy as np
import pytest

from avtree.errors import SpecInfeasible
from avtree.phantom import (
    PhantomSpec,
    branch_accuracy,
    corrupt,
    default_optic_disc,
    generate,
    load_bundle,
    make_bundle,
    save_bundle,
)
from avtree.raster import ARTERY, BACKGROUND, OUTSIDE, VEIN, FovMask, argmax_labels


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(flip_fraction=1.5)
    with pytest.raises(ValueError):
        PhantomSpec(noise_sigma=-0.1)
    with pytest.raises(ValueError):
        PhantomSpec(score_margin=0.0)
    with pytest.raises(ValueError):
        PhantomSpec(width_range=(0, 3))
    with pytest.raises(SpecInfeasible):
        generate(PhantomSpec(image_size=50))


def test_depth_zero_is_two_straight_segments():
    truth, fov, segments = generate(PhantomSpec(seed=3, depth=0))
    assert len(segments) == 2
    labels = sorted(s.label for s in segments)
    assert labels == [ARTERY, VEIN]
    for s in segments:
        assert s.pixels.shape[0] > 0


def test_same_seed_same_bundle():
    spec = PhantomSpec(seed=9, flip_fraction=0.2, noise_sigma=0.1)
    a = make_bundle(spec)
    b = make_bundle(spec)
    assert np.array_equal(a.truth.codes, b.truth.codes)
    assert np.array_equal(a.probs.p_artery, b.probs.p_artery)
    assert np.array_equal(a.probs.p_vein, b.probs.p_vein)
    assert len(a.segments) == len(b.segments)
    for sa, sb in zip(a.segments, b.segments):
        assert sa.label == sb.label and np.array_equal(sa.pixels, sb.pixels)
    c = make_bundle(PhantomSpec(seed=10, flip_fraction=0.2, noise_sigma=0.1))
    assert not np.array_equal(a.truth.codes, c.truth.codes)


def test_segments_partition_vessel_pixels():
    truth, fov, segments = generate(PhantomSpec(seed=5))
    seen = np.zeros(truth.codes.shape, dtype=np.int32)
    for s in segments:
        seen[s.pixels[:, 1], s.pixels[:, 0]] += 1
        codes = truth.codes[s.pixels[:, 1], s.pixels[:, 0]]
        assert (codes == s.label).all()
    vessel = truth.vessel_mask()
    assert (seen[vessel] == 1).all()
    assert (seen[~vessel] == 0).all()


def test_clean_probabilities_argmax_recovers_truth():
    spec = PhantomSpec(seed=1, flip_fraction=0.0, noise_sigma=0.0)
    truth, fov, segments = generate(spec)
    probs = corrupt(truth, spec, segments)
    probs.check_simplex(fov)
    labels = argmax_labels(probs, fov)
    assert np.array_equal(labels.codes, truth.codes)
    assert branch_accuracy(labels, segments) == 1.0


def test_full_flip_swaps_every_segment():
    spec = PhantomSpec(seed=2, flip_fraction=1.0, noise_sigma=0.0)
    truth, fov, segments = generate(spec)
    labels = argmax_labels(corrupt(truth, spec, segments), fov)
    swap = {ARTERY: VEIN, VEIN: ARTERY}
    for s in segments:
        got = labels.codes[s.pixels[:, 1], s.pixels[:, 0]]
        assert (got == swap[s.label]).all()
    assert branch_accuracy(labels, segments) == 0.0


def test_flip_count_is_ceiling_of_fraction():
    spec = PhantomSpec(seed=4, flip_fraction=0.2, noise_sigma=0.0)
    truth, fov, segments = generate(spec)
    labels = argmax_labels(corrupt(truth, spec, segments), fov)
    wrong = 0
    swap = {ARTERY: VEIN, VEIN: ARTERY}
    for s in segments:
        got = labels.codes[s.pixels[:, 1], s.pixels[:, 0]]
        if (got == swap[s.label]).all():
            wrong += 1
        else:
            assert (got == s.label).all()
    assert wrong == math.ceil(0.2 * len(segments))


def test_noise_keeps_simplex_and_fov():
    spec = PhantomSpec(seed=6, flip_fraction=0.1, noise_sigma=0.1)
    truth, fov, segments = generate(spec)
    probs = corrupt(truth, spec, segments)
    probs.check_simplex(fov)
    outside = ~fov.inside
    assert (probs.p_back[outside] == 1.0).all()
    assert (probs.p_artery[outside] == 0.0).all()
    assert (truth.codes[outside] == OUTSIDE).all()


def test_trees_stay_in_their_halves_without_crossings():
    truth, fov, segments = generate(PhantomSpec(seed=7, allow_crossings=False))
    size = truth.codes.shape[1]
    artery_x = np.nonzero((truth.codes == ARTERY).any(axis=0))[0]
    vein_x = np.nonzero((truth.codes == VEIN).any(axis=0))[0]
    assert artery_x.max() < size / 2 < vein_x.min()


def test_crossings_flag_releases_the_split():
    spec = PhantomSpec(seed=11, allow_crossings=True, depth=4)
    truth, fov, segments = generate(spec)
    assert truth.vessel_mask().any()
    labels = sorted(set(s.label for s in segments))
    assert labels == [ARTERY, VEIN]


def test_branch_accuracy_majority_vote():
    truth, fov, segments = generate(PhantomSpec(seed=8))
    codes = truth.codes.copy()
    seg = segments[0]
    swap = {ARTERY: VEIN, VEIN: ARTERY}
    codes[seg.pixels[:, 1], seg.pixels[:, 0]] = swap[seg.label]
    from avtree.raster import LabelMap

    acc = branch_accuracy(LabelMap(codes), segments)
    assert acc == (len(segments) - 1) / len(segments)


def test_optic_disc_sits_between_trees():
    spec = PhantomSpec(seed=0)
    truth, fov, segments = generate(spec)
    od = default_optic_disc(spec)
    assert fov.inside[int(od.cy), int(od.cx)]
    inner = 0.5 * od.dd
    outer = 2.0 * od.dd
    xs = np.concatenate([s.pixels[:, 0] for s in segments])
    ys = np.concatenate([s.pixels[:, 1] for s in segments])
    d = np.hypot(xs - od.cx, ys - od.cy)
    in_annulus = (d >= inner) & (d <= outer)
    labs = np.concatenate([np.full(s.pixels.shape[0], s.label) for s in segments])
    assert (labs[in_annulus] == ARTERY).any()
    assert (labs[in_annulus] == VEIN).any()


def test_bundle_save_load_round_trip(tmp_path):
    spec = PhantomSpec(seed=12, flip_fraction=0.2, noise_sigma=0.05)
    bundle = make_bundle(spec)
    save_bundle(bundle, tmp_path / "b")
    back = load_bundle(tmp_path / "b")
    assert back.spec == spec
    assert np.array_equal(back.truth.codes, bundle.truth.codes)
    assert np.array_equal(back.fov.inside, bundle.fov.inside)
    assert np.array_equal(
        back.probs.p_artery.view(np.uint32), bundle.probs.p_artery.view(np.uint32)
    )
    assert len(back.segments) == len(bundle.segments)
    for sa, sb in zip(back.segments, bundle.segments):
        assert (sa.id, sa.label, sa.width) == (sb.id, sb.label, sb.width)
        assert np.array_equal(sa.pixels, sb.pixels)
    assert (back.od.cx, back.od.cy, back.od.dd) == (bundle.od.cx, bundle.od.cy, bundle.od.dd)


def test_photo_shows_dark_vessels():
    bundle = make_bundle(PhantomSpec(seed=13))
    gray = bundle.image.channel(0)
    vessel = bundle.truth.vessel_mask()
    inside_back = (bundle.truth.codes == BACKGROUND)
    assert gray[vessel].max() < gray[inside_back].min()
