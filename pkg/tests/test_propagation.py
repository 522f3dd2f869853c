import math

import numpy as np
import pytest

from avtree.errors import EmptyBranch, UnassignedVesselPixel
from avtree.graph import GraphParams, ScoredBranch
from avtree.propagation import (
    assign_vessel_pixels,
    attenuation,
    downward_pass,
    propagate,
    relabel,
    upward_pass,
)
from avtree.raster import ARTERY, BACKGROUND, VEIN, LabelMap
from avtree.skeleton import Branch

from oracles import aggregate_ref, tree_from_edges


def _random_tree(rng, n):
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((u, v, float(rng.uniform(0.5, 40.0))))
    return edges


def test_attenuation_basics():
    assert attenuation(0.0, 10.0) == 1.0
    assert abs(attenuation(10.0, 10.0) - math.exp(-1.0)) < 1e-15
    assert 0.0 < attenuation(1000.0, 10.0) < 1.0


def test_two_node_chain_by_hand():
    p = GraphParams(sigma_prop=10.0)
    tree = tree_from_edges(2, [(0, 1, 5.0)], root=0)
    s = np.array([0.4, -0.2])
    a = math.exp(-0.5)
    s_up = upward_pass(tree, s, p)
    assert abs(s_up[1] - (-0.2)) < 1e-15
    assert abs(s_up[0] - (0.4 + a * -0.2)) < 1e-15
    s_fin = downward_pass(tree, s_up, p)
    assert abs(s_fin[0] - (0.4 + a * -0.2)) < 1e-15
    assert abs(s_fin[1] - (-0.2 + a * 0.4)) < 1e-15


def test_three_node_chain_by_hand():
    p = GraphParams(sigma_prop=10.0)
    tree = tree_from_edges(3, [(0, 1, 10.0), (1, 2, 10.0)], root=0)
    s = np.array([0.3, 0.1, -0.4])
    a = math.exp(-1.0)
    s_fin = downward_pass(tree, upward_pass(tree, s, p), p)
    # middle node hears both ends once, ends hear across two hops
    assert abs(s_fin[1] - (0.1 + a * 0.3 + a * -0.4)) < 1e-12
    assert abs(s_fin[0] - (0.3 + a * 0.1 + a * a * -0.4)) < 1e-12
    assert abs(s_fin[2] - (-0.4 + a * 0.1 + a * a * 0.3)) < 1e-12


def test_two_pass_matches_path_product_oracle():
    p = GraphParams(sigma_prop=10.0)
    rng = np.random.default_rng(21)
    for trial in range(20):
        n = int(rng.integers(2, 60))
        edges = _random_tree(rng, n)
        s = rng.uniform(-0.5, 0.5, size=n)
        tree = tree_from_edges(n, edges, root=int(rng.integers(0, n)))
        s_fin = downward_pass(tree, upward_pass(tree, s, p), p)
        want = aggregate_ref(n, edges, s, p.sigma_prop)
        assert np.allclose(s_fin, want, rtol=1e-9, atol=1e-12)


def test_root_choice_does_not_matter():
    p = GraphParams(sigma_prop=10.0)
    rng = np.random.default_rng(22)
    for trial in range(8):
        n = int(rng.integers(3, 40))
        edges = _random_tree(rng, n)
        s = rng.uniform(-0.5, 0.5, size=n)
        results = []
        for root in rng.integers(0, n, size=3):
            tree = tree_from_edges(n, edges, root=int(root))
            results.append(downward_pass(tree, upward_pass(tree, s, p), p))
        for other in results[1:]:
            assert np.allclose(results[0], other, rtol=0, atol=1e-12)


def test_two_pass_is_linear_in_scores():
    p = GraphParams(sigma_prop=10.0)
    rng = np.random.default_rng(23)
    n = 30
    edges = _random_tree(rng, n)
    tree = tree_from_edges(n, edges, root=0)

    def run(s):
        return downward_pass(tree, upward_pass(tree, s, p), p)

    s1 = rng.uniform(-0.5, 0.5, size=n)
    s2 = rng.uniform(-0.5, 0.5, size=n)
    lhs = run(0.3 * s1 + 0.7 * s2)
    rhs = 0.3 * run(s1) + 0.7 * run(s2)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12)


def _chain_branches(scores, gap=5, length=20):
    branches = []
    x = 0
    for i, s in enumerate(scores):
        xs = np.arange(x, x + length, dtype=np.int32)
        pixels = np.stack([xs, np.full_like(xs, 10)], axis=1)
        branches.append(ScoredBranch(Branch(i, pixels, 0.0, 0.0), s))
        x += length + gap
    return branches


def test_flipped_branch_outvoted_by_neighbors():
    # one wrong-sign branch inside a strongly scored run flips back
    p = GraphParams()
    scores = [0.4, 0.4, -0.35, 0.4, 0.4]
    final, trace = propagate(_chain_branches(scores), p, iterations=2)
    assert (final > 0).all()
    assert len(trace) == 2
    assert trace[0].iteration == 0 and trace[1].iteration == 1


def test_propagate_clamps_between_iterations():
    p = GraphParams()
    scores = [0.5, 0.5, 0.5]
    final, trace = propagate(_chain_branches(scores), p, iterations=3)
    for st in trace[1:]:
        assert np.abs(st.s_init).max() <= 0.5 + 1e-12
    assert np.abs(final).max() <= 0.5 + 1e-12


def test_propagate_argument_validation():
    p = GraphParams()
    with pytest.raises(EmptyBranch):
        propagate([], p)
    with pytest.raises(ValueError):
        propagate(_chain_branches([0.1]), p, iterations=0)


def test_assign_vessel_pixels_nearest_branch():
    vessel = np.zeros((9, 30), dtype=bool)
    vessel[3:6, 1:12] = True
    vessel[3:6, 18:29] = True
    left = Branch(0, np.stack([np.arange(1, 12, dtype=np.int32), np.full(11, 4, np.int32)], axis=1), 0.0, 0.0)
    right = Branch(1, np.stack([np.arange(18, 29, dtype=np.int32), np.full(11, 4, np.int32)], axis=1), 0.0, 0.0)
    owner = assign_vessel_pixels(vessel, [left, right])
    assert (owner[vessel & (np.arange(30) < 15)] == 0).all()
    assert (owner[vessel & (np.arange(30) >= 15)] == 1).all()
    assert (owner[~vessel] == -1).all()


def test_relabel_sign_convention():
    codes = np.zeros((5, 12), dtype=np.uint8)
    codes[2, 1:4] = ARTERY
    codes[2, 6:9] = VEIN
    labels = LabelMap(codes)
    vessel = labels.vessel_mask()
    b0 = Branch(0, np.stack([np.arange(1, 4, dtype=np.int32), np.full(3, 2, np.int32)], axis=1), 0.0, 0.0)
    b1 = Branch(1, np.stack([np.arange(6, 9, dtype=np.int32), np.full(3, 2, np.int32)], axis=1), 0.0, 0.0)
    assignment = assign_vessel_pixels(vessel, [b0, b1])
    # negative flips the artery run to vein; exact zero means vein too
    out = relabel(labels, [b0, b1], np.array([-0.2, 0.0]), assignment)
    assert (out.codes[2, 1:4] == VEIN).all()
    assert (out.codes[2, 6:9] == VEIN).all()
    assert (out.codes[0] == BACKGROUND).all()
    out2 = relabel(labels, [b0, b1], np.array([0.01, 0.3]), assignment)
    assert (out2.codes[2, 1:4] == ARTERY).all()
    assert (out2.codes[2, 6:9] == ARTERY).all()


def test_relabel_rejects_bad_assignment():
    codes = np.zeros((4, 4), dtype=np.uint8)
    codes[1, 1] = ARTERY
    labels = LabelMap(codes)
    b = Branch(0, np.array([[2, 2]], dtype=np.int32), 0.0, 0.0)
    bad = np.full((4, 4), -1, dtype=np.int32)
    with pytest.raises(UnassignedVesselPixel):
        relabel(labels, [b], np.array([0.1]), bad)
