import math

import numpy as np
import pytest

from avtree.errors import DisconnectedGraph, EmptyBranch
from avtree.graph import (
    GraphParams,
    ScoredBranch,
    VesselGraph,
    WeightedEdge,
    branch_score,
    build_graph,
    label_cost,
    likelihood_map,
    position_cost,
    prim_mst,
)
from avtree.raster import ProbabilityTriplet
from avtree.skeleton import Branch

from oracles import kruskal_mst


def _branch(bid, p1, p2, a1=0.0, a2=0.0):
    pixels = np.array([p1, p2], dtype=np.int32)
    return Branch(bid, pixels, a1, a2)


def _line_branch(bid, x0, y0, length):
    xs = np.arange(x0, x0 + length, dtype=np.int32)
    pixels = np.stack([xs, np.full_like(xs, y0)], axis=1)
    return Branch(bid, pixels, 0.0, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        GraphParams(sigma_pos=0.0)
    with pytest.raises(ValueError):
        GraphParams(lambda_angle=-1.0)
    with pytest.raises(ValueError):
        GraphParams(max_link_distance=0.0)
    p = GraphParams()
    assert (p.sigma_pos, p.sigma_lab, p.lambda_angle, p.sigma_prop) == (100.0, 0.1, 1.0, 10.0)
    assert p.max_link_distance == 50.0


def test_scored_branch_range():
    b = _branch(0, (0, 0), (1, 0))
    ScoredBranch(b, 0.5)
    ScoredBranch(b, -0.5)
    with pytest.raises(ValueError):
        ScoredBranch(b, 0.6)


def test_likelihood_map_values():
    pa = np.array([[0.6, 0.0, 0.2]], dtype=np.float32)
    pv = np.array([[0.2, 0.0, 0.6]], dtype=np.float32)
    pb = np.array([[0.2, 1.0, 0.2]], dtype=np.float32)
    s = likelihood_map(ProbabilityTriplet(pb, pa, pv))
    assert abs(s[0, 0] - 0.75) < 1e-6  # float32 planes limit the precision
    assert s[0, 1] == 0.5  # no vessel mass: ambivalent
    assert abs(s[0, 2] - 0.25) < 1e-6


def test_branch_score_is_recentred_mean():
    b = _line_branch(0, 2, 3, 4)
    s_map = np.zeros((10, 10))
    s_map[3, 2:6] = [0.9, 0.8, 0.9, 0.8]
    assert abs(branch_score(b, s_map) - (0.85 - 0.5)) < 1e-12


def test_position_cost_picks_best_endpoint_pairing():
    p = GraphParams(sigma_pos=10.0, lambda_angle=1.0)
    a = _branch(0, (0, 0), (10, 0), a1=0.0, a2=0.0)
    b = _branch(1, (13, 4), (30, 4), a1=math.pi / 2, a2=0.0)
    # endpoint2 of a to endpoint1 of b: dist 5, angles 0 vs pi/2
    # endpoint2 of a to endpoint2 of b: dist 20.4, angles equal
    best = min(5.0 / 10.0 + math.pi / 2, math.hypot(20, 4) / 10.0)
    assert abs(position_cost(a, b, p) - best) < 1e-12
    assert abs(position_cost(b, a, p) - best) < 1e-12


def test_angle_difference_wraps_at_pi():
    p = GraphParams(sigma_pos=1e9, lambda_angle=1.0)
    a = _branch(0, (0, 0), (1, 0), a1=0.05, a2=0.05)
    b = _branch(1, (0, 1), (1, 1), a1=math.pi - 0.05, a2=math.pi - 0.05)
    # orientations are undirected: 0.05 and pi-0.05 differ by 0.1, not pi-0.1
    assert abs(position_cost(a, b, p) - 0.1) < 1e-9


def test_label_cost():
    p = GraphParams(sigma_lab=0.1)
    a = ScoredBranch(_branch(0, (0, 0), (1, 0)), 0.4)
    b = ScoredBranch(_branch(1, (5, 0), (6, 0)), -0.1)
    assert abs(label_cost(a, b, p) - 5.0) < 1e-12
    assert abs(label_cost(b, a, p) - 5.0) < 1e-12


def test_build_graph_links_within_range_only():
    p = GraphParams(max_link_distance=50.0)
    near = [
        ScoredBranch(_line_branch(0, 0, 0, 5), 0.1),
        ScoredBranch(_line_branch(1, 20, 0, 5), 0.1),
        ScoredBranch(_line_branch(2, 200, 0, 5), 0.1),
    ]
    g = build_graph(near, p)
    pairs = {(e.i, e.j) for e in g.edges}
    assert (0, 1) in pairs
    # far node is linked only through the connectivity fallback
    far_edges = [e for e in g.edges if 2 in (e.i, e.j)]
    assert len(far_edges) == 1


def test_build_graph_connects_components():
    p = GraphParams()
    branches = [
        ScoredBranch(_line_branch(0, 0, 0, 5), 0.2),
        ScoredBranch(_line_branch(1, 0, 300, 5), 0.2),
        ScoredBranch(_line_branch(2, 300, 300, 5), -0.3),
    ]
    g = build_graph(branches, p)
    tree = prim_mst(g)  # raises DisconnectedGraph if the fallback failed
    assert tree.n_nodes == 3


def test_build_graph_single_and_empty():
    p = GraphParams()
    one = build_graph([ScoredBranch(_line_branch(0, 0, 0, 5), 0.0)], p)
    assert one.n_nodes == 1 and one.edges == ()
    with pytest.raises(EmptyBranch):
        build_graph([], p)


def test_prim_equals_kruskal_on_random_graphs():
    rng = np.random.default_rng(12)
    for trial in range(30):
        n = int(rng.integers(2, 40))
        edges = []
        weights = rng.permutation(n * n).astype(np.float64) + 1.0  # tie-free
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or rng.uniform() < 0.3:  # chain keeps it connected
                    edges.append((i, j, float(weights[k])))
                k += 1
        g = VesselGraph(
            n,
            tuple(WeightedEdge(i, j, w, w * 0.5) for i, j, w in edges),
            tuple(rng.integers(1, 100, size=n).tolist()),
        )
        tree = prim_mst(g)
        cost = {frozenset((e.i, e.j)): e.cost_total for e in g.edges}
        total = sum(cost[frozenset((v, int(tree.parent[v])))] for v in range(n) if tree.parent[v] >= 0)
        assert total == kruskal_mst(n, edges)


def test_prim_root_is_largest_branch():
    p = GraphParams()
    branches = [
        ScoredBranch(_line_branch(0, 0, 0, 4), 0.0),
        ScoredBranch(_line_branch(1, 10, 0, 30), 0.0),
        ScoredBranch(_line_branch(2, 50, 0, 6), 0.0),
    ]
    tree = prim_mst(build_graph(branches, p))
    assert tree.root == 1
    assert tree.parent[1] == -1
    assert tree.edge_pos_cost[tree.root] == 0.0


def test_spanning_tree_order_parents_first():
    rng = np.random.default_rng(13)
    n = 25
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((u, v, float(rng.uniform(0.1, 5.0))))
    g = VesselGraph(
        n,
        tuple(WeightedEdge(u, v, c, c) for u, v, c in edges),
        tuple([1] * n),
    )
    tree = prim_mst(g)
    seen = set()
    for u in tree.order.tolist():
        par = int(tree.parent[u])
        assert par == -1 or par in seen
        seen.add(u)
    assert seen == set(range(n))


def test_prim_raises_on_disconnected_input():
    g = VesselGraph(3, (WeightedEdge(0, 1, 1.0, 1.0),), (1, 1, 1))
    with pytest.raises(DisconnectedGraph):
        prim_mst(g)
