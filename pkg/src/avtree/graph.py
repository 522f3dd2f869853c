"""Weighted branch graph and its minimum spanning tree.

Branches become nodes. Edge costs combine geometric continuity (endpoint
distance plus orientation difference) with the disagreement of the two
branches' artery/vein scores; the spanning tree over the combined cost is
the structure scores later propagate through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedGraph, EmptyBranch
from .raster import ProbabilityTriplet
from .skeleton import Branch


@dataclass(frozen=True)
class GraphParams:
    sigma_pos: float = 100.0
    sigma_lab: float = 0.1
    lambda_angle: float = 1.0
    sigma_prop: float = 10.0
    max_link_distance: float = 50.0

    def __post_init__(self):
        if not (self.sigma_pos > 0 and self.sigma_lab > 0 and self.sigma_prop > 0):
            raise ValueError("sigma parameters must be positive")
        if self.lambda_angle < 0:
            raise ValueError("lambda_angle must be nonnegative")
        if self.max_link_distance <= 0:
            raise ValueError("max_link_distance must be positive")


@dataclass(frozen=True)
class ScoredBranch:
    branch: Branch
    score: float

    def __post_init__(self):
        if abs(self.score) > 0.5 + 1e-9:
            raise ValueError(f"score {self.score} outside [-0.5, 0.5]")


@dataclass(frozen=True)
class WeightedEdge:
    i: int
    j: int
    cost_total: float
    cost_pos: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("self edges are not allowed")
        if self.cost_total < 0 or self.cost_pos < 0:
            raise ValueError("edge costs must be nonnegative")


@dataclass(frozen=True)
class VesselGraph:
    n_nodes: int
    edges: tuple[WeightedEdge, ...]
    node_sizes: tuple[int, ...]  # branch pixel counts, used for root choice


@dataclass(frozen=True)
class SpanningTree:
    root: int
    parent: np.ndarray  # int32, -1 at root
    children: tuple[tuple[int, ...], ...]
    edge_pos_cost: np.ndarray  # float64, cost_pos of edge to parent, 0 at root
    order: np.ndarray  # int32, breadth-first from root (parents precede children)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)


def likelihood_map(p: ProbabilityTriplet) -> np.ndarray:
    """Per-pixel artery-vs-vein evidence: p_artery / (p_artery + p_vein).

    Where neither vessel class has mass the score is ambivalent (0.5).
    """
    pa = p.p_artery.astype(np.float64)
    pv = p.p_vein.astype(np.float64)
    denom = pa + pv
    out = np.full(pa.shape, 0.5)
    np.divide(pa, denom, out=out, where=denom > 1e-12)
    return out


def branch_score(b: Branch, s_map: np.ndarray) -> float:
    """Mean likelihood over branch pixels, recentered to [-0.5, 0.5]."""
    if b.count < 1:
        raise EmptyBranch("branch has no pixels")
    xs = b.pixels[:, 0]
    ys = b.pixels[:, 1]
    return float(s_map[ys, xs].mean() - 0.5)


def _angle_delta(a: float, b: float) -> float:
    d = abs(a - b)
    return min(d, math.pi - d)


def position_cost(a: Branch, b: Branch, p: GraphParams) -> float:
    """Geometric continuity cost: best of the four endpoint pairings."""
    best = math.inf
    for (xa, ya), aa in ((a.endpoint1, a.alpha1), (a.endpoint2, a.alpha2)):
        for (xb, yb), ab in ((b.endpoint1, b.alpha1), (b.endpoint2, b.alpha2)):
            dist = math.hypot(xa - xb, ya - yb)
            cost = dist / p.sigma_pos + p.lambda_angle * _angle_delta(aa, ab)
            if cost < best:
                best = cost
    return best


def label_cost(a: ScoredBranch, b: ScoredBranch, p: GraphParams) -> float:
    """Score-disagreement cost |s_a - s_b| / sigma_lab."""
    return abs(a.score - b.score) / p.sigma_lab


def _endpoint_arrays(branches: list[ScoredBranch]):
    n = len(branches)
    pts = np.empty((n, 2, 2))
    ang = np.empty((n, 2))
    for i, sb in enumerate(branches):
        pts[i, 0] = sb.branch.endpoint1
        pts[i, 1] = sb.branch.endpoint2
        ang[i, 0] = sb.branch.alpha1
        ang[i, 1] = sb.branch.alpha2
    return pts, ang


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[max(ri, rj)] = min(ri, rj)
        return True


def build_graph(branches: list[ScoredBranch], p: GraphParams) -> VesselGraph:
    """Link branch pairs whose nearest endpoints are within range.

    If the range-limited graph is disconnected, the cheapest edges across
    components are added until it is connected, so a spanning tree always
    exists.
    """
    n = len(branches)
    if n < 1:
        raise EmptyBranch("graph needs at least one branch")
    sizes = tuple(sb.branch.count for sb in branches)
    if n == 1:
        return VesselGraph(1, (), sizes)

    pts, ang = _endpoint_arrays(branches)
    dx = pts[:, None, :, None, 0] - pts[None, :, None, :, 0]
    dy = pts[:, None, :, None, 1] - pts[None, :, None, :, 1]
    dist = np.sqrt(dx * dx + dy * dy)
    dang = np.abs(ang[:, None, :, None] - ang[None, :, None, :])
    dang = np.minimum(dang, math.pi - dang)
    pair_cost = dist / p.sigma_pos + p.lambda_angle * dang
    c_pos = pair_cost.min(axis=(2, 3))
    min_dist = dist.min(axis=(2, 3))

    scores = np.array([sb.score for sb in branches])
    c_lab = np.abs(scores[:, None] - scores[None, :]) / p.sigma_lab
    c_total = c_pos + c_lab

    iu, ju = np.triu_indices(n, k=1)
    in_range = min_dist[iu, ju] <= p.max_link_distance
    edges = [
        WeightedEdge(int(i), int(j), float(c_total[i, j]), float(c_pos[i, j]))
        for i, j in zip(iu[in_range], ju[in_range])
    ]

    uf = _UnionFind(n)
    components = n
    for e in edges:
        if uf.union(e.i, e.j):
            components -= 1
    if components > 1:
        rest = ~in_range
        order = np.argsort(c_total[iu[rest], ju[rest]], kind="stable")
        ri, rj = iu[rest][order], ju[rest][order]
        for i, j in zip(ri, rj):
            if uf.union(int(i), int(j)):
                edges.append(WeightedEdge(int(i), int(j), float(c_total[i, j]), float(c_pos[i, j])))
                components -= 1
                if components == 1:
                    break
    return VesselGraph(n, tuple(edges), sizes)


def prim_mst(g: VesselGraph) -> SpanningTree:
    """Minimum spanning tree under cost_total, grown from the largest branch.

    Ties (equal keys) resolve toward the smaller node index.
    """
    n = g.n_nodes
    root = int(np.argmax(g.node_sizes))
    if n == 1:
        return SpanningTree(
            root=0,
            parent=np.array([-1], dtype=np.int32),
            children=((),),
            edge_pos_cost=np.zeros(1),
            order=np.zeros(1, dtype=np.int32),
        )

    total = np.full((n, n), np.inf)
    pos = np.zeros((n, n))
    for e in g.edges:
        total[e.i, e.j] = total[e.j, e.i] = e.cost_total
        pos[e.i, e.j] = pos[e.j, e.i] = e.cost_pos

    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int32)
    key[root] = 0.0
    for _ in range(n):
        key_masked = np.where(in_tree, np.inf, key)
        u = int(np.argmin(key_masked))
        if not np.isfinite(key_masked[u]):
            raise DisconnectedGraph("graph is not connected")
        in_tree[u] = True
        better = ~in_tree & (total[u] < key)
        key[better] = total[u][better]
        parent[better] = u

    edge_pos_cost = np.zeros(n)
    children_lists: list[list[int]] = [[] for _ in range(n)]
    for v in range(n):
        if parent[v] >= 0:
            children_lists[parent[v]].append(v)
            edge_pos_cost[v] = pos[parent[v], v]

    order = np.empty(n, dtype=np.int32)
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        u = int(order[head])
        head += 1
        for v in children_lists[u]:
            order[tail] = v
            tail += 1

    return SpanningTree(
        root=root,
        parent=parent,
        children=tuple(tuple(c) for c in children_lists),
        edge_pos_cost=edge_pos_cost,
        order=order,
    )
