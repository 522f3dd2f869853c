"""Likelihood score propagation over the spanning tree.

Two linear passes (leaves-to-root, then root-to-leaves) make every node's
final score the attenuation-weighted sum of all initial scores, weighted
by the product of edge attenuations along the unique tree path. A weakly
or wrongly scored branch is thereby outvoted by its neighborhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyBranch, UnassignedVesselPixel
from .graph import GraphParams, ScoredBranch, SpanningTree, build_graph, prim_mst
from .raster import ARTERY, VEIN, LabelMap
from .skeleton import Branch


@dataclass(frozen=True)
class PropagationState:
    """Scores before, between, and after the two passes of one iteration."""

    iteration: int
    s_init: np.ndarray
    s_up: np.ndarray
    s_fin: np.ndarray


def attenuation(cost_pos: float, sigma_prop: float) -> float:
    """Edge transmission factor exp(-cost_pos / sigma_prop), in (0, 1]."""
    return math.exp(-cost_pos / sigma_prop)


def upward_pass(t: SpanningTree, s_init: np.ndarray, p: GraphParams) -> np.ndarray:
    """Accumulate subtree scores: children are visited before parents."""
    s_up = np.asarray(s_init, dtype=np.float64).copy()
    for u in t.order[::-1]:
        parent = t.parent[u]
        if parent >= 0:
            s_up[parent] += attenuation(t.edge_pos_cost[u], p.sigma_prop) * s_up[u]
    return s_up


def downward_pass(t: SpanningTree, s_up: np.ndarray, p: GraphParams) -> np.ndarray:
    """Blend in the rest of the tree: parents are finalized before children.

    The parent's contribution is corrected by subtracting the child's own
    attenuated echo, so each initial score is counted exactly once.
    """
    s_fin = np.asarray(s_up, dtype=np.float64).copy()
    for u in t.order:
        parent = t.parent[u]
        if parent >= 0:
            a = attenuation(t.edge_pos_cost[u], p.sigma_prop)
            s_fin[u] = s_up[u] + a * (s_fin[parent] - a * s_up[u])
    return s_fin


def propagate(
    branches: list[ScoredBranch], p: GraphParams, iterations: int = 2
) -> tuple[np.ndarray, list[PropagationState]]:
    """Iterate graph build, spanning tree, and the two passes.

    Label costs depend on the current scores, so the graph and tree are
    rebuilt every iteration; scores re-enter clamped to [-0.5, 0.5].
    """
    if not branches:
        raise EmptyBranch("nothing to propagate")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    scores = np.array([sb.score for sb in branches], dtype=np.float64)
    trace: list[PropagationState] = []
    for it in range(iterations):
        current = [ScoredBranch(sb.branch, float(s)) for sb, s in zip(branches, scores)]
        tree = prim_mst(build_graph(current, p))
        s_up = upward_pass(tree, scores, p)
        s_fin = downward_pass(tree, s_up, p)
        trace.append(PropagationState(it, scores.copy(), s_up, s_fin))
        scores = np.clip(s_fin, -0.5, 0.5)
    return scores, trace


def assign_vessel_pixels(vessel_mask: np.ndarray, branches: list[Branch]) -> np.ndarray:
    """Map every vessel pixel to the branch owning the nearest skeleton pixel.

    Junction pixels and off-skeleton vessel pixels inherit their nearest
    branch; returns int32 branch indices, -1 outside the vessel mask.
    """
    if not branches:
        raise EmptyBranch("no branches to assign pixels to")
    owner = np.full(vessel_mask.shape, -1, dtype=np.int32)
    for idx, b in enumerate(branches):
        owner[b.pixels[:, 1], b.pixels[:, 0]] = idx
    _, (iy, ix) = ndimage.distance_transform_edt(owner < 0, return_indices=True)
    assignment = owner[iy, ix]
    assignment[~vessel_mask] = -1
    if (assignment[vessel_mask] < 0).any():
        raise UnassignedVesselPixel("a vessel pixel has no reachable branch")
    return assignment


def relabel(
    labels: LabelMap, branches: list[Branch], s_fin: np.ndarray, assignment: np.ndarray
) -> LabelMap:
    """Rewrite vessel pixels from the final branch scores.

    Positive final score means artery; zero or negative means vein.
    Background and outside-FOV codes pass through untouched.
    """
    if assignment.shape != labels.codes.shape:
        raise UnassignedVesselPixel("assignment map shape differs from labels")
    vessel = labels.vessel_mask()
    if (assignment[vessel] < 0).any():
        raise UnassignedVesselPixel("vessel pixel without branch assignment")
    branch_label = np.where(np.asarray(s_fin) > 0.0, ARTERY, VEIN).astype(np.uint8)
    codes = labels.codes.copy()
    codes[vessel] = branch_label[assignment[vessel]]
    return LabelMap(codes)
