"""Association cues between a track head and a new detection: embedding
distance, flow-warped mask IoU, flow-warped box IoU, and box-center
distance; plus assembly of the cost matrix the linker feeds to the
assignment solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError
from .masks import FlowField, Mask, bbox_of, iou, warp

MECHANISMS = ("embedding", "mask_iou", "bbox_iou", "bbox_center")
_LOWER_IS_BETTER = frozenset({"embedding", "bbox_center"})


@dataclass(frozen=True)
class AssociationMechanism:
    """A mechanism variant plus its feasibility threshold.

    Distance variants (embedding, bbox_center) accept pairs with score
    strictly below the threshold; similarity variants (mask_iou,
    bbox_iou) accept pairs strictly above it.
    """

    variant: str
    threshold: float

    def __post_init__(self):
        if self.variant not in MECHANISMS:
            raise ConstraintError(f"unknown association mechanism {self.variant!r}")
        if not math.isfinite(self.threshold):
            raise ConstraintError("association threshold must be finite")
        if self.lower_is_better:
            if self.threshold < 0:
                raise ConstraintError(
                    f"distance threshold must be >= 0, got {self.threshold}"
                )
        elif not 0.0 <= self.threshold <= 1.0:
            raise ConstraintError(
                f"IoU threshold must be in [0, 1], got {self.threshold}"
            )

    @property
    def lower_is_better(self) -> bool:
        return self.variant in _LOWER_IS_BETTER

    @property
    def adjacent_only(self) -> bool:
        return self.variant != "embedding"

    @property
    def needs_flow(self) -> bool:
        return self.variant in ("mask_iou", "bbox_iou")


def embed_distance(v, w) -> float:
    """Euclidean distance between two association vectors."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.shape != w.shape or v.ndim != 1:
        raise ConstraintError(
            f"embedding shapes differ: {v.shape} vs {w.shape}"
        )
    return float(np.linalg.norm(v - w))


def maskprop_score(mask_prev: Mask, mask_cur: Mask, flow: FlowField) -> float:
    """IoU between the flow-warped previous mask and the current mask."""
    return iou(warp(mask_prev, flow), mask_cur)


def _rect_iou(a, b) -> float:
    """IoU of two continuous rectangles given as (x0, y0, x1, y1)."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _low_median(values) -> float:
    """Median taking the lower middle element for even-sized input."""
    values = np.asarray(values, dtype=np.float64).ravel()
    k = (values.size - 1) // 2
    return float(np.partition(values, k)[k])


def bbox_iou_warped(mask_prev: Mask, mask_cur: Mask, flow: FlowField) -> float:
    """Box IoU after shifting the previous box by the median flow
    sampled over all pixels inside that box."""
    if mask_prev.height != flow.height or mask_prev.width != flow.width:
        raise ConstraintError("flow dimensions do not match the masks")
    bp = bbox_of(mask_prev)
    bc = bbox_of(mask_cur)
    patch_u = flow.u[bp.y_min:bp.y_max + 1, bp.x_min:bp.x_max + 1]
    patch_v = flow.v[bp.y_min:bp.y_max + 1, bp.x_min:bp.x_max + 1]
    dx = _low_median(patch_u)
    dy = _low_median(patch_v)
    moved = (bp.x_min + dx, bp.y_min + dy, bp.x_max + 1 + dx, bp.y_max + 1 + dy)
    target = (bc.x_min, bc.y_min, bc.x_max + 1, bc.y_max + 1)
    return _rect_iou(moved, target)


def center_distance(mask_prev: Mask, mask_cur: Mask) -> float:
    """Euclidean distance between the bounding-box centers."""
    (ax, ay) = bbox_of(mask_prev).center
    (bx, by) = bbox_of(mask_cur).center
    return math.hypot(ax - bx, ay - by)


def pair_score(head_det, det, mechanism: AssociationMechanism, flow=None) -> float:
    """Raw association score for one (track head, detection) pair."""
    if mechanism.variant == "embedding":
        if head_det.embedding is None or det.embedding is None:
            raise ConstraintError(
                "embedding mechanism requires detections with embeddings"
            )
        return embed_distance(head_det.embedding, det.embedding)
    if mechanism.variant == "mask_iou":
        return maskprop_score(head_det.mask, det.mask, flow)
    if mechanism.variant == "bbox_iou":
        return bbox_iou_warped(head_det.mask, det.mask, flow)
    return center_distance(head_det.mask, det.mask)


def build_cost_matrix(track_heads, new_detections, mechanism: AssociationMechanism,
                      flow: FlowField | None = None):
    """Costs and feasibility for all (track head, detection) pairs.

    ``track_heads`` holds (detection, age-in-frames) pairs; ages must be
    exactly 1 for the adjacent-frame mechanisms. Distance scores are
    used as costs directly, similarity scores as 1 - score; feasibility
    applies the threshold to the raw score (distance < threshold, or
    similarity > threshold).
    """
    heads = list(track_heads)
    dets = list(new_detections)
    if mechanism.needs_flow and flow is None and heads and dets:
        raise ConstraintError(
            f"{mechanism.variant} association requires a flow field"
        )
    if mechanism.adjacent_only:
        for _, age in heads:
            if age != 1:
                raise ConstraintError(
                    f"{mechanism.variant} association links adjacent frames "
                    f"only; track head has age {age}"
                )
    cost = np.zeros((len(heads), len(dets)), dtype=np.float64)
    feasible = np.zeros((len(heads), len(dets)), dtype=bool)
    for i, (head_det, _) in enumerate(heads):
        for j, det in enumerate(dets):
            score = pair_score(head_det, det, mechanism, flow)
            if mechanism.lower_is_better:
                cost[i, j] = score
                feasible[i, j] = score < mechanism.threshold
            else:
                cost[i, j] = 1.0 - score
                feasible[i, j] = score > mechanism.threshold
    return cost, feasible
