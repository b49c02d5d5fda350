"""Slow, obviously-correct reference implementations used by the test
suite: dense-bitmap geometry, a literal transcription of the evaluation
definitions, exhaustive assignment search, and loss enumeration.

Everything here favours clarity over speed and is guarded to small
instances; nothing from this module belongs in a hot path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, UndefinedLossError
from .masks import FlowField, Mask
from .metrics import MetricCounts

_EVAL_GUARD = dict(max_dim=32, max_objects=8, max_frames=16)
_ASSIGN_GUARD = 7
_LOSS_GUARD = 64


@dataclass
class DenseMask:
    """A mask as an explicit per-pixel boolean grid."""

    height: int
    width: int
    grid: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=bool)
        if self.grid.shape != (self.height, self.width):
            raise ConstraintError(
                f"grid shape {self.grid.shape} != {(self.height, self.width)}"
            )

    @classmethod
    def from_mask(cls, mask: Mask) -> "DenseMask":
        return cls(mask.height, mask.width, mask.to_dense())

    def to_mask(self) -> Mask:
        return Mask.from_dense(self.grid)


def _require_same_dims(a: DenseMask, b: DenseMask):
    if (a.height, a.width) != (b.height, b.width):
        raise ConstraintError("dense mask dimensions differ")


def dense_iou(a: DenseMask, b: DenseMask) -> float:
    _require_same_dims(a, b)
    inter = int(np.logical_and(a.grid, b.grid).sum())
    union = int(np.logical_or(a.grid, b.grid).sum())
    if union == 0:
        return 0.0
    return inter / union


def dense_intersection(a: DenseMask, b: DenseMask) -> int:
    _require_same_dims(a, b)
    return int(np.logical_and(a.grid, b.grid).sum())


def dense_subtract(a: DenseMask, b: DenseMask) -> DenseMask:
    _require_same_dims(a, b)
    return DenseMask(a.height, a.width, np.logical_and(a.grid, ~b.grid))


def _round_away(z: float) -> int:
    magnitude = int(math.floor(abs(z) + 0.5))
    return magnitude if z >= 0 else -magnitude


def dense_warp(a: DenseMask, flow: FlowField) -> DenseMask:
    if (a.height, a.width) != (flow.height, flow.width):
        raise ConstraintError("flow dimensions differ from the mask")
    out = np.zeros((a.height, a.width), dtype=bool)
    for y in range(a.height):
        for x in range(a.width):
            if not a.grid[y, x]:
                continue
            tx = _round_away(x + float(flow.u[y, x]))
            ty = _round_away(y + float(flow.v[y, x]))
            if 0 <= tx < a.width and 0 <= ty < a.height:
                out[ty, tx] = True
    return DenseMask(a.height, a.width, out)


# ---------------------------------------------------------------------------
# Literal evaluation
# ---------------------------------------------------------------------------

def brute_evaluate(gt, hyps, class_id, ignore_threshold=0.5,
                   id_switch_mode="motchallenge") -> MetricCounts:
    """Evaluate a sequence directly from dense bitmaps and the metric
    definitions, with no shortcuts. Small instances only."""
    gt_masks = []   # (frame, track id, grid)
    for frame, recs in gt.objects.items():
        for r in recs:
            if r.class_id == class_id:
                gt_masks.append((frame, r.object_id, r.mask.to_dense()))
    hyp_masks = []  # (frame, track id, grid)
    for tid, track in hyps.tracks.items():
        if track.class_id != class_id:
            continue
        for frame, m in track.masks.items():
            hyp_masks.append((frame, tid, m.to_dense()))

    frames = sorted({t for t, _, _ in gt_masks} | {t for t, _, _ in hyp_masks})
    if len(frames) > _EVAL_GUARD["max_frames"]:
        raise ConstraintError("size guard: too many frames for the oracle")
    for _, _, grid in gt_masks + hyp_masks:
        if max(grid.shape) > _EVAL_GUARD["max_dim"]:
            raise ConstraintError("size guard: image too large for the oracle")
    for frame in frames:
        per_frame = sum(1 for t, _, _ in gt_masks if t == frame)
        per_frame_h = sum(1 for t, _, _ in hyp_masks if t == frame)
        if max(per_frame, per_frame_h) > _EVAL_GUARD["max_objects"]:
            raise ConstraintError("size guard: too many objects for the oracle")

    def iou_grids(a, b):
        union = int(np.logical_or(a, b).sum())
        if union == 0:
            return 0.0
        return int(np.logical_and(a, b).sum()) / union

    # correspondence c: hypothesis index -> gt index (same frame, IoU > 0.5)
    c = {}
    for j, (t_h, _, h_grid) in enumerate(hyp_masks):
        best = None
        best_iou = 0.0
        for i, (t_m, _, m_grid) in enumerate(gt_masks):
            if t_m != t_h:
                continue
            value = iou_grids(h_grid, m_grid)
            if value > 0.5 and value > best_iou:
                best = i
                best_iou = value
        if best is not None:
            c[j] = best

    tp = set(c)
    covered = set(c.values())
    if len(covered) != len(tp):
        raise ConstraintError("two hypotheses matched one ground-truth mask")
    fn = [i for i in range(len(gt_masks)) if i not in covered]

    fp = []
    for j in range(len(hyp_masks)):
        if j in tp:
            continue
        t_h, _, h_grid = hyp_masks[j]
        region = np.zeros_like(h_grid)
        for m in gt.ignore_masks(t_h):
            region |= m.to_dense()
        area = int(h_grid.sum())
        inside = int(np.logical_and(h_grid, region).sum())
        if area and inside / area > ignore_threshold:
            continue
        fp.append(j)

    soft = sum(
        iou_grids(hyp_masks[j][2], gt_masks[i][2]) for j, i in c.items()
    )

    # id switches: matched gt masks whose relevant predecessor carried
    # a different hypothesis id
    inv = {i: j for j, i in c.items()}
    ids = 0
    for i, (t_m, gt_tid, _) in enumerate(gt_masks):
        if i not in inv:
            continue
        same_track = [
            (t_q, q) for q, (t_q, q_tid, _) in enumerate(gt_masks)
            if q_tid == gt_tid and t_q < t_m
        ]
        if id_switch_mode == "motchallenge":
            tracked = [(t_q, q) for t_q, q in same_track if q in inv]
            if not tracked:
                continue
            _, pred = max(tracked)
        elif id_switch_mode == "kitti":
            if not same_track:
                continue
            _, pred = max(same_track)
            if pred not in inv:
                continue
        else:
            raise ConstraintError(f"unknown id-switch mode {id_switch_mode!r}")
        if hyp_masks[inv[i]][1] != hyp_masks[inv[pred]][1]:
            ids += 1

    return MetricCounts(
        num_gt=len(gt_masks),
        num_tp=len(tp),
        num_fp=len(fp),
        num_fn=len(fn),
        num_ids=ids,
        soft_tp=float(soft),
    )


# ---------------------------------------------------------------------------
# Exhaustive assignment
# ---------------------------------------------------------------------------

def brute_assignment(cost, feasible=None) -> dict[int, int]:
    """Best partial matching by full enumeration: maximum cardinality,
    then minimum cost, then lexicographically smallest pair list."""
    cost = np.asarray(cost, dtype=np.float64)
    if feasible is None:
        feasible = np.ones(cost.shape, dtype=bool)
    else:
        feasible = np.asarray(feasible, dtype=bool)
    n, m = cost.shape
    if n > _ASSIGN_GUARD or m > _ASSIGN_GUARD:
        raise ConstraintError("size guard: matrix too large for enumeration")

    best: list = [None]  # (card, cost, pairs)

    def consider(card, total, pairs):
        cand = (card, total, pairs)
        if best[0] is None:
            best[0] = cand
            return
        b_card, b_total, b_pairs = best[0]
        if card != b_card:
            better = card > b_card
        elif total != b_total:
            better = total < b_total
        else:
            better = pairs < b_pairs
        if better:
            best[0] = cand

    def walk(row, used, card, total, pairs):
        if row == n:
            consider(card, total, pairs)
            return
        walk(row + 1, used, card, total, pairs)
        for col in range(m):
            bit = 1 << col
            if used & bit or not feasible[row, col]:
                continue
            walk(row + 1, used | bit, card + 1,
                 total + float(cost[row, col]), pairs + ((row, col),))

    walk(0, 0, 0, 0.0, ())
    return dict(best[0][2])


# ---------------------------------------------------------------------------
# Loss enumeration
# ---------------------------------------------------------------------------

def brute_losses(data):
    """(batch-hard, batch-all, contrastive) by direct enumeration."""
    n = len(data)
    if n > _LOSS_GUARD:
        raise ConstraintError("size guard: batch too large for enumeration")
    vectors = data.vectors
    ids = data.ids
    alpha = data.margin
    table = [
        [float(np.linalg.norm(vectors[i] - vectors[j])) for j in range(n)]
        for i in range(n)
    ]

    def d(i, j):
        return table[i][j]

    hard_terms = []
    for a in range(n):
        pos = [d(a, e) for e in range(n) if e != a and ids[e] == ids[a]]
        neg = [d(a, e) for e in range(n) if ids[e] != ids[a]]
        if not pos or not neg:
            continue
        hard_terms.append(max(max(pos) - min(neg) + alpha, 0.0))
    if not hard_terms:
        raise UndefinedLossError("no anchor has both a positive and a negative")
    batch_hard = sum(hard_terms) / len(hard_terms)

    all_terms = []
    for a in range(n):
        for p in range(n):
            if p == a or ids[p] != ids[a]:
                continue
            for q in range(n):
                if ids[q] == ids[a]:
                    continue
                all_terms.append(max(d(a, p) - d(a, q) + alpha, 0.0))
    if not all_terms:
        raise UndefinedLossError("no valid (anchor, positive, negative) triplet")
    batch_all = sum(all_terms) / len(all_terms)

    total = 0.0
    for a in range(n):
        for e in range(n):
            if ids[e] == ids[a]:
                total += d(a, e) ** 2
            else:
                total += max(alpha - d(a, e), 0.0) ** 2
    contrastive = total / (n * n)

    return batch_hard, batch_all, contrastive
