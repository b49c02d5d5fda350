"""Mask-based CLEAR-MOT evaluation: per-frame correspondence, ignore
handling, id switches, and the MOTSA / MOTSP / sMOTSA scores.

Because ground truth and hypotheses are each non-overlapping within a
frame, at most one hypothesis can reach IoU > 0.5 with a given ground
truth mask, so per-frame correspondence is a plain argmax per
hypothesis with a strict 0.5 bar; no bipartite optimisation is needed.
That uniqueness is still asserted defensively on every frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConstraintError
from .io import CLASS_NAMES, SequenceGroundTruth, TrackSet
from .masks import Mask, bbox_of, check_frame_nonoverlap, intersection_count, union_masks

ID_SWITCH_MODES = ("motchallenge", "kitti")


@dataclass(frozen=True)
class FrameMatching:
    """Correspondence for one frame.

    ``pairs`` holds (hypothesis index, ground-truth index, IoU) with
    IoU strictly above 0.5; the unmatched lists carry the remaining
    indices of each side.
    """

    frame: int
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_hyps: tuple[int, ...]
    unmatched_gts: tuple[int, ...]


@dataclass(frozen=True)
class FrameAssociation:
    """Track-id level view of one matched frame, input to id-switch
    counting: which gt track was covered by which hypothesis track, and
    which gt tracks appeared at all."""

    frame: int
    matched: dict[int, int]
    present: frozenset[int]


@dataclass(frozen=True)
class MetricCounts:
    num_gt: int = 0
    num_tp: int = 0
    num_fp: int = 0
    num_fn: int = 0
    num_ids: int = 0
    soft_tp: float = 0.0

    def validate(self):
        if min(self.num_gt, self.num_tp, self.num_fp, self.num_fn, self.num_ids) < 0:
            raise ConstraintError(f"negative counts in {self}")
        if self.num_tp + self.num_fn != self.num_gt:
            raise ConstraintError(
                f"|TP| + |FN| != |M|: {self.num_tp} + {self.num_fn} != {self.num_gt}"
            )
        if self.num_ids > self.num_tp:
            raise ConstraintError(f"|IDS| > |TP| in {self}")
        if self.soft_tp > self.num_tp + 1e-9:
            raise ConstraintError(f"soft TP exceeds |TP| in {self}")
        if self.num_tp and self.soft_tp <= 0.5 * self.num_tp:
            raise ConstraintError(
                f"soft TP {self.soft_tp} not above 0.5 * |TP| = {0.5 * self.num_tp}"
            )
        return self

    def __add__(self, other):
        return MetricCounts(
            self.num_gt + other.num_gt,
            self.num_tp + other.num_tp,
            self.num_fp + other.num_fp,
            self.num_fn + other.num_fn,
            self.num_ids + other.num_ids,
            self.soft_tp + other.soft_tp,
        )


def compute_metrics(counts: MetricCounts):
    """(MOTSA, MOTSP, sMOTSA); None marks an undefined value.

    Both algebraic forms of MOTSA are evaluated exactly and compared
    before anything is returned.
    """
    motsa = motsp = smotsa = None
    if counts.num_gt > 0:
        direct = Fraction(counts.num_tp - counts.num_fp - counts.num_ids,
                          counts.num_gt)
        complement = 1 - Fraction(
            counts.num_fn + counts.num_fp + counts.num_ids, counts.num_gt
        )
        if direct != complement:
            raise ConstraintError(
                f"MOTSA forms disagree ({direct} vs {complement}) for {counts}"
            )
        motsa = float(direct)
        smotsa = (counts.soft_tp - counts.num_fp - counts.num_ids) / counts.num_gt
    if counts.num_tp > 0:
        motsp = counts.soft_tp / counts.num_tp
    return motsa, motsp, smotsa


def _boxes_array(masks):
    boxes = np.empty((len(masks), 4), dtype=np.int64)
    for i, m in enumerate(masks):
        if m.area == 0:
            boxes[i] = (1, 1, 0, 0)  # empty: overlaps nothing
        else:
            b = bbox_of(m)
            boxes[i] = (b.x_min, b.y_min, b.x_max, b.y_max)
    return boxes


def match_frame(gt_masks, hyp_masks, frame=0) -> FrameMatching:
    """Map each hypothesis to the ground-truth mask of maximal IoU iff
    that IoU exceeds 0.5; everything else stays unmatched."""
    gt_masks = list(gt_masks)
    hyp_masks = list(hyp_masks)
    pairs = []
    matched_gt = {}
    unmatched_hyps = []
    if gt_masks and hyp_masks:
        gb = _boxes_array(gt_masks)
        hb = _boxes_array(hyp_masks)
        overlap = ~(
            (hb[:, None, 0] > gb[None, :, 2])
            | (gb[None, :, 0] > hb[:, None, 2])
            | (hb[:, None, 1] > gb[None, :, 3])
            | (gb[None, :, 1] > hb[:, None, 3])
        )
    for j, h in enumerate(hyp_masks):
        best_iou = 0.0
        best_i = None
        if gt_masks and h.area:
            for i in np.flatnonzero(overlap[j]):
                m = gt_masks[i]
                inter = intersection_count(h, m)
                if inter == 0:
                    continue
                # strict comparison on exact counts: IoU > 0.5 <=> 2*inter > union
                union = h.area + m.area - inter
                if 2 * inter <= union:
                    continue
                value = inter / union
                if value > best_iou:
                    best_iou = value
                    best_i = int(i)
        if best_i is None:
            unmatched_hyps.append(j)
            continue
        if best_i in matched_gt:
            raise ConstraintError(
                f"frame {frame}: ground-truth mask {best_i} claimed by "
                f"hypotheses {matched_gt[best_i]} and {j}; inputs must be "
                "non-overlapping"
            )
        matched_gt[best_i] = j
        pairs.append((j, best_i, best_iou))
    unmatched_gts = [i for i in range(len(gt_masks)) if i not in matched_gt]
    return FrameMatching(frame, tuple(pairs), tuple(unmatched_hyps),
                         tuple(unmatched_gts))


def apply_ignore(unmatched_hyps, ignore_masks, coverage_threshold=0.5):
    """Indices of unmatched hypotheses kept as false positives.

    A hypothesis is discarded (neither TP nor FP) iff the fraction of
    its pixels inside the union of ignore regions strictly exceeds the
    coverage threshold.
    """
    if not 0.0 < coverage_threshold <= 1.0:
        raise ConstraintError(
            f"coverage threshold {coverage_threshold} outside (0, 1]"
        )
    unmatched_hyps = list(unmatched_hyps)
    ignore_masks = [m for m in ignore_masks if m.area > 0]
    if not ignore_masks:
        return list(range(len(unmatched_hyps)))
    region = union_masks(ignore_masks)
    retained = []
    for idx, h in enumerate(unmatched_hyps):
        covered = intersection_count(h, region)
        if covered <= coverage_threshold * h.area:
            retained.append(idx)
    return retained


def soft_tp(matchings) -> float:
    """Sum of IoU over all matched hypothesis/ground-truth pairs."""
    return float(sum(p[2] for m in matchings for p in m.pairs))


def count_id_switches(associations, mode="motchallenge"):
    """Count ground-truth masks whose predecessor carried another id.

    ``associations`` is an ascending-frame list of FrameAssociation. In
    "motchallenge" mode the predecessor is the latest earlier matched
    mask of the same gt track, across arbitrary gaps. In "kitti" mode a
    switch is only counted when the track's immediately preceding
    appearance was itself matched (targets lost by the tracker do not
    produce switches).

    Returns (count, [(frame, gt_track_id), ...]).
    """
    if mode not in ID_SWITCH_MODES:
        raise ConstraintError(f"unknown id-switch mode {mode!r}")
    offenders = []
    last_matched_id = {}
    prev_appearance = {}
    for assoc in associations:
        for gt_tid in sorted(assoc.present):
            hyp_tid = assoc.matched.get(gt_tid)
            if hyp_tid is not None:
                if mode == "motchallenge":
                    prev = last_matched_id.get(gt_tid)
                    if prev is not None and prev != hyp_tid:
                        offenders.append((assoc.frame, gt_tid))
                else:
                    prev = prev_appearance.get(gt_tid)
                    if prev is not None and prev[1] is not None and prev[1] != hyp_tid:
                        offenders.append((assoc.frame, gt_tid))
                last_matched_id[gt_tid] = hyp_tid
            prev_appearance[gt_tid] = (assoc.frame, hyp_tid)
    return len(offenders), offenders


def evaluate_sequence(gt: SequenceGroundTruth, hyps: TrackSet, class_id,
                      ignore_threshold=0.5,
                      id_switch_mode="motchallenge") -> MetricCounts:
    """Run the full per-class evaluation over one sequence."""
    gt_frames = {f for f in gt.objects if gt.class_objects(f, class_id)}
    hyp_frames = {f for f in hyps.frames() if hyps.frame_entries(f, class_id)}
    frames = sorted(gt_frames | hyp_frames)

    num_gt = num_tp = num_fp = num_fn = 0
    soft = 0.0
    associations = []
    for frame in frames:
        if frame in gt.dims and frame in hyps.dims and gt.dims[frame] != hyps.dims[frame]:
            raise ConstraintError(
                f"frame {frame}: ground truth is {gt.dims[frame]}, "
                f"hypotheses are {hyps.dims[frame]}"
            )
        gt_recs = gt.class_objects(frame, class_id)
        hyp_entries = hyps.frame_entries(frame, class_id)
        gt_masks = [r.mask for r in gt_recs]
        hyp_masks = [m for _, _, m in hyp_entries]
        for side, masks in (("ground-truth", gt_masks), ("hypothesis", hyp_masks)):
            bad = check_frame_nonoverlap(masks)
            if bad:
                raise ConstraintError(
                    f"frame {frame}: overlapping {side} masks at indices {bad[0]}"
                )
        matching = match_frame(gt_masks, hyp_masks, frame=frame)
        unmatched_masks = [hyp_masks[j] for j in matching.unmatched_hyps]
        retained = apply_ignore(unmatched_masks, gt.ignore_masks(frame),
                                ignore_threshold)
        num_gt += len(gt_masks)
        num_tp += len(matching.pairs)
        num_fp += len(retained)
        num_fn += len(matching.unmatched_gts)
        soft += sum(p[2] for p in matching.pairs)
        associations.append(FrameAssociation(
            frame,
            {gt_recs[i].object_id: hyp_entries[j][0]
             for j, i, _ in matching.pairs},
            frozenset(r.object_id for r in gt_recs),
        ))
    num_ids, _ = count_id_switches(associations, id_switch_mode)
    return MetricCounts(num_gt, num_tp, num_fp, num_fn, num_ids, soft).validate()


def aggregate(counts_list) -> MetricCounts:
    """Component-wise sum; metrics are recomputed from the summed counts."""
    total = MetricCounts()
    for c in counts_list:
        total = total + c
    return total.validate()


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------

def _counts_entry(counts: MetricCounts) -> dict:
    motsa, motsp, smotsa = compute_metrics(counts)
    return {
        "num_gt": counts.num_gt,
        "num_tp": counts.num_tp,
        "num_fp": counts.num_fp,
        "num_fn": counts.num_fn,
        "num_ids": counts.num_ids,
        "soft_tp": counts.soft_tp,
        "motsa": motsa,
        "motsp": motsp,
        "smotsa": smotsa,
    }


@dataclass
class MetricReport:
    """Per-sequence, per-class counts plus aggregates over both axes."""

    class_ids: tuple[int, ...]
    sequences: dict[str, dict[int, MetricCounts]] = field(default_factory=dict)

    def class_totals(self) -> dict[int, MetricCounts]:
        return {
            cid: aggregate(seq[cid] for seq in self.sequences.values())
            for cid in self.class_ids
        }

    def overall(self) -> MetricCounts:
        return aggregate(
            seq[cid] for seq in self.sequences.values() for cid in self.class_ids
        )

    def to_document(self) -> dict:
        doc = {"sequences": {}, "classes": {}, "aggregate": None}
        for name, per_class in sorted(self.sequences.items()):
            entry = {CLASS_NAMES[cid]: _counts_entry(per_class[cid])
                     for cid in self.class_ids}
            entry["all"] = _counts_entry(
                aggregate(per_class[cid] for cid in self.class_ids)
            )
            doc["sequences"][name] = entry
        for cid, counts in self.class_totals().items():
            doc["classes"][CLASS_NAMES[cid]] = _counts_entry(counts)
        doc["aggregate"] = _counts_entry(self.overall())
        return doc
