"""Deterministic synthetic scenarios: ground truth, noisy detections
and hypothesis tracks, and flow fields that exactly encode each
object's motion.

Objects follow piecewise-linear center trajectories and are rasterised
as filled boxes or ellipses; later objects are clipped by earlier ones,
so ground truth is non-overlapping by construction. All randomness
derives from the spec's seed through a fixed draw order (frames
ascending, objects in spec order; per detection: drop, mask noise,
confidence, embedding noise; then clutter), so equal seeds give
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConstraintError
from .io import (
    CLASS_IGNORE,
    AnnotationRecord,
    DetectionRecord,
    DetectionSet,
    SequenceGroundTruth,
    TrackRecord,
    TrackSet,
    flow_filename,
    write_annotations,
    write_detections,
    write_flow,
    write_results,
)
from .masks import Box, FlowField, Mask, rasterize_box_ellipse, rasterize_box_fill, subtract, union_masks

_IGNORE_ID_BASE = 10000
_CLUTTER_ID_BASE = 90000


@dataclass(frozen=True)
class ObjectSpec:
    """One synthetic object: class, shape, box size, and a
    piecewise-linear (frame, cx, cy) center trajectory."""

    class_id: int
    size: tuple[int, int]  # (box height, box width)
    waypoints: tuple[tuple[int, int, int], ...]
    shape: str = "box"     # "box" or "ellipse"

    def __post_init__(self):
        if self.shape not in ("box", "ellipse"):
            raise ConstraintError(f"unknown shape {self.shape!r}")
        if self.size[0] < 1 or self.size[1] < 1:
            raise ConstraintError(f"bad object size {self.size}")
        if not self.waypoints:
            raise ConstraintError("object needs at least one waypoint")
        frames = [wp[0] for wp in self.waypoints]
        if frames != sorted(frames) or len(set(frames)) != len(frames):
            raise ConstraintError("waypoint frames must be strictly ascending")

    def center_at(self, frame):
        """Interpolated integer center, or None outside the trajectory."""
        wps = self.waypoints
        if frame < wps[0][0] or frame > wps[-1][0]:
            return None
        for (f0, x0, y0), (f1, x1, y1) in zip(wps, wps[1:]):
            if f0 <= frame <= f1:
                if f0 == frame:
                    return (x0, y0)
                t = (frame - f0) / (f1 - f0)
                return (
                    int(np.floor(x0 + t * (x1 - x0) + 0.5)),
                    int(np.floor(y0 + t * (y1 - y0) + 0.5)),
                )
        return (wps[-1][1], wps[-1][2])


@dataclass(frozen=True)
class ScenarioSpec:
    height: int
    width: int
    num_frames: int
    objects: tuple[ObjectSpec, ...]
    ignore_boxes: tuple[Box, ...] = ()
    mask_noise: int = 0
    drop_prob: float = 0.0
    clutter_prob: float = 0.0
    embedding_dim: int = 8
    embedding_noise: float = 0.0
    confidence_range: tuple[float, float] = (0.8, 1.0)
    swap_events: tuple[tuple[int, int, int], ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.num_frames < 1:
            raise ConstraintError("scenario dimensions must be positive")
        for prob in (self.drop_prob, self.clutter_prob):
            if not 0.0 <= prob <= 1.0:
                raise ConstraintError(f"probability {prob} outside [0, 1]")
        lo, hi = self.confidence_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConstraintError(f"bad confidence range {self.confidence_range}")
        if self.mask_noise < 0 or self.embedding_noise < 0:
            raise ConstraintError("noise magnitudes must be non-negative")
        if self.embedding_dim < 0:
            raise ConstraintError("embedding dimension must be non-negative")
        for frame, a, b in self.swap_events:
            valid = range(1, len(self.objects) + 1)
            if a not in valid or b not in valid or a == b:
                raise ConstraintError(f"bad swap event ({frame}, {a}, {b})")


@dataclass
class Scenario:
    """Everything one synthetic sequence provides."""

    spec: ScenarioSpec
    gt: SequenceGroundTruth
    hypotheses: TrackSet
    detections: DetectionSet
    flows: dict[int, FlowField] = field(default_factory=dict)


def _object_box(obj: ObjectSpec, center, height, width) -> Box:
    sh, sw = obj.size
    cx, cy = center
    x_min = cx - (sw - 1) // 2
    y_min = cy - (sh - 1) // 2
    box = Box(x_min, y_min, x_min + sw - 1, y_min + sh - 1)
    try:
        box.check_bounds(height, width)
    except ConstraintError:
        raise ConstraintError(
            f"object trajectory leaves the image at center {center}"
        ) from None
    return box


def _rasterize(obj: ObjectSpec, box: Box, height, width) -> Mask:
    if obj.shape == "box":
        return rasterize_box_fill(box, height, width)
    return rasterize_box_ellipse(box, height, width)


def _perturb_mask(mask: Mask, magnitude: int) -> Mask:
    """Dilate (positive) or erode (negative) within a local crop."""
    if magnitude == 0 or mask.area == 0:
        return mask
    k = abs(magnitude)
    grid = mask.to_dense()
    rows, cols = np.nonzero(grid)
    y0 = max(int(rows.min()) - k, 0)
    y1 = min(int(rows.max()) + k + 1, mask.height)
    x0 = max(int(cols.min()) - k, 0)
    x1 = min(int(cols.max()) + k + 1, mask.width)
    crop = grid[y0:y1, x0:x1]
    if magnitude > 0:
        crop = ndimage.binary_dilation(crop, iterations=k)
    else:
        crop = ndimage.binary_erosion(crop, iterations=k)
    out = np.zeros_like(grid)
    out[y0:y1, x0:x1] = crop
    return Mask.from_dense(out)


def _swap_mapping(swap_events, frame, num_objects):
    mapping = {tid: tid for tid in range(1, num_objects + 1)}
    for event_frame, a, b in swap_events:
        if event_frame <= frame:
            mapping[a], mapping[b] = mapping[b], mapping[a]
    return mapping


def generate(spec: ScenarioSpec, with_flows: bool = True) -> Scenario:
    """Produce ground truth, hypotheses, detections, and flow fields."""
    h, w = spec.height, spec.width
    gt = SequenceGroundTruth()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    bases = {
        idx: rng.standard_normal(spec.embedding_dim)
        for idx in range(len(spec.objects))
    }

    # ground truth with depth-order clipping
    gt_masks: dict[tuple[int, int], Mask] = {}
    for frame in range(spec.num_frames):
        occupied: Mask | None = None
        for idx, obj in enumerate(spec.objects):
            center = obj.center_at(frame)
            if center is None:
                continue
            box = _object_box(obj, center, h, w)
            raw = _rasterize(obj, box, h, w)
            mask = raw if occupied is None else subtract(raw, occupied)
            occupied = raw if occupied is None else union_masks([occupied, raw])
            if mask.area == 0:
                continue
            tid = idx + 1
            gt.objects.setdefault(frame, []).append(
                AnnotationRecord(frame, tid, obj.class_id, mask)
            )
            gt.dims[frame] = (h, w)
            gt_masks[(frame, tid)] = mask
        gt.dims.setdefault(frame, (h, w))
        for k, box in enumerate(spec.ignore_boxes):
            gt.ignore_records.append(AnnotationRecord(
                frame, _IGNORE_ID_BASE + k, CLASS_IGNORE,
                rasterize_box_fill(box, h, w),
            ))

    # flow fields exactly encoding per-object motion on t-1 pixels
    flows: dict[int, FlowField] = {}
    if with_flows:
        for frame in range(1, spec.num_frames):
            u = np.zeros((h, w), dtype=np.float32)
            v = np.zeros((h, w), dtype=np.float32)
            for idx, obj in enumerate(spec.objects):
                prev = obj.center_at(frame - 1)
                cur = obj.center_at(frame)
                mask = gt_masks.get((frame - 1, idx + 1))
                if prev is None or cur is None or mask is None:
                    continue
                pix = mask.pixel_indices()
                rows = pix % h
                cols = pix // h
                u[rows, cols] = cur[0] - prev[0]
                v[rows, cols] = cur[1] - prev[1]
            flows[frame] = FlowField(h, w, u, v)

    # detections (unclipped) and hypothesis tracks (clipped, id-swapped)
    detections = DetectionSet(embedding_dim=spec.embedding_dim)
    hypotheses = TrackSet()
    clutter_count = 0
    for frame in range(spec.num_frames):
        detections.dims[frame] = (h, w)
        hypotheses.dims[frame] = (h, w)
        frame_records: list[tuple[int, Mask, float, np.ndarray | None]] = []
        for idx, obj in enumerate(spec.objects):
            mask = gt_masks.get((frame, idx + 1))
            if mask is None:
                continue
            if spec.drop_prob and rng.random() < spec.drop_prob:
                continue
            if spec.mask_noise:
                magnitude = int(rng.integers(-spec.mask_noise, spec.mask_noise + 1))
                mask = _perturb_mask(mask, magnitude)
                if mask.area == 0:
                    continue
            confidence = float(rng.uniform(*spec.confidence_range))
            embedding = None
            if spec.embedding_dim:
                noise = rng.standard_normal(spec.embedding_dim)
                embedding = bases[idx] + spec.embedding_noise * noise
            frame_records.append((idx + 1, mask, confidence, embedding))
        if spec.clutter_prob and rng.random() < spec.clutter_prob:
            ch = int(rng.integers(1, 4))
            cw = int(rng.integers(1, 4))
            x0 = int(rng.integers(0, w - cw + 1))
            y0 = int(rng.integers(0, h - ch + 1))
            confidence = float(rng.uniform(*spec.confidence_range))
            embedding = None
            if spec.embedding_dim:
                embedding = rng.standard_normal(spec.embedding_dim)
            clutter_count += 1
            frame_records.append((
                _CLUTTER_ID_BASE + clutter_count,
                rasterize_box_fill(Box(x0, y0, x0 + cw - 1, y0 + ch - 1), h, w),
                confidence,
                embedding,
            ))

        mapping = _swap_mapping(spec.swap_events, frame, len(spec.objects))
        claimed: Mask | None = None
        for tid, mask, confidence, embedding in frame_records:
            detections.frames.setdefault(frame, []).append(DetectionRecord(
                frame, _class_for(spec, tid), confidence, mask, embedding
            ))
            clipped = mask if claimed is None else subtract(mask, claimed)
            claimed = mask if claimed is None else union_masks([claimed, mask])
            if clipped.area == 0:
                continue
            hyp_id = mapping.get(tid, tid)
            rec = hypotheses.tracks.get(hyp_id)
            if rec is None:
                rec = TrackRecord(hyp_id, _class_for(spec, tid))
                hypotheses.tracks[hyp_id] = rec
            rec.masks[frame] = clipped

    return Scenario(spec, gt, hypotheses, detections, flows)


def _class_for(spec: ScenarioSpec, track_id: int) -> int:
    if track_id >= _CLUTTER_ID_BASE:
        # clutter alternates over the object classes present
        classes = sorted({o.class_id for o in spec.objects}) or [1]
        return classes[track_id % len(classes)]
    return spec.objects[track_id - 1].class_id


def write_scenario_files(scenario: Scenario, root, name: str) -> dict:
    """Write gt/detections/hypotheses/flow files under ``root``.

    Layout: gt/<name>.txt, det/<name>.txt, hyp/<name>.txt,
    flow/<name>/<t:06d>.flo. Returns the created paths.
    """
    root = Path(root)
    paths = {
        "gt": root / "gt" / f"{name}.txt",
        "detections": root / "det" / f"{name}.txt",
        "hypotheses": root / "hyp" / f"{name}.txt",
        "flow_dir": root / "flow" / name,
    }
    paths["gt"].parent.mkdir(parents=True, exist_ok=True)
    paths["detections"].parent.mkdir(parents=True, exist_ok=True)
    paths["hypotheses"].parent.mkdir(parents=True, exist_ok=True)
    paths["flow_dir"].mkdir(parents=True, exist_ok=True)
    paths["gt"].write_text(write_annotations(scenario.gt))
    paths["detections"].write_text(write_detections(scenario.detections))
    paths["hypotheses"].write_text(write_results(scenario.hypotheses))
    for frame, flow in sorted(scenario.flows.items()):
        (paths["flow_dir"] / flow_filename(frame)).write_bytes(write_flow(flow))
    return paths


# ---------------------------------------------------------------------------
# Canned scenarios
# ---------------------------------------------------------------------------

def separated_objects_spec(num_objects=3, num_frames=6, class_id=1,
                           seed=7, **overrides) -> ScenarioSpec:
    """Well-separated objects drifting right; clean by default."""
    height = 8 * num_objects + 8
    width = 12 + 2 * num_frames
    objects = []
    for i in range(num_objects):
        y = 4 + 8 * i
        objects.append(ObjectSpec(
            class_id=class_id, size=(3, 3),
            waypoints=((0, 3, y), (num_frames - 1, 3 + num_frames - 1, y)),
        ))
    return ScenarioSpec(height=height, width=width, num_frames=num_frames,
                        objects=tuple(objects), seed=seed, **overrides)


def two_object_crossing_spec(class_id=1, seed=11, **overrides) -> ScenarioSpec:
    """Two 1x3 objects on adjacent rows whose x-trajectories meet, then
    diverge with asymmetric jumps.

    At frame 2 the box centers are one pixel apart; on the transition to
    frame 4 object A leaps while object B reverses into A's old spot, so
    center-distance association is forced into the crossed pairing while
    per-track embeddings keep the identities apart.
    """
    a = ObjectSpec(class_id=class_id, size=(1, 3),
                   waypoints=((0, 2, 5), (2, 10, 5), (3, 16, 5), (4, 2, 5)))
    b = ObjectSpec(class_id=class_id, size=(1, 3),
                   waypoints=((0, 20, 6), (2, 10, 6), (3, 6, 6), (4, 17, 6)))
    return ScenarioSpec(height=12, width=28, num_frames=5,
                        objects=(a, b), seed=seed, **overrides)
