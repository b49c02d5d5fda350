"""File formats: annotation/result lines, detection lines, .flo flow
files, and the JSON metric report.

Annotation and result files share one line grammar::

    <frame> <object_id> <class_id> <height> <width> <rle>

single-space separated, ASCII, frames 0-based. Class ids are fixed:
1 = car, 2 = pedestrian, 10 = ignore region; anything else is rejected
so mixed-up files fail loudly. Detection files carry a confidence and an
optional embedding vector::

    <frame> <class_id> <confidence> <height> <width> <rle> <e_1> ... <e_E>

with E inferred from the first line and enforced on the rest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConstraintError, FormatError
from .masks import FlowField, Mask, check_frame_nonoverlap, decode_rle, encode_rle

CLASS_CAR = 1
CLASS_PEDESTRIAN = 2
CLASS_IGNORE = 10
OBJECT_CLASSES = (CLASS_CAR, CLASS_PEDESTRIAN)
KNOWN_CLASSES = frozenset({CLASS_CAR, CLASS_PEDESTRIAN, CLASS_IGNORE})
CLASS_NAMES = {CLASS_CAR: "car", CLASS_PEDESTRIAN: "pedestrian"}
CLASS_IDS_BY_NAME = {name: cid for cid, name in CLASS_NAMES.items()}

FLO_MAGIC = 202021.25


@dataclass(frozen=True)
class AnnotationRecord:
    frame: int
    object_id: int
    class_id: int
    mask: Mask


@dataclass(frozen=True, eq=False)
class DetectionRecord:
    frame: int
    class_id: int
    confidence: float
    mask: Mask
    embedding: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, DetectionRecord):
            return NotImplemented
        if (self.frame, self.class_id, self.confidence, self.mask) != (
            other.frame, other.class_id, other.confidence, other.mask
        ):
            return False
        if self.embedding is None or other.embedding is None:
            return self.embedding is None and other.embedding is None
        return np.array_equal(self.embedding, other.embedding)


@dataclass
class SequenceGroundTruth:
    """Per-frame ground truth: object records plus ignore-region masks."""

    objects: dict[int, list[AnnotationRecord]] = field(default_factory=dict)
    ignore_records: list[AnnotationRecord] = field(default_factory=list)
    dims: dict[int, tuple[int, int]] = field(default_factory=dict)

    def frames(self):
        ignore_frames = {r.frame for r in self.ignore_records}
        return sorted(set(self.objects) | ignore_frames)

    def ignore_masks(self, frame):
        return [r.mask for r in self.ignore_records if r.frame == frame]

    def class_objects(self, frame, class_id):
        return [r for r in self.objects.get(frame, []) if r.class_id == class_id]

    def _canonical(self):
        objs = {
            (r.frame, r.object_id): (r.class_id, r.mask)
            for recs in self.objects.values()
            for r in recs
        }
        ign = sorted(
            (r.frame, r.mask.height, r.mask.width, r.mask.runs)
            for r in self.ignore_records
        )
        return objs, ign

    def __eq__(self, other):
        if not isinstance(other, SequenceGroundTruth):
            return NotImplemented
        return self._canonical() == other._canonical()


@dataclass
class TrackRecord:
    track_id: int
    class_id: int
    masks: dict[int, Mask] = field(default_factory=dict)


@dataclass
class TrackSet:
    """Hypothesis tracks; per-frame masks are non-overlapping."""

    tracks: dict[int, TrackRecord] = field(default_factory=dict)
    dims: dict[int, tuple[int, int]] = field(default_factory=dict)

    def frames(self):
        out = set()
        for t in self.tracks.values():
            out.update(t.masks)
        return sorted(out)

    def frame_entries(self, frame, class_id=None):
        """(track_id, class_id, mask) triples present at a frame."""
        out = []
        for t in sorted(self.tracks.values(), key=lambda t: t.track_id):
            if class_id is not None and t.class_id != class_id:
                continue
            m = t.masks.get(frame)
            if m is not None:
                out.append((t.track_id, t.class_id, m))
        return out

    def _canonical(self):
        return {
            tid: (t.class_id, {f: m for f, m in t.masks.items()})
            for tid, t in self.tracks.items()
        }

    def __eq__(self, other):
        if not isinstance(other, TrackSet):
            return NotImplemented
        return self._canonical() == other._canonical()


@dataclass
class DetectionSet:
    """Detections grouped per frame, input order preserved."""

    frames: dict[int, list[DetectionRecord]] = field(default_factory=dict)
    embedding_dim: int = 0
    dims: dict[int, tuple[int, int]] = field(default_factory=dict)

    def all_frames(self):
        return sorted(self.frames)


def _read_text(source):
    if hasattr(source, "read"):
        return source.read()
    return source


def _int_field(token, what, path, lineno):
    try:
        return int(token)
    except ValueError:
        raise FormatError(f"bad {what} {token!r}", path=path, line=lineno) from None


def _decode_line_mask(h, w, rle, path, lineno):
    try:
        return decode_rle(rle, h, w)
    except FormatError as exc:
        raise FormatError(f"bad RLE field: {exc}", path=path, line=lineno,
                          offset=exc.offset) from None


def _parse_annotation_lines(text, path):
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(" ")
        if len(fields) != 6:
            raise FormatError(
                f"expected 6 fields, got {len(fields)}", path=path, line=lineno
            )
        frame = _int_field(fields[0], "frame", path, lineno)
        object_id = _int_field(fields[1], "object id", path, lineno)
        class_id = _int_field(fields[2], "class id", path, lineno)
        h = _int_field(fields[3], "height", path, lineno)
        w = _int_field(fields[4], "width", path, lineno)
        if frame < 0:
            raise FormatError(f"negative frame {frame}", path=path, line=lineno)
        if object_id <= 0:
            raise FormatError(f"object id must be positive, got {object_id}",
                              path=path, line=lineno)
        if class_id not in KNOWN_CLASSES:
            raise FormatError(f"unknown class id {class_id}", path=path, line=lineno)
        if h < 1 or w < 1:
            raise FormatError(f"bad dimensions {h}x{w}", path=path, line=lineno)
        mask = _decode_line_mask(h, w, fields[5], path, lineno)
        records.append((lineno, AnnotationRecord(frame, object_id, class_id, mask)))
    return records


def _check_frame_dims(dims, frame, mask, path, lineno):
    hw = (mask.height, mask.width)
    if frame in dims and dims[frame] != hw:
        raise ConstraintError(
            f"frame {frame} mixes dimensions {dims[frame]} and {hw}",
            path=path, line=lineno,
        )
    dims[frame] = hw


def _check_nonoverlap(per_frame, path, what="objects"):
    for frame, recs in sorted(per_frame.items()):
        masks = [r.mask for r in recs]
        bad = check_frame_nonoverlap(masks)
        if bad:
            i, j = bad[0]
            raise ConstraintError(
                f"frame {frame}: overlapping {what} {recs[i].object_id} "
                f"and {recs[j].object_id}",
                path=path,
            )


def parse_annotations(source, path=None) -> SequenceGroundTruth:
    """Parse an annotation (or result) file into ground-truth form.

    Enforces unique (frame, object_id) for object classes, non-empty
    object masks, consistent per-frame dimensions and per-frame
    non-overlap across all non-ignore masks.
    """
    text = _read_text(source)
    gt = SequenceGroundTruth()
    seen = {}
    for lineno, rec in _parse_annotation_lines(text, path):
        _check_frame_dims(gt.dims, rec.frame, rec.mask, path, lineno)
        if rec.class_id == CLASS_IGNORE:
            gt.ignore_records.append(rec)
            continue
        key = (rec.frame, rec.object_id)
        if key in seen:
            raise ConstraintError(
                f"duplicate (frame, object id) = {key}, first seen on line {seen[key]}",
                path=path, line=lineno,
            )
        seen[key] = lineno
        if rec.mask.area == 0:
            raise ConstraintError(
                f"empty mask for object {rec.object_id} in frame {rec.frame}",
                path=path, line=lineno,
            )
        gt.objects.setdefault(rec.frame, []).append(rec)
    _check_nonoverlap(gt.objects, path)
    return gt


def parse_results(source, path=None) -> TrackSet:
    """Parse a tracker result file (annotation grammar, no ignore lines)."""
    text = _read_text(source)
    ts = TrackSet()
    seen = {}
    per_frame = {}
    for lineno, rec in _parse_annotation_lines(text, path):
        if rec.class_id == CLASS_IGNORE:
            raise ConstraintError(
                "ignore-region lines are not allowed in result files",
                path=path, line=lineno,
            )
        _check_frame_dims(ts.dims, rec.frame, rec.mask, path, lineno)
        key = (rec.frame, rec.object_id)
        if key in seen:
            raise ConstraintError(
                f"duplicate (frame, object id) = {key}, first seen on line {seen[key]}",
                path=path, line=lineno,
            )
        seen[key] = lineno
        if rec.mask.area == 0:
            raise ConstraintError(
                f"empty mask for track {rec.object_id} in frame {rec.frame}",
                path=path, line=lineno,
            )
        track = ts.tracks.get(rec.object_id)
        if track is None:
            track = TrackRecord(rec.object_id, rec.class_id)
            ts.tracks[rec.object_id] = track
        elif track.class_id != rec.class_id:
            raise ConstraintError(
                f"track {rec.object_id} switches class "
                f"{track.class_id} -> {rec.class_id}",
                path=path, line=lineno,
            )
        track.masks[rec.frame] = rec.mask
        per_frame.setdefault(rec.frame, []).append(rec)
    _check_nonoverlap(per_frame, path, what="tracks")
    return ts


def _annotation_line(frame, object_id, class_id, mask):
    return (
        f"{frame} {object_id} {class_id} {mask.height} {mask.width} "
        f"{encode_rle(mask)}"
    )


def write_annotations(gt: SequenceGroundTruth) -> str:
    """Emit an annotation file, ascending (frame, object_id)."""
    _check_nonoverlap(gt.objects, None)
    records = [r for recs in gt.objects.values() for r in recs]
    records.extend(gt.ignore_records)
    records.sort(key=lambda r: (r.frame, r.object_id, r.class_id, r.mask.runs))
    lines = [_annotation_line(r.frame, r.object_id, r.class_id, r.mask)
             for r in records]
    return "".join(line + "\n" for line in lines)


def write_results(trackset: TrackSet) -> str:
    """Emit a result file; refuses per-frame overlapping masks."""
    per_frame = {}
    for track in trackset.tracks.values():
        for frame, mask in track.masks.items():
            if mask.area == 0:
                raise ConstraintError(
                    f"empty mask for track {track.track_id} in frame {frame}"
                )
            per_frame.setdefault(frame, []).append(
                AnnotationRecord(frame, track.track_id, track.class_id, mask)
            )
    _check_nonoverlap(per_frame, None, what="tracks")
    lines = []
    for frame in sorted(per_frame):
        for rec in sorted(per_frame[frame], key=lambda r: r.object_id):
            lines.append(_annotation_line(rec.frame, rec.object_id,
                                          rec.class_id, rec.mask))
    return "".join(line + "\n" for line in lines)


def parse_detections(source, path=None) -> DetectionSet:
    """Parse a detection file; embedding width inferred from the first line."""
    text = _read_text(source)
    ds = DetectionSet()
    emb_dim = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(" ")
        if len(fields) < 6:
            raise FormatError(
                f"expected at least 6 fields, got {len(fields)}",
                path=path, line=lineno,
            )
        frame = _int_field(fields[0], "frame", path, lineno)
        class_id = _int_field(fields[1], "class id", path, lineno)
        try:
            confidence = float(fields[2])
        except ValueError:
            raise FormatError(f"bad confidence {fields[2]!r}", path=path,
                              line=lineno) from None
        h = _int_field(fields[3], "height", path, lineno)
        w = _int_field(fields[4], "width", path, lineno)
        if frame < 0:
            raise FormatError(f"negative frame {frame}", path=path, line=lineno)
        if class_id not in OBJECT_CLASSES:
            raise FormatError(f"unknown detection class id {class_id}",
                              path=path, line=lineno)
        if not np.isfinite(confidence) or not 0.0 <= confidence <= 1.0:
            raise FormatError(f"confidence {confidence} outside [0, 1]",
                              path=path, line=lineno)
        if h < 1 or w < 1:
            raise FormatError(f"bad dimensions {h}x{w}", path=path, line=lineno)
        mask = _decode_line_mask(h, w, fields[5], path, lineno)
        if mask.area == 0:
            raise ConstraintError(f"empty detection mask", path=path, line=lineno)
        emb_fields = fields[6:]
        if emb_dim is None:
            emb_dim = len(emb_fields)
            ds.embedding_dim = emb_dim
        elif len(emb_fields) != emb_dim:
            raise FormatError(
                f"embedding has {len(emb_fields)} values, expected {emb_dim}",
                path=path, line=lineno,
            )
        if emb_dim:
            try:
                embedding = np.array([float(t) for t in emb_fields], dtype=np.float64)
            except ValueError:
                raise FormatError("bad embedding value", path=path,
                                  line=lineno) from None
            if not np.all(np.isfinite(embedding)):
                raise FormatError("non-finite embedding value", path=path, line=lineno)
        else:
            embedding = None
        _check_frame_dims(ds.dims, frame, mask, path, lineno)
        ds.frames.setdefault(frame, []).append(
            DetectionRecord(frame, class_id, confidence, mask, embedding)
        )
    return ds


def write_detections(ds: DetectionSet) -> str:
    """Emit a detection file, frames ascending, input order within frames."""
    lines = []
    for frame in sorted(ds.frames):
        for d in ds.frames[frame]:
            parts = [
                str(d.frame), str(d.class_id), repr(float(d.confidence)),
                str(d.mask.height), str(d.mask.width), encode_rle(d.mask),
            ]
            if d.embedding is not None:
                parts.extend(repr(float(x)) for x in d.embedding)
            lines.append(" ".join(parts))
    return "".join(line + "\n" for line in lines)


# ---------------------------------------------------------------------------
# Optical flow files (.flo)
# ---------------------------------------------------------------------------

def read_flow(source) -> FlowField:
    """Read a little-endian .flo stream into a FlowField, bit-exact."""
    data = source.read() if hasattr(source, "read") else source
    if len(data) < 12:
        raise FormatError(f"flow header truncated ({len(data)} bytes)", offset=len(data))
    magic = struct.unpack("<f", data[:4])[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"wrong flow magic {magic!r}", offset=0)
    w, h = struct.unpack("<ii", data[4:12])
    if w < 1 or h < 1:
        raise FormatError(f"bad flow dimensions {h}x{w}", offset=4)
    expected = 12 + 8 * h * w
    if len(data) < expected:
        raise FormatError(
            f"flow payload truncated: {len(data)} bytes, expected {expected}",
            offset=len(data),
        )
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes", offset=expected)
    pairs = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w, 2)
    if not np.all(np.isfinite(pairs)):
        raise FormatError("non-finite flow values", offset=12)
    return FlowField(h, w, pairs[:, :, 0], pairs[:, :, 1])


def write_flow(flow: FlowField) -> bytes:
    """Inverse of read_flow; preserves every float bit."""
    header = struct.pack("<fii", FLO_MAGIC, flow.width, flow.height)
    pairs = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    return header + pairs.tobytes()


def flow_filename(frame: int) -> str:
    """Name of the flow file for the transition frame-1 -> frame."""
    return f"{frame:06d}.flo"


def load_flow_dir(directory):
    """Return a frame -> FlowField loader over <frame:06d>.flo files."""
    directory = Path(directory)
    cache = {}

    def loader(frame: int) -> FlowField:
        if frame not in cache:
            path = directory / flow_filename(frame)
            if not path.exists():
                raise FormatError(f"missing flow file {path}")
            cache[frame] = read_flow(path.read_bytes())
        return cache[frame]

    return loader


# ---------------------------------------------------------------------------
# Metric reports
# ---------------------------------------------------------------------------

def write_report(report) -> str:
    """Serialise a metric report as JSON with explicit nulls.

    Accepts either a plain document dict or any object exposing
    ``to_document()``.
    """
    if hasattr(report, "to_document"):
        report = report.to_document()
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_report(text: str) -> dict:
    return json.loads(text)
