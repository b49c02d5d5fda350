"""Tracking by detection: confidence gating, Hungarian assignment of
detections to recent track heads, track creation, and cross-class
overlap resolution by confidence.

The assignment contract is stricter than a plain minimum-cost matching:
among feasible pairs the solver first maximises the number of matched
pairs, then minimises total cost, and breaks remaining ties by the
lexicographically smallest sorted (row, column) pair list. Ties are
resolved with exact rational arithmetic, so results are reproducible
across platforms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import MECHANISMS, AssociationMechanism, build_cost_matrix
from .errors import ConstraintError, MotsError
from .io import DetectionRecord, DetectionSet, TrackRecord, TrackSet
from .masks import subtract, union_masks


@dataclass(frozen=True)
class TrackerConfig:
    """Per-class linking thresholds.

    gamma gates detection confidence (strictly greater survives), beta
    is the maximum age in frames of a matchable track head, delta the
    association threshold in the mechanism's units.
    """

    class_id: int
    gamma: float
    beta: int
    delta: float
    mechanism: str = "embedding"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConstraintError(f"gamma {self.gamma} outside [0, 1]")
        if self.beta < 1:
            raise ConstraintError(f"beta must be >= 1, got {self.beta}")
        if self.mechanism not in MECHANISMS:
            raise ConstraintError(f"unknown mechanism {self.mechanism!r}")
        if self.mechanism != "embedding" and self.beta != 1:
            raise ConstraintError(
                f"{self.mechanism} association links adjacent frames only; "
                f"beta must be 1, got {self.beta}"
            )
        # validates delta against the mechanism's range
        self.association

    @property
    def association(self) -> AssociationMechanism:
        return AssociationMechanism(self.mechanism, self.delta)


@dataclass
class Track:
    """One hypothesis track: detections at strictly increasing frames."""

    track_id: int
    class_id: int
    entries: list[tuple[int, DetectionRecord]] = field(default_factory=list)

    @property
    def last_frame(self) -> int:
        return self.entries[-1][0]

    @property
    def head(self) -> DetectionRecord:
        return self.entries[-1][1]

    def extend(self, frame: int, det: DetectionRecord):
        if self.entries and frame <= self.last_frame:
            raise ConstraintError(
                f"track {self.track_id}: frame {frame} not after {self.last_frame}"
            )
        self.entries.append((frame, det))


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def _scipy_opt(cost, feasible, rows, cols):
    """(cardinality, exact total cost) of the best matching on a
    row/column subset: maximum number of feasible pairs first, then
    minimum cost. Also returns the chosen pairs."""
    if len(rows) == 0 or len(cols) == 0:
        return 0, Fraction(0), []
    sub_cost = cost[np.ix_(rows, cols)]
    sub_feas = feasible[np.ix_(rows, cols)]
    if not sub_feas.any():
        return 0, Fraction(0), []
    # Shift feasible cells down by a dominating constant so the solver
    # prefers more feasible pairs before comparing their costs.
    shift = float(int(np.ceil(np.abs(sub_cost[sub_feas]).sum())) * 2 + 1)
    trans = np.where(sub_feas, sub_cost - shift, 0.0)
    ridx, cidx = linear_sum_assignment(trans)
    pairs = [
        (rows[r], cols[c]) for r, c in zip(ridx, cidx) if sub_feas[r, c]
    ]
    total = sum((Fraction(float(cost[r, c])) for r, c in pairs), Fraction(0))
    return len(pairs), total, pairs


def solve_assignment(cost, feasible=None) -> dict[int, int]:
    """Deterministic partial assignment over the feasible cells.

    Returns a row -> column map that (1) matches as many feasible pairs
    as possible, (2) has minimum total cost among those, and (3) is the
    lexicographically smallest sorted pair list among remaining optima.
    Tie comparisons are exact for costs on a dyadic grid (integers or
    any floats whose sums stay exact); otherwise a relative-tolerance
    pass keeps the result deterministic.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ConstraintError("cost matrix must be 2-D")
    if feasible is None:
        feasible = np.ones(cost.shape, dtype=bool)
    else:
        feasible = np.asarray(feasible, dtype=bool)
        if feasible.shape != cost.shape:
            raise ConstraintError("feasibility mask shape differs from costs")
    n, m = cost.shape
    if n == 0 or m == 0 or not feasible.any():
        return {}
    if not np.all(np.isfinite(cost[feasible])):
        raise ConstraintError("feasible cells must have finite costs")
    all_rows = np.arange(n)
    all_cols = np.arange(m)
    target_card, target_cost, _ = _scipy_opt(cost, feasible, all_rows, all_cols)

    for exact in (True, False):
        assignment = _reconstruct(cost, feasible, target_card, target_cost, exact)
        if assignment is not None:
            return assignment
    raise MotsError("assignment reconstruction failed")  # pragma: no cover


def _reconstruct(cost, feasible, target_card, target_cost, exact):
    n, m = cost.shape
    assignment: dict[int, int] = {}
    used: set[int] = set()
    fixed = Fraction(0)
    for r in range(n):
        if len(assignment) == target_card:
            break
        rest_rows = np.arange(r + 1, n)
        for c in range(m):
            if c in used or not feasible[r, c]:
                continue
            rest_cols = np.array([j for j in range(m) if j not in used and j != c],
                                 dtype=int)
            sub_card, sub_cost, _ = _scipy_opt(cost, feasible, rest_rows, rest_cols)
            if len(assignment) + 1 + sub_card != target_card:
                continue
            candidate = fixed + Fraction(float(cost[r, c])) + sub_cost
            if exact:
                ok = candidate == target_cost
            else:
                ok = abs(float(candidate - target_cost)) <= 1e-9 * (
                    1.0 + abs(float(target_cost))
                )
            if ok:
                assignment[r] = c
                used.add(c)
                fixed += Fraction(float(cost[r, c]))
                break
    if len(assignment) != target_card:
        return None
    return assignment


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------

def link_step(tracks, frame, detections, config: TrackerConfig,
              flow=None, id_allocator=None):
    """Advance one class by one frame.

    Detections at ``frame`` with confidence strictly above gamma are
    matched against heads of tracks last seen within beta frames; every
    unmatched survivor starts a new track via ``id_allocator``.
    Mutates and returns ``tracks``.
    """
    if id_allocator is None:
        counter = itertools.count(1)
        id_allocator = lambda: next(counter)  # noqa: E731
    survivors = [
        d for d in detections
        if d.class_id == config.class_id and d.confidence > config.gamma
    ]
    heads = []
    for t in tracks:
        age = frame - t.last_frame
        if 1 <= age <= config.beta:
            heads.append((t, age))
    matched_det: dict[int, int] = {}
    if heads and survivors:
        cost, feasible = build_cost_matrix(
            [(t.head, age) for t, age in heads], survivors,
            config.association, flow,
        )
        assignment = solve_assignment(cost, feasible)
        for i, j in assignment.items():
            heads[i][0].extend(frame, survivors[j])
            matched_det[j] = i
    for j, det in enumerate(survivors):
        if j in matched_det:
            continue
        track = Track(id_allocator(), config.class_id)
        track.extend(frame, det)
        tracks.append(track)
    return tracks


def resolve_overlaps(entries):
    """Clip per-frame masks so higher-confidence detections keep their
    pixels; drops detections whose mask becomes empty.

    ``entries`` is a list of (track_id, class_id, confidence, mask);
    ties sort by lower track id, then lower class id. Returns the
    surviving (track_id, class_id, mask) triples.
    """
    order = sorted(entries, key=lambda e: (-e[2], e[0], e[1]))
    out = []
    claimed = None
    for track_id, class_id, _, mask in order:
        if claimed is None:
            clipped = mask
        else:
            clipped = subtract(mask, claimed)
        if clipped.area == 0:
            continue
        out.append((track_id, class_id, clipped))
        claimed = mask if claimed is None else union_masks([claimed, mask])
    return out


def run_tracker(detections: DetectionSet, configs, flow_for_frame=None) -> TrackSet:
    """Link all frames per class, then resolve overlaps across classes.

    ``configs`` maps class ids to TrackerConfig (or is an iterable of
    configs). ``flow_for_frame`` is a frame -> FlowField callable,
    required only by flow-based mechanisms. Track ids are allocated as
    class_id * 100000 + n from per-class monotone counters, which keeps
    them unique across classes in the output files.
    """
    if not isinstance(configs, dict):
        configs = {c.class_id: c for c in configs}
    for cid, cfg in configs.items():
        if cfg.class_id != cid:
            raise ConstraintError(f"config keyed {cid} is for class {cfg.class_id}")
    needs_flow = any(cfg.association.needs_flow for cfg in configs.values())
    if needs_flow and flow_for_frame is None:
        raise ConstraintError("configured mechanisms require a flow source")

    class_tracks: dict[int, list[Track]] = {cid: [] for cid in configs}
    counters = {cid: itertools.count(1) for cid in configs}
    frames = detections.all_frames()
    for frame in frames:
        frame_dets = detections.frames.get(frame, [])
        for cid, cfg in sorted(configs.items()):
            dets = [d for d in frame_dets if d.class_id == cid]
            flow = None
            if (
                cfg.association.needs_flow
                and any(d.confidence > cfg.gamma for d in dets)
                and any(1 <= frame - t.last_frame <= cfg.beta
                        for t in class_tracks[cid])
            ):
                flow = flow_for_frame(frame)
            allocator = lambda c=cid: c * 100000 + next(counters[c])  # noqa: E731
            link_step(class_tracks[cid], frame, dets, cfg, flow, allocator)

    per_frame: dict[int, list] = {}
    for cid, tracks in class_tracks.items():
        for t in tracks:
            for frame, det in t.entries:
                per_frame.setdefault(frame, []).append(
                    (t.track_id, t.class_id, det.confidence, det.mask)
                )
    result = TrackSet(dims=dict(detections.dims))
    for frame in sorted(per_frame):
        for track_id, class_id, mask in resolve_overlaps(per_frame[frame]):
            rec = result.tracks.get(track_id)
            if rec is None:
                rec = TrackRecord(track_id, class_id)
                result.tracks[track_id] = rec
            rec.masks[frame] = mask
    return result
