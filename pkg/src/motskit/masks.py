"""Binary pixel masks as run-length lists, plus all mask geometry.

A mask is stored as alternating run counts in column-major pixel order,
starting with a background run (which may be zero). All set operations
(intersection, union, subtraction, IoU) work directly on the run lists;
nothing in this module ever materialises a full height-by-width bitmap
except the explicit ``to_dense``/``from_dense`` converters used by tests
and generators.

The string codec is the widely used compressed-RLE interchange: counts
are delta-encoded against the count two positions earlier (from the
fourth count on) and written low-bits-first in 6-bit words, bit 5 acting
as a continuation flag and bit 4 of the final word as the sign bit; each
word maps to ASCII by adding 48.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConstraintError, FormatError

# Run counts are 64-bit; images up to 2**20 x 2**20 are representable.
_MAX_COUNT = 2**63 - 1


def _canonical_counts(counts, height, width):
    """Merge zero runs and validate the alternation/sum invariants."""
    if not counts:
        raise ConstraintError("run list must not be empty")
    out = [int(counts[0])]
    parity = 0
    for i in range(1, len(counts)):
        c = int(counts[i])
        if c < 0:
            raise ConstraintError(f"negative run count {c}")
        if c == 0:
            continue
        p = i % 2
        if p == parity:
            out[-1] += c
        else:
            out.append(c)
            parity = p
    if out[0] < 0:
        raise ConstraintError(f"negative run count {out[0]}")
    total = sum(out)
    if total != height * width:
        raise ConstraintError(
            f"run counts sum to {total}, expected {height * width} "
            f"for a {height}x{width} mask"
        )
    return tuple(out)


@dataclass(frozen=True)
class Mask:
    """Immutable binary mask over a ``height`` x ``width`` pixel grid.

    ``runs`` holds canonical alternating counts (background first): the
    first count may be zero, every later count is positive, and the
    counts sum to ``height * width``.
    """

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConstraintError(
                f"mask dimensions must be positive, got {self.height}x{self.width}"
            )
        if not isinstance(self.runs, tuple):
            object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        if self.runs[0] < 0 or any(r <= 0 for r in self.runs[1:]):
            raise ConstraintError(f"non-canonical run list {self.runs!r}")
        if max(self.runs) > _MAX_COUNT:
            raise ConstraintError("run count exceeds 64-bit range")
        total = sum(self.runs)
        if total != self.height * self.width:
            raise ConstraintError(
                f"run counts sum to {total}, expected {self.height * self.width}"
            )

    @classmethod
    def from_counts(cls, counts, height, width):
        """Build a canonical mask from a possibly non-canonical count list."""
        return cls(height, width, _canonical_counts(counts, height, width))

    @classmethod
    def empty(cls, height, width):
        return cls(height, width, (height * width,))

    @classmethod
    def full(cls, height, width):
        return cls(height, width, (0, height * width))

    @classmethod
    def from_dense(cls, grid):
        """Build a mask from a (height, width) boolean array."""
        grid = np.asarray(grid, dtype=bool)
        if grid.ndim != 2:
            raise ConstraintError("dense grid must be 2-D")
        h, w = grid.shape
        flat = grid.ravel(order="F")
        if flat.size == 0:
            raise ConstraintError("dense grid must be non-degenerate")
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        counts = np.diff(bounds).tolist()
        if flat[0]:
            counts = [0] + counts
        return cls(h, w, tuple(int(c) for c in counts))

    def to_dense(self):
        """Expand to a (height, width) boolean array (tests/generators only)."""
        flags = np.zeros(len(self.runs), dtype=bool)
        flags[1::2] = True
        flat = np.repeat(flags, np.asarray(self.runs, dtype=np.int64))
        return flat.reshape((self.height, self.width), order="F")

    @cached_property
    def _intervals(self):
        """Foreground half-open intervals (starts, ends) in linear order."""
        cum = np.cumsum(np.asarray(self.runs, dtype=np.int64))
        starts = cum[0::2]
        ends = cum[1::2]
        starts = starts[: len(ends)]
        return starts, ends

    @cached_property
    def area(self) -> int:
        return int(sum(self.runs[1::2]))

    @cached_property
    def _span(self):
        """(first set pixel, one past last set pixel) or None if empty."""
        starts, ends = self._intervals
        if len(ends) == 0:
            return None
        return int(starts[0]), int(ends[-1])

    def pixel_indices(self):
        """Sorted linear (column-major) indices of all set pixels."""
        starts, ends = self._intervals
        if len(ends) == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(
            [np.arange(s, e, dtype=np.int64) for s, e in zip(starts, ends)]
        )


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement field.

    ``u`` is horizontal (columns) and ``v`` vertical (rows) displacement
    in pixels, each a finite float array of shape (height, width).
    """

    height: int
    width: int
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("u", "v"):
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            if arr.shape != (self.height, self.width):
                raise ConstraintError(
                    f"flow component {name} has shape {arr.shape}, "
                    f"expected {(self.height, self.width)}"
                )
            if not np.all(np.isfinite(arr)):
                raise ConstraintError(f"flow component {name} contains non-finite values")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, height, width):
        return cls(height, width, np.zeros((height, width), np.float32),
                   np.zeros((height, width), np.float32))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with inclusive integer pixel coordinates."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ConstraintError(f"degenerate box {self}")

    @property
    def center(self):
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def check_bounds(self, height, width):
        if self.x_min < 0 or self.y_min < 0 or self.x_max >= width or self.y_max >= height:
            raise ConstraintError(
                f"box {self} outside {height}x{width} image bounds"
            )


# ---------------------------------------------------------------------------
# Compressed-RLE string codec
# ---------------------------------------------------------------------------

def decode_rle(encoded: str, height: int, width: int) -> Mask:
    """Decode a compressed-RLE string into a canonical mask.

    Raises FormatError (naming the byte offset) for characters outside
    the 6-bit alphabet, truncated or overlong values, negative counts
    after delta reconstruction, or a count sum that does not cover the
    image.
    """
    counts = []
    i = 0
    n = len(encoded)
    while i < n:
        x = 0
        k = 0
        start = i
        while True:
            if i >= n:
                raise FormatError("truncated run count", offset=start)
            c = ord(encoded[i]) - 48
            if c < 0 or c > 63:
                raise FormatError(
                    f"character {encoded[i]!r} outside RLE alphabet", offset=i
                )
            x |= (c & 0x1F) << (5 * k)
            i += 1
            k += 1
            if not (c & 0x20):
                if c & 0x10:
                    x |= -1 << (5 * k)
                break
            if 5 * k > 70:
                raise FormatError("run count overflows 64 bits", offset=start)
        if len(counts) > 2:
            x += counts[-2]
        if x < 0:
            raise FormatError(f"negative run count {x}", offset=start)
        if x > _MAX_COUNT:
            raise FormatError("run count overflows 64 bits", offset=start)
        counts.append(x)
    if not counts:
        raise FormatError("empty RLE string", offset=0)
    total = sum(counts)
    if total != height * width:
        raise FormatError(
            f"run counts sum to {total}, expected {height * width}", offset=n
        )
    return Mask.from_counts(counts, height, width)


def encode_rle(mask: Mask) -> str:
    """Encode a canonical mask as a compressed-RLE string (bit-exact
    with the common interchange format)."""
    counts = mask.runs
    out = []
    for i, c in enumerate(counts):
        x = c - counts[i - 2] if i > 2 else c
        while True:
            word = x & 0x1F
            x >>= 5
            more = (x != -1) if (word & 0x10) else (x != 0)
            if more:
                word |= 0x20
            out.append(chr(word + 48))
            if not more:
                break
    return "".join(out)


# ---------------------------------------------------------------------------
# Run-native set operations
# ---------------------------------------------------------------------------

def _require_same_dims(a: Mask, b: Mask):
    if a.height != b.height or a.width != b.width:
        raise ConstraintError(
            f"mask dimensions differ: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def _segment_membership(pts, starts, ends):
    """For each segment [pts[i], pts[i+1]) report coverage by the intervals."""
    probes = pts[:-1]
    return (
        np.searchsorted(starts, probes, side="right")
        - np.searchsorted(ends, probes, side="right")
    ) == 1


def intersection_count(a: Mask, b: Mask) -> int:
    """Number of pixels set in both masks, computed on run lists."""
    _require_same_dims(a, b)
    sa = a._span
    sb = b._span
    if sa is None or sb is None:
        return 0
    if sa[0] >= sb[1] or sb[0] >= sa[1]:
        return 0
    astarts, aends = a._intervals
    bstarts, bends = b._intervals
    pts = np.unique(np.concatenate((astarts, aends, bstarts, bends)))
    seg = np.diff(pts)
    both = _segment_membership(pts, astarts, aends) & _segment_membership(
        pts, bstarts, bends
    )
    return int(seg[both].sum())


def iou(a: Mask, b: Mask) -> float:
    """Mask intersection-over-union; 0.0 when both masks are empty."""
    inter = intersection_count(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def _mask_from_canonical_runs(height, width, runs):
    """Fast path for runs already known to be canonical."""
    mask = object.__new__(Mask)
    object.__setattr__(mask, "height", height)
    object.__setattr__(mask, "width", width)
    object.__setattr__(mask, "runs", runs)
    return mask


def _merge_intervals(starts, ends):
    """Coalesce sorted intervals that overlap or touch."""
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    if starts.size <= 1:
        return starts, ends
    reach = np.maximum.accumulate(ends)
    new_group = np.concatenate(([True], starts[1:] > reach[:-1]))
    idx = np.flatnonzero(new_group)
    group_ends = np.concatenate((idx[1:], [starts.size])) - 1
    return starts[idx], reach[group_ends]


def _intervals_to_mask(starts, ends, height, width):
    """Build a mask from sorted intervals (overlap and adjacency allowed)."""
    total = height * width
    starts, ends = _merge_intervals(starts, ends)
    if starts.size == 0:
        return _mask_from_canonical_runs(height, width, (total,))
    lengths = ends - starts
    gaps = np.empty_like(starts)
    gaps[0] = starts[0]
    gaps[1:] = starts[1:] - ends[:-1]
    runs = np.empty(2 * starts.size, dtype=np.int64)
    runs[0::2] = gaps
    runs[1::2] = lengths
    tail = total - int(ends[-1])
    out = runs.tolist()
    if tail:
        out.append(tail)
    return _mask_from_canonical_runs(height, width, tuple(out))


def subtract(a: Mask, b: Mask) -> Mask:
    """Pixels of ``a`` not in ``b``."""
    _require_same_dims(a, b)
    if a._span is None or b._span is None or intersection_count(a, b) == 0:
        return a
    astarts, aends = a._intervals
    bstarts, bends = b._intervals
    pts = np.unique(np.concatenate((astarts, aends, bstarts, bends)))
    seg_keep = _segment_membership(pts, astarts, aends) & ~_segment_membership(
        pts, bstarts, bends
    )
    keep = np.flatnonzero(seg_keep)
    return _intervals_to_mask(pts[keep], pts[keep + 1], a.height, a.width)


def union_masks(masks, height=None, width=None) -> Mask:
    """Union of a list of same-sized masks (empty list needs dims)."""
    masks = list(masks)
    if not masks:
        if height is None or width is None:
            raise ConstraintError("union of no masks needs explicit dimensions")
        return Mask.empty(height, width)
    first = masks[0]
    for m in masks[1:]:
        _require_same_dims(first, m)
    starts = np.concatenate([m._intervals[0] for m in masks])
    ends = np.concatenate([m._intervals[1] for m in masks])
    if len(starts) == 0:
        return Mask.empty(first.height, first.width)
    order = np.argsort(starts, kind="stable")
    return _intervals_to_mask(starts[order], ends[order],
                              first.height, first.width)


def check_frame_nonoverlap(masks) -> list[tuple[int, int]]:
    """Index pairs of masks sharing at least one pixel (empty if disjoint)."""
    masks = list(masks)
    for m in masks[1:]:
        _require_same_dims(masks[0], m)
    violations = []
    spans = [m._span for m in masks]
    for i in range(len(masks)):
        if spans[i] is None:
            continue
        for j in range(i + 1, len(masks)):
            if spans[j] is None:
                continue
            if spans[i][0] >= spans[j][1] or spans[j][0] >= spans[i][1]:
                continue
            if intersection_count(masks[i], masks[j]) > 0:
                violations.append((i, j))
    return violations


# ---------------------------------------------------------------------------
# Warping and boxes
# ---------------------------------------------------------------------------

def _round_away_from_zero(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def warp(mask: Mask, flow: FlowField) -> Mask:
    """Forward-warp a mask by a flow field.

    Every set pixel (x, y) moves to (round(x + u), round(y + v)) with
    half-integers rounded away from zero; targets outside the image are
    dropped and collisions collapse to a single set pixel.
    """
    if mask.height != flow.height or mask.width != flow.width:
        raise ConstraintError(
            f"mask {mask.height}x{mask.width} vs flow {flow.height}x{flow.width}"
        )
    idx = mask.pixel_indices()
    if idx.size == 0:
        return Mask.empty(mask.height, mask.width)
    h = mask.height
    cols = idx // h
    rows = idx % h
    tx = _round_away_from_zero(cols + flow.u[rows, cols].astype(np.float64))
    ty = _round_away_from_zero(rows + flow.v[rows, cols].astype(np.float64))
    valid = (tx >= 0) & (tx < mask.width) & (ty >= 0) & (ty < h)
    if not valid.any():
        return Mask.empty(mask.height, mask.width)
    lin = np.unique(tx[valid].astype(np.int64) * h + ty[valid].astype(np.int64))
    breaks = np.flatnonzero(np.diff(lin) > 1)
    starts = lin[np.concatenate(([0], breaks + 1))]
    ends = lin[np.concatenate((breaks, [lin.size - 1]))] + 1
    return _intervals_to_mask(starts, ends, mask.height, mask.width)


def bbox_of(mask: Mask) -> Box:
    """Tight bounding box of the set pixels; rejects empty masks."""
    if mask.area == 0:
        raise ConstraintError("empty mask has no bounding box")
    starts, ends = mask._intervals
    h = mask.height
    col_s = starts // h
    col_e = (ends - 1) // h
    multi = col_e > col_s
    x_min = int(col_s[0])
    x_max = int(col_e[-1])
    y_min = int(np.min(np.where(multi, 0, starts % h)))
    y_max = int(np.max(np.where(multi, h - 1, (ends - 1) % h)))
    return Box(x_min, y_min, x_max, y_max)


def rasterize_box_fill(box: Box, height: int, width: int) -> Mask:
    """Filled rectangle mask for an in-bounds box."""
    box.check_bounds(height, width)
    starts = []
    ends = []
    for x in range(box.x_min, box.x_max + 1):
        starts.append(x * height + box.y_min)
        ends.append(x * height + box.y_max + 1)
    return _intervals_to_mask(starts, ends, height, width)


def rasterize_box_ellipse(box: Box, height: int, width: int) -> Mask:
    """Mask of the axis-aligned ellipse inscribed in a box.

    A pixel is set iff its center lies inside or on the ellipse
    inscribed in the continuous rectangle spanned by the box; the test
    is evaluated in exact integer arithmetic.
    """
    box.check_bounds(height, width)
    bw = box.x_max - box.x_min + 1
    bh = box.y_max - box.y_min + 1
    starts = []
    ends = []
    for x in range(box.x_min, box.x_max + 1):
        t = 2 * (x - box.x_min) + 1 - bw
        limit = math.isqrt(bh * bh * (bw * bw - t * t)) // bw
        # row offsets u = 2*(y - y_min) + 1 - bh share bh's parity flip
        u_lo = -limit
        if (u_lo - (1 - bh)) % 2 != 0:
            u_lo += 1
        u_hi = limit
        if (u_hi - (1 - bh)) % 2 != 0:
            u_hi -= 1
        if u_lo > u_hi:
            continue
        y_lo = (u_lo - 1 + bh) // 2 + box.y_min
        y_hi = (u_hi - 1 + bh) // 2 + box.y_min
        starts.append(x * height + y_lo)
        ends.append(x * height + y_hi + 1)
    return _intervals_to_mask(starts, ends, height, width)
