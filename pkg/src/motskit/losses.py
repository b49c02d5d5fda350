"""Association losses over labeled embedding sets: batch-hard triplets,
all-triplets, and the contrastive loss, plus their analytic gradients.

Anchors without a positive (same id, different element) or without a
negative are skipped and excluded from the batch-hard mean. The
published all-pairs formulation subtracts a distance from itself and
therefore collapses to the margin; the standard all-triplets form is
used instead, with the literal form kept behind ``as_printed=True`` for
auditability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, UndefinedLossError

LOSS_VARIANTS = ("batch_hard", "batch_all", "contrastive")


@dataclass(frozen=True)
class LabeledEmbeddings:
    """Parallel lists of embedding vectors and track ids with a margin."""

    vectors: np.ndarray
    ids: tuple[int, ...]
    margin: float = 0.2

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise ConstraintError("vectors must form a non-empty (n, d) array")
        if not np.all(np.isfinite(vectors)):
            raise ConstraintError("vectors must be finite")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(self.ids) != vectors.shape[0]:
            raise ConstraintError(
                f"{len(self.ids)} ids for {vectors.shape[0]} vectors"
            )
        if not (math.isfinite(self.margin) and self.margin > 0):
            raise ConstraintError(f"margin must be positive, got {self.margin}")

    def __len__(self):
        return self.vectors.shape[0]


def _distances(vectors):
    diff = vectors[:, None, :] - vectors[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _pair_masks(data):
    ids = np.asarray(data.ids)
    same = ids[:, None] == ids[None, :]
    eye = np.eye(len(data), dtype=bool)
    return same & ~eye, ~same


def batch_hard_loss(data: LabeledEmbeddings) -> float:
    """Mean over valid anchors of
    max(hardest-positive - hardest-negative + margin, 0)."""
    dist = _distances(data.vectors)
    pos, neg = _pair_masks(data)
    valid = pos.any(axis=1) & neg.any(axis=1)
    if not valid.any():
        raise UndefinedLossError(
            "no anchor has both a positive and a negative"
        )
    hardest_pos = np.where(pos, dist, -np.inf).max(axis=1)
    hardest_neg = np.where(neg, dist, np.inf).min(axis=1)
    hinge = np.maximum(hardest_pos - hardest_neg + data.margin, 0.0)
    return float(hinge[valid].mean())


def batch_all_loss(data: LabeledEmbeddings, as_printed: bool = False) -> float:
    """Mean hinge over all valid (anchor, positive, negative) triplets.

    ``as_printed=True`` evaluates the degenerate all-pairs form whose
    hinge argument cancels to the margin; it equals the margin for any
    input and exists only so the two readings can be compared.
    """
    dist = _distances(data.vectors)
    n = len(data)
    if as_printed:
        return float(np.maximum(dist - dist + data.margin, 0.0).sum() / (n * n))
    pos, neg = _pair_masks(data)
    triplet_ok = pos[:, :, None] & neg[:, None, :]
    if not triplet_ok.any():
        raise UndefinedLossError("no valid (anchor, positive, negative) triplet")
    hinges = np.maximum(dist[:, :, None] - dist[:, None, :] + data.margin, 0.0)
    return float(hinges[triplet_ok].mean())


def contrastive_loss(data: LabeledEmbeddings) -> float:
    """Squared distances over same-id ordered pairs plus squared hinge
    over different-id ordered pairs, normalised by the squared batch
    size; self-pairs contribute zero."""
    dist = _distances(data.vectors)
    ids = np.asarray(data.ids)
    same = ids[:, None] == ids[None, :]
    pull = (dist[same] ** 2).sum()
    push = (np.maximum(data.margin - dist[~same], 0.0) ** 2).sum()
    n = len(data)
    return float((pull + push) / (n * n))


@dataclass(frozen=True)
class GradientResult:
    """Analytic gradients per vector plus any non-smoothness findings.

    ``issues`` is empty at smooth points; otherwise it names every
    hinge kink, selection tie, or zero-distance singularity hit, and
    the returned gradients use the documented subgradient choice
    (lowest-index selection, inactive hinge at the boundary).
    """

    gradients: np.ndarray
    issues: tuple[str, ...]

    @property
    def smooth(self) -> bool:
        return not self.issues


def _norm_grad(vectors, a, b, dist_ab, issues, context):
    """d‖v_a − v_b‖ / dv_a, flagging the singular zero-distance case."""
    if dist_ab == 0.0:
        issues.append(f"{context}: zero distance between {a} and {b}")
        return np.zeros(vectors.shape[1])
    return (vectors[a] - vectors[b]) / dist_ab


def _argmax_with_ties(values, mask, pick_max, issues, context):
    idx = np.flatnonzero(mask)
    vals = values[idx]
    best = vals.max() if pick_max else vals.min()
    winners = idx[vals == best]
    if len(winners) > 1:
        issues.append(
            f"{context}: selection tie between indices {winners.tolist()}"
        )
    return int(winners[0]), float(best)


def loss_gradient(variant: str, data: LabeledEmbeddings,
                  as_printed: bool = False) -> GradientResult:
    """Analytic gradient of one loss with respect to every vector."""
    if variant not in LOSS_VARIANTS:
        raise ConstraintError(f"unknown loss variant {variant!r}")
    if variant == "batch_all" and as_printed:
        # constant in the vectors
        return GradientResult(np.zeros_like(data.vectors), ())
    vectors = data.vectors
    n, dim = vectors.shape
    dist = _distances(vectors)
    pos, neg = _pair_masks(data)
    grads = np.zeros_like(vectors)
    issues: list[str] = []

    if variant == "batch_hard":
        valid = np.flatnonzero(pos.any(axis=1) & neg.any(axis=1))
        if valid.size == 0:
            raise UndefinedLossError("no anchor has both a positive and a negative")
        for a in valid:
            p, dp = _argmax_with_ties(dist[a], pos[a], True, issues,
                                      f"anchor {a} positive")
            q, dq = _argmax_with_ties(dist[a], neg[a], False, issues,
                                      f"anchor {a} negative")
            h = dp - dq + data.margin
            if h == 0.0:
                issues.append(f"anchor {a}: hinge exactly at the kink")
            if h <= 0.0:
                continue
            gp = _norm_grad(vectors, a, p, dp, issues, f"anchor {a} positive")
            gq = _norm_grad(vectors, a, q, dq, issues, f"anchor {a} negative")
            grads[a] += gp - gq
            grads[p] -= gp
            grads[q] += gq
        grads /= valid.size
    elif variant == "batch_all":
        triplet_ok = pos[:, :, None] & neg[:, None, :]
        count = int(triplet_ok.sum())
        if count == 0:
            raise UndefinedLossError("no valid (anchor, positive, negative) triplet")
        for a, p, q in zip(*np.nonzero(triplet_ok)):
            h = dist[a, p] - dist[a, q] + data.margin
            if h == 0.0:
                issues.append(f"triplet ({a},{p},{q}): hinge exactly at the kink")
            if h <= 0.0:
                continue
            gp = _norm_grad(vectors, a, p, dist[a, p], issues,
                            f"triplet ({a},{p},{q}) positive")
            gq = _norm_grad(vectors, a, q, dist[a, q], issues,
                            f"triplet ({a},{p},{q}) negative")
            grads[a] += gp - gq
            grads[p] -= gp
            grads[q] += gq
        grads /= count
    else:
        ids = np.asarray(data.ids)
        same = ids[:, None] == ids[None, :]
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                if same[a, b]:
                    step = 2.0 * (vectors[a] - vectors[b])
                    grads[a] += step
                    grads[b] -= step
                else:
                    gap = data.margin - dist[a, b]
                    if gap == 0.0:
                        issues.append(f"pair ({a},{b}): hinge exactly at the kink")
                    if gap <= 0.0:
                        continue
                    g = _norm_grad(vectors, a, b, dist[a, b], issues,
                                   f"pair ({a},{b})")
                    grads[a] -= 2.0 * gap * g
                    grads[b] += 2.0 * gap * g
        grads /= n * n
    return GradientResult(grads, tuple(issues))
