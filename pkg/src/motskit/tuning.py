"""Per-class random search over (gamma, beta, delta) maximising the
soft tracking score on training sequences.

Sampling is reproducible across platforms: iteration ``i`` draws from
``numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(i,))))``
in the fixed order gamma, beta, delta, so a fixed seed always yields
the same trace and winner, and iterations are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError
from .io import DetectionSet, SequenceGroundTruth
from .linker import TrackerConfig, run_tracker
from .metrics import aggregate, compute_metrics, evaluate_sequence

OBJECTIVES = ("smotsa", "motsa")

_DELTA_DEFAULTS = {
    "embedding": (0.0, 20.0),
    "mask_iou": (0.0, 1.0),
    "bbox_iou": (0.0, 1.0),
}


@dataclass(frozen=True)
class SearchSpace:
    """Ranges (or explicit value grids) for the three thresholds.

    ``delta_range=None`` picks a mechanism default: [0, 20] for
    embedding distance, [0, 1] for the IoU scores, and [0, image
    diagonal] for center distance. Non-embedding mechanisms force
    beta = 1 regardless of the beta range.
    """

    mechanism: str = "embedding"
    gamma_range: tuple[float, float] = (0.0, 1.0)
    beta_range: tuple[int, int] = (1, 30)
    delta_range: tuple[float, float] | None = None
    gamma_values: tuple[float, ...] | None = None
    beta_values: tuple[int, ...] | None = None
    delta_values: tuple[float, ...] | None = None
    iterations: int = 1000
    seed: int = 0
    objective: str = "smotsa"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConstraintError("iterations must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ConstraintError(f"unknown objective {self.objective!r}")
        if self.gamma_range[0] > self.gamma_range[1]:
            raise ConstraintError(f"empty gamma range {self.gamma_range}")
        if self.beta_range[0] > self.beta_range[1]:
            raise ConstraintError(f"empty beta range {self.beta_range}")
        if self.delta_range is not None and self.delta_range[0] > self.delta_range[1]:
            raise ConstraintError(f"empty delta range {self.delta_range}")
        for values in (self.gamma_values, self.beta_values, self.delta_values):
            if values is not None and len(values) == 0:
                raise ConstraintError("explicit value grid must be non-empty")


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    gamma: float
    beta: int
    delta: float
    score: float | None


@dataclass
class TuneResult:
    best_config: TrackerConfig
    best_score: float
    best_iteration: int
    objective: str
    trace: list[TraceEntry] = field(default_factory=list)


@dataclass
class TuneSequence:
    """One training sequence: ground truth, detections, optional flow."""

    gt: SequenceGroundTruth
    detections: DetectionSet
    flow_for_frame: object = None
    name: str = ""


def _image_diagonal(sequences):
    best = 0.0
    for seq in sequences:
        for h, w in list(seq.gt.dims.values()) + list(seq.detections.dims.values()):
            best = max(best, math.hypot(h, w))
    return best if best > 0 else 1.0


def _resolve_delta_range(space, sequences):
    if space.delta_range is not None:
        return space.delta_range
    if space.mechanism in _DELTA_DEFAULTS:
        return _DELTA_DEFAULTS[space.mechanism]
    return (0.0, _image_diagonal(sequences))


def _sample(rng, values, lo, hi, integer=False):
    if values is not None:
        return values[int(rng.integers(0, len(values)))]
    if integer:
        return int(rng.integers(lo, hi + 1))
    return float(rng.uniform(lo, hi))


def evaluate_config(sequences, config: TrackerConfig, ignore_threshold=0.5,
                    id_switch_mode="motchallenge"):
    """Track every sequence with one config and aggregate the counts."""
    counts = []
    for seq in sequences:
        hyps = run_tracker(seq.detections, {config.class_id: config},
                           seq.flow_for_frame)
        counts.append(evaluate_sequence(
            seq.gt, hyps, config.class_id,
            ignore_threshold=ignore_threshold, id_switch_mode=id_switch_mode,
        ))
    return aggregate(counts)


def random_search(sequences, space: SearchSpace, class_id,
                  ignore_threshold=0.5,
                  id_switch_mode="motchallenge") -> TuneResult:
    """Sample configurations and keep the best by the chosen objective.

    Ties keep the earliest iteration; an undefined objective for every
    sample (e.g. no ground truth of the class) is an error.
    """
    sequences = list(sequences)
    delta_lo, delta_hi = _resolve_delta_range(space, sequences)
    beta_lo, beta_hi = space.beta_range
    beta_values = space.beta_values
    if space.mechanism != "embedding":
        beta_lo = beta_hi = 1
        beta_values = None

    trace: list[TraceEntry] = []
    best = None  # (score, iteration, config)
    for i in range(space.iterations):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=space.seed, spawn_key=(i,))
        )
        gamma = _sample(rng, space.gamma_values, *space.gamma_range)
        beta = _sample(rng, beta_values, beta_lo, beta_hi, integer=True)
        delta = _sample(rng, space.delta_values, delta_lo, delta_hi)
        config = TrackerConfig(class_id, gamma, beta, delta, space.mechanism)
        total = evaluate_config(sequences, config, ignore_threshold,
                                id_switch_mode)
        motsa, _, smotsa = compute_metrics(total)
        score = smotsa if space.objective == "smotsa" else motsa
        trace.append(TraceEntry(i, gamma, beta, delta, score))
        if score is not None and (best is None or score > best[0]):
            best = (score, i, config)
    if best is None:
        raise ConstraintError(
            f"{space.objective} undefined for every sampled configuration; "
            f"is there any class-{class_id} ground truth?"
        )
    return TuneResult(best_config=best[2], best_score=best[0],
                      best_iteration=best[1], objective=space.objective,
                      trace=trace)


def format_trace(result: TuneResult) -> str:
    """Trace as CSV: iteration, gamma, beta, delta, score."""
    lines = [f"iteration,gamma,beta,delta,{result.objective}"]
    for e in result.trace:
        score = "null" if e.score is None else repr(e.score)
        lines.append(f"{e.iteration},{e.gamma!r},{e.beta},{e.delta!r},{score}")
    return "".join(line + "\n" for line in lines)
