"""motskit: mask-based multi-object tracking evaluation and linking.

The package splits into small focused modules:

- ``masks``: run-length masks, the compressed-RLE codec, geometry.
- ``io``: annotation/detection/result text formats, .flo flow files,
  JSON reports.
- ``metrics``: per-frame correspondence, id switches, and the MOTSA /
  MOTSP / sMOTSA scores.
- ``association``: the four track-detection association cues.
- ``linker``: Hungarian-based tracking by detection.
- ``losses``: batch-hard / batch-all / contrastive embedding losses.
- ``tuning``: seeded random search over tracker thresholds.
- ``synth``: deterministic synthetic scenario generation.
- ``oracle``: slow reference implementations for tests.
- ``cli``: the ``motskit`` command.
"""

from .association import (
    AssociationMechanism,
    bbox_iou_warped,
    build_cost_matrix,
    center_distance,
    embed_distance,
    maskprop_score,
)
from .errors import ConstraintError, FormatError, MotsError, UndefinedLossError
from .io import (
    CLASS_CAR,
    CLASS_IGNORE,
    CLASS_NAMES,
    CLASS_PEDESTRIAN,
    AnnotationRecord,
    DetectionRecord,
    DetectionSet,
    SequenceGroundTruth,
    TrackRecord,
    TrackSet,
    load_flow_dir,
    parse_annotations,
    parse_detections,
    parse_results,
    read_flow,
    read_report,
    write_annotations,
    write_detections,
    write_flow,
    write_report,
    write_results,
)
from .linker import Track, TrackerConfig, link_step, resolve_overlaps, run_tracker, solve_assignment
from .losses import (
    GradientResult,
    LabeledEmbeddings,
    batch_all_loss,
    batch_hard_loss,
    contrastive_loss,
    loss_gradient,
)
from .masks import (
    Box,
    FlowField,
    Mask,
    bbox_of,
    check_frame_nonoverlap,
    decode_rle,
    encode_rle,
    intersection_count,
    iou,
    rasterize_box_ellipse,
    rasterize_box_fill,
    subtract,
    union_masks,
    warp,
)
from .metrics import (
    FrameAssociation,
    FrameMatching,
    MetricCounts,
    MetricReport,
    aggregate,
    apply_ignore,
    compute_metrics,
    count_id_switches,
    evaluate_sequence,
    match_frame,
    soft_tp,
)
from .synth import ObjectSpec, Scenario, ScenarioSpec, generate, write_scenario_files
from .tuning import SearchSpace, TuneResult, TuneSequence, evaluate_config, random_search

__version__ = "0.1.0"
