"""Command-line front end: ``validate``, ``eval``, ``track``, ``tune``.

Exit codes are a stable contract: 0 success, 2 format error, 3
constraint violation, 1 internal error. Sequences are paired across
directories by identical file stem (override with ``--pairs``), report
and result files are written atomically, and every random choice flows
from the single ``--seed`` flag.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import io as mio
from .errors import ConstraintError, FormatError, MotsError
from .linker import TrackerConfig, run_tracker
from .metrics import ID_SWITCH_MODES, MetricReport, compute_metrics, evaluate_sequence
from .tuning import (
    SearchSpace,
    TuneSequence,
    evaluate_config,
    format_trace,
    random_search,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_FORMAT = 2
EXIT_CONSTRAINT = 3


def _atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sequence_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"not a directory: {directory}")
    files = sorted(directory.glob("*.txt"))
    if not files:
        raise FormatError(f"no .txt sequence files in {directory}")
    return files


def _parse_class_list(text):
    ids = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token in mio.CLASS_IDS_BY_NAME:
            ids.append(mio.CLASS_IDS_BY_NAME[token])
        else:
            try:
                cid = int(token)
            except ValueError:
                raise FormatError(f"unknown class {token!r}") from None
            if cid not in mio.CLASS_NAMES:
                raise FormatError(f"unknown class id {cid}")
            ids.append(cid)
    if not ids:
        raise FormatError("empty class list")
    return tuple(dict.fromkeys(ids))


def _parse_pairs(text):
    mapping = {}
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "=" not in token:
            raise FormatError(f"bad pair {token!r}, expected gtstem=resultstem")
        gt_stem, res_stem = token.split("=", 1)
        mapping[gt_stem.strip()] = res_stem.strip()
    return mapping


def _pair_sequences(gt_dir, other_dir, pairs, what):
    gt_files = _sequence_files(gt_dir)
    other_dir = Path(other_dir)
    matched = []
    for gt_file in gt_files:
        stem = pairs.get(gt_file.stem, gt_file.stem)
        other = other_dir / f"{stem}.txt"
        if not other.exists():
            raise FormatError(f"no {what} file for sequence {gt_file.stem!r} "
                              f"(expected {other})")
        matched.append((gt_file.stem, gt_file, other))
    return matched


# ---------------------------------------------------------------------------
# Flat key-value files (tracker configs and search spaces)
# ---------------------------------------------------------------------------

def _parse_kv(text, path=None):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", path=path, line=lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise FormatError("expected 'key = value'", path=path, line=lineno)
        if key in out:
            raise FormatError(f"duplicate key {key!r}", path=path, line=lineno)
        out[key] = value
    return out


def _kv_float(kv, key, path, default=None):
    if key not in kv:
        if default is None:
            raise FormatError(f"missing key {key!r}", path=path)
        return default
    try:
        return float(kv.pop(key))
    except ValueError:
        raise FormatError(f"bad number for {key!r}", path=path) from None


def _kv_int(kv, key, path, default=None):
    if key not in kv:
        if default is None:
            raise FormatError(f"missing key {key!r}", path=path)
        return default
    try:
        return int(kv.pop(key))
    except ValueError:
        raise FormatError(f"bad integer for {key!r}", path=path) from None


def parse_config_text(text, path=None):
    """Tracker configs from flat `class.field = value` lines."""
    kv = _parse_kv(text, path)
    class_names = sorted({key.split(".", 1)[0] for key in kv})
    configs = {}
    for name in class_names:
        if name not in mio.CLASS_IDS_BY_NAME:
            raise FormatError(f"unknown class {name!r}", path=path)
        cid = mio.CLASS_IDS_BY_NAME[name]
        mechanism = kv.pop(f"{name}.mechanism", "embedding")
        gamma = _kv_float(kv, f"{name}.gamma", path)
        beta = _kv_int(kv, f"{name}.beta", path)
        delta = _kv_float(kv, f"{name}.delta", path)
        try:
            configs[cid] = TrackerConfig(cid, gamma, beta, delta, mechanism)
        except ConstraintError as exc:
            raise FormatError(f"bad config for {name}: {exc}", path=path) from None
    if kv:
        raise FormatError(f"unknown keys {sorted(kv)}", path=path)
    if not configs:
        raise FormatError("config file defines no classes", path=path)
    return configs


def format_config_text(configs) -> str:
    lines = []
    for cid in sorted(configs):
        cfg = configs[cid]
        name = mio.CLASS_NAMES[cid]
        lines.append(f"{name}.mechanism = {cfg.mechanism}")
        lines.append(f"{name}.gamma = {cfg.gamma!r}")
        lines.append(f"{name}.beta = {cfg.beta}")
        lines.append(f"{name}.delta = {cfg.delta!r}")
    return "".join(line + "\n" for line in lines)


def _kv_values(kv, key, path, cast):
    if key not in kv:
        return None
    raw = kv.pop(key)
    try:
        return tuple(cast(tok.strip()) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise FormatError(f"bad value list for {key!r}", path=path) from None


def parse_space_text(text, path=None, seed=None):
    """Search space from flat key-value lines; ``seed`` overrides."""
    kv = _parse_kv(text, path)
    mechanism = kv.pop("mechanism", "embedding")
    gamma_range = (_kv_float(kv, "gamma.min", path, 0.0),
                   _kv_float(kv, "gamma.max", path, 1.0))
    beta_range = (_kv_int(kv, "beta.min", path, 1),
                  _kv_int(kv, "beta.max", path, 30))
    delta_min = _kv_float(kv, "delta.min", path, float("nan"))
    delta_max = _kv_float(kv, "delta.max", path, float("nan"))
    delta_range = None
    if delta_min == delta_min and delta_max == delta_max:
        delta_range = (delta_min, delta_max)
    elif delta_min == delta_min or delta_max == delta_max:
        raise FormatError("delta.min and delta.max must come together", path=path)
    gamma_values = _kv_values(kv, "gamma.values", path, float)
    beta_values = _kv_values(kv, "beta.values", path, int)
    delta_values = _kv_values(kv, "delta.values", path, float)
    iterations = _kv_int(kv, "iterations", path, 1000)
    objective = kv.pop("objective", "smotsa")
    space_seed = _kv_int(kv, "seed", path, 0)
    if kv:
        raise FormatError(f"unknown keys {sorted(kv)}", path=path)
    try:
        return SearchSpace(
            mechanism=mechanism, gamma_range=gamma_range, beta_range=beta_range,
            delta_range=delta_range, gamma_values=gamma_values,
            beta_values=beta_values, delta_values=delta_values,
            iterations=iterations, seed=seed if seed is not None else space_seed,
            objective=objective,
        )
    except ConstraintError as exc:
        raise FormatError(f"bad search space: {exc}", path=path) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    paths = []
    for target in args.paths:
        target = Path(target)
        if target.is_dir():
            paths.extend(_sequence_files(target))
        elif target.exists():
            paths.append(target)
        else:
            raise FormatError(f"no such file: {target}")
    worst = EXIT_OK
    for path in paths:
        try:
            mio.parse_annotations(path.read_text(errors="replace"), path=path)
        except FormatError as exc:
            print(f"FORMAT ERROR: {exc}", file=sys.stderr)
            worst = EXIT_FORMAT
        except ConstraintError as exc:
            print(f"CONSTRAINT VIOLATION: {exc}", file=sys.stderr)
            if worst != EXIT_FORMAT:
                worst = EXIT_CONSTRAINT
        else:
            print(f"OK: {path}")
    return worst


def _print_summary(report: MetricReport):
    def fmt(value, width=8):
        if value is None:
            return "n/a".rjust(width)
        return f"{value:.4f}".rjust(width)

    doc = report.to_document()
    header = (f"{'class':<12}{'sMOTSA':>9}{'MOTSA':>9}{'MOTSP':>9}"
              f"{'|M|':>7}{'TP':>7}{'FP':>7}{'FN':>7}{'IDS':>6}{'softTP':>10}")
    print(header)
    rows = list(doc["classes"].items()) + [("all", doc["aggregate"])]
    for name, entry in rows:
        print(
            f"{name:<12}"
            f"{fmt(entry['smotsa'], 9)}{fmt(entry['motsa'], 9)}"
            f"{fmt(entry['motsp'], 9)}"
            f"{entry['num_gt']:>7}{entry['num_tp']:>7}{entry['num_fp']:>7}"
            f"{entry['num_fn']:>7}{entry['num_ids']:>6}"
            f"{entry['soft_tp']:>10.4f}"
        )


def cmd_eval(args) -> int:
    class_ids = _parse_class_list(args.classes)
    pairs = _parse_pairs(args.pairs) if args.pairs else {}
    matched = _pair_sequences(args.gt, args.results, pairs, "result")
    report = MetricReport(class_ids=class_ids)
    for stem, gt_file, res_file in matched:
        gt = mio.parse_annotations(gt_file.read_text(), path=gt_file)
        hyps = mio.parse_results(res_file.read_text(), path=res_file)
        report.sequences[stem] = {
            cid: evaluate_sequence(
                gt, hyps, cid,
                ignore_threshold=args.ignore_threshold,
                id_switch_mode=args.id_switch_mode,
            )
            for cid in class_ids
        }
    _atomic_write_text(args.report, mio.write_report(report))
    _print_summary(report)
    print(f"report written to {args.report}")
    return EXIT_OK


def cmd_track(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        raise FormatError(f"no such config file: {config_path}")
    configs = parse_config_text(config_path.read_text(), path=config_path)
    needs_flow = any(cfg.association.needs_flow for cfg in configs.values())
    if needs_flow and not args.flow:
        raise FormatError(
            "configured mechanisms need optical flow; pass --flow DIR"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for det_file in _sequence_files(args.detections):
        detections = mio.parse_detections(det_file.read_text(), path=det_file)
        flow_for_frame = None
        if needs_flow:
            flow_dir = Path(args.flow) / det_file.stem
            if not flow_dir.is_dir():
                raise FormatError(f"no flow directory for sequence "
                                  f"{det_file.stem!r} (expected {flow_dir})")
            flow_for_frame = mio.load_flow_dir(flow_dir)
        trackset = run_tracker(detections, configs, flow_for_frame)
        _atomic_write_text(out_dir / det_file.name, mio.write_results(trackset))
        print(f"tracked {det_file.stem}: {len(trackset.tracks)} tracks")
    return EXIT_OK


def cmd_tune(args) -> int:
    space_path = Path(args.space)
    if not space_path.exists():
        raise FormatError(f"no such space file: {space_path}")
    space = parse_space_text(space_path.read_text(), path=space_path,
                             seed=args.seed)
    class_ids = _parse_class_list(args.klass)
    if len(class_ids) != 1:
        raise FormatError("tune exactly one class at a time")
    class_id = class_ids[0]
    pairs = _parse_pairs(args.pairs) if args.pairs else {}
    matched = _pair_sequences(args.gt, args.detections, pairs, "detection")
    sequences = []
    for stem, gt_file, det_file in matched:
        flow_for_frame = None
        if args.flow:
            flow_dir = Path(args.flow) / stem
            if flow_dir.is_dir():
                flow_for_frame = mio.load_flow_dir(flow_dir)
        if space.mechanism in ("mask_iou", "bbox_iou") and flow_for_frame is None:
            raise FormatError(f"{space.mechanism} tuning needs --flow with a "
                              f"directory per sequence (missing for {stem!r})")
        sequences.append(TuneSequence(
            gt=mio.parse_annotations(gt_file.read_text(), path=gt_file),
            detections=mio.parse_detections(det_file.read_text(), path=det_file),
            flow_for_frame=flow_for_frame,
            name=stem,
        ))
    result = random_search(sequences, space, class_id,
                           ignore_threshold=args.ignore_threshold,
                           id_switch_mode=args.id_switch_mode)
    check = evaluate_config(sequences, result.best_config,
                            ignore_threshold=args.ignore_threshold,
                            id_switch_mode=args.id_switch_mode)
    motsa, _, smotsa = compute_metrics(check)
    replay = smotsa if result.objective == "smotsa" else motsa
    if replay != result.best_score:
        raise MotsError(
            f"winner re-evaluation mismatch: {replay} != {result.best_score}"
        )
    _atomic_write_text(args.out_trace, format_trace(result))
    _atomic_write_text(args.out_config,
                       format_config_text({class_id: result.best_config}))
    print(f"best {result.objective} = {result.best_score!r} at iteration "
          f"{result.best_iteration}")
    print(f"winner written to {args.out_config}, trace to {args.out_trace}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="motskit",
        description="Mask-based multi-object tracking evaluation and linking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check annotation/result files")
    p.add_argument("paths", nargs="+", help="files or directories of .txt files")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="evaluate results against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth directory")
    p.add_argument("--results", required=True, help="results directory")
    p.add_argument("--classes", default="car,pedestrian")
    p.add_argument("--ignore-threshold", type=float, default=0.5)
    p.add_argument("--id-switch-mode", choices=ID_SWITCH_MODES,
                   default="motchallenge")
    p.add_argument("--report", default="report.json")
    p.add_argument("--pairs", default="",
                   help="explicit gtstem=resultstem pairs, comma separated")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("track", help="link detections into tracks")
    p.add_argument("--detections", required=True)
    p.add_argument("--config", required=True, help="flat key-value config file")
    p.add_argument("--flow", default="", help="flow directory (per-sequence subdirs)")
    p.add_argument("--out", required=True, help="output results directory")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("tune", help="random-search tracker thresholds")
    p.add_argument("--gt", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--flow", default="")
    p.add_argument("--space", required=True, help="flat key-value space file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class", dest="klass", required=True,
                   help="class to tune (car or pedestrian)")
    p.add_argument("--ignore-threshold", type=float, default=0.5)
    p.add_argument("--id-switch-mode", choices=ID_SWITCH_MODES,
                   default="motchallenge")
    p.add_argument("--out-config", required=True)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--pairs", default="")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"FORMAT ERROR: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ConstraintError as exc:
        print(f"CONSTRAINT VIOLATION: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except MotsError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"INTERNAL ERROR: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
