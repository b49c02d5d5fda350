"""Thin bindings over the ``motskit`` command line.

The engine is driven exclusively through its public interfaces: the
CLI subcommands and the documented file formats. Nothing is
reimplemented here, so results are identical to running the commands
by hand; reports come back as native dicts with ``None`` for undefined
metrics.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from pathlib import Path

__all__ = [
    "BridgeError",
    "ConstraintError",
    "FormatError",
    "InternalError",
    "evaluate",
    "track",
]

__version__ = "0.1.0"


class BridgeError(Exception):
    """Base error: carries the engine's exit code and diagnostic text."""

    def __init__(self, exit_code, stderr):
        self.exit_code = exit_code
        self.stderr = stderr
        super().__init__(f"motskit exited with {exit_code}: {stderr.strip()}")


class FormatError(BridgeError):
    """Exit code 2: unreadable or malformed input."""


class ConstraintError(BridgeError):
    """Exit code 3: well-formed input violating a semantic constraint."""


class InternalError(BridgeError):
    """Exit code 1: engine-internal failure."""


_ERRORS = {2: FormatError, 3: ConstraintError}


def _run_cli(args):
    proc = subprocess.run(
        [sys.executable, "-m", "motskit", *args],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise _ERRORS.get(proc.returncode, InternalError)(
            proc.returncode, proc.stderr
        )
    return proc.stdout


def _format_config(config) -> str:
    lines = []
    for class_name, fields in config.items():
        for key, value in fields.items():
            lines.append(f"{class_name}.{key} = {value}")
    return "".join(line + "\n" for line in lines)


def evaluate(gt_dir, results_dir, *, classes=None, ignore_threshold=None,
             id_switch_mode=None, pairs=None) -> dict:
    """Score a results directory against a ground-truth directory.

    Returns the report document (per-sequence, per-class, aggregate) as
    nested dicts; undefined metrics are ``None``.
    """
    with tempfile.TemporaryDirectory(prefix="motsbridge.") as tmp:
        report = Path(tmp) / "report.json"
        args = ["eval", "--gt", str(gt_dir), "--results", str(results_dir),
                "--report", str(report)]
        if classes is not None:
            if not isinstance(classes, str):
                classes = ",".join(str(c) for c in classes)
            args += ["--classes", classes]
        if ignore_threshold is not None:
            args += ["--ignore-threshold", str(ignore_threshold)]
        if id_switch_mode is not None:
            args += ["--id-switch-mode", str(id_switch_mode)]
        if pairs:
            if isinstance(pairs, dict):
                pairs = ",".join(f"{k}={v}" for k, v in pairs.items())
            args += ["--pairs", pairs]
        _run_cli(args)
        return json.loads(report.read_text())


def track(detections_dir, config, *, flow_dir=None, out_dir=None) -> Path:
    """Link a detections directory into result files.

    ``config`` is either a path to a tracker config file or a nested
    dict like ``{"car": {"mechanism": "embedding", "gamma": 0.5,
    "beta": 10, "delta": 3.0}}``. Returns the results directory.
    """
    if out_dir is None:
        out_dir = Path(tempfile.mkdtemp(prefix="motsbridge.results."))
    out_dir = Path(out_dir)
    with tempfile.TemporaryDirectory(prefix="motsbridge.") as tmp:
        if isinstance(config, (str, Path)):
            config_path = Path(config)
        else:
            config_path = Path(tmp) / "tracker.cfg"
            config_path.write_text(_format_config(config))
        args = ["track", "--detections", str(detections_dir),
                "--config", str(config_path), "--out", str(out_dir)]
        if flow_dir is not None:
            args += ["--flow", str(flow_dir)]
        _run_cli(args)
    return out_dir
