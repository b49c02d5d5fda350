"""Shared test helpers: random mask and scenario sampling."""

from __future__ import annotations

import numpy as np
import pytest

from motskit.masks import Mask
from motskit.synth import ObjectSpec, ScenarioSpec


def random_mask(rng, height=None, width=None, max_dim=16, density=None) -> Mask:
    if height is None:
        height = int(rng.integers(1, max_dim + 1))
    if width is None:
        width = int(rng.integers(1, max_dim + 1))
    if density is None:
        density = float(rng.random())
    grid = rng.random((height, width)) < density
    return Mask.from_dense(grid)


def _center_bounds(size, extent):
    span, _ = size, extent
    lo = (span - 1) // 2
    hi = extent - 1 - (span - 1 - (span - 1) // 2)
    return lo, hi


def random_object_spec(rng, height, width, num_frames) -> ObjectSpec:
    sh = int(rng.integers(1, 5))
    sw = int(rng.integers(1, 5))
    y_lo, y_hi = _center_bounds(sh, height)
    x_lo, x_hi = _center_bounds(sw, width)
    f0 = int(rng.integers(0, num_frames))
    f1 = int(rng.integers(f0, num_frames))
    waypoints = [
        (f0, int(rng.integers(x_lo, x_hi + 1)), int(rng.integers(y_lo, y_hi + 1)))
    ]
    if f1 > f0:
        waypoints.append(
            (f1, int(rng.integers(x_lo, x_hi + 1)), int(rng.integers(y_lo, y_hi + 1)))
        )
    return ObjectSpec(
        class_id=int(rng.choice([1, 2])),
        size=(sh, sw),
        waypoints=tuple(waypoints),
        shape=str(rng.choice(["box", "ellipse"])),
    )


def random_scenario_spec(rng, with_ignore=None) -> ScenarioSpec:
    """Random small scenario within the reference-oracle size guards."""
    height = int(rng.integers(10, 33))
    width = int(rng.integers(10, 33))
    num_frames = int(rng.integers(2, 17))
    num_objects = int(rng.integers(1, 7))
    objects = tuple(
        random_object_spec(rng, height, width, num_frames)
        for _ in range(num_objects)
    )
    if with_ignore is None:
        with_ignore = bool(rng.random() < 0.5)
    ignore_boxes = ()
    if with_ignore:
        from motskit.masks import Box

        bw = int(rng.integers(2, max(3, width // 2)))
        bh = int(rng.integers(2, max(3, height // 2)))
        x0 = int(rng.integers(0, width - bw))
        y0 = int(rng.integers(0, height - bh))
        ignore_boxes = (Box(x0, y0, x0 + bw - 1, y0 + bh - 1),)
    swap_events = ()
    if num_objects >= 2 and rng.random() < 0.4:
        a, b = rng.choice(num_objects, size=2, replace=False) + 1
        swap_events = ((int(rng.integers(1, num_frames + 1)), int(a), int(b)),)
    return ScenarioSpec(
        height=height,
        width=width,
        num_frames=num_frames,
        objects=objects,
        ignore_boxes=ignore_boxes,
        mask_noise=int(rng.integers(0, 2)),
        drop_prob=float(rng.choice([0.0, 0.1, 0.3])),
        clutter_prob=float(rng.choice([0.0, 0.3, 0.6])),
        embedding_dim=int(rng.choice([0, 4])),
        embedding_noise=float(rng.choice([0.0, 0.05])),
        swap_events=swap_events,
        seed=int(rng.integers(0, 2**63 - 1)),
    )


@pytest.fixture(scope="session")
def session_rng():
    return np.random.default_rng(20240817)
