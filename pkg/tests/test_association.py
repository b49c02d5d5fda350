import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motskit.association import (
    AssociationMechanism,
    bbox_iou_warped,
    build_cost_matrix,
    center_distance,
    embed_distance,
    maskprop_score,
)
from motskit.errors import ConstraintError
from motskit.io import DetectionRecord
from motskit.masks import Box, FlowField, Mask, iou, rasterize_box_fill


def boxmask(h, w, box):
    return rasterize_box_fill(Box(*box), h, w)


def det(mask, embedding=None, confidence=0.9, class_id=1, frame=0):
    emb = None if embedding is None else np.asarray(embedding, dtype=np.float64)
    return DetectionRecord(frame, class_id, confidence, mask, emb)


class TestEmbedDistance:
    def test_zero(self):
        v = np.array([1.0, 2.0, 3.0])
        assert embed_distance(v, v) == 0.0

    def test_unit_basis(self):
        e1 = np.array([1.0, 0.0])
        e2 = np.array([0.0, 1.0])
        assert embed_distance(e1, e2) == math.sqrt(2)

    def test_three_four_five(self):
        assert embed_distance(np.zeros(2), np.array([3.0, 4.0])) == 5.0

    def test_dimension_mismatch(self):
        with pytest.raises(ConstraintError):
            embed_distance(np.zeros(2), np.zeros(3))

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=3),
           st.lists(st.floats(-50, 50), min_size=3, max_size=3),
           st.lists(st.floats(-50, 50), min_size=3, max_size=3))
    @settings(max_examples=200, deadline=None)
    def test_metric_axioms(self, a, b, c):
        a, b, c = np.array(a), np.array(b), np.array(c)
        assert embed_distance(a, b) >= 0
        assert embed_distance(a, b) == embed_distance(b, a)
        assert embed_distance(a, c) <= embed_distance(a, b) + embed_distance(b, c) + 1e-9


class TestMaskProp:
    def test_zero_flow_is_plain_iou(self):
        a = boxmask(6, 6, (0, 0, 2, 2))
        b = boxmask(6, 6, (1, 0, 3, 2))
        assert maskprop_score(a, b, FlowField.zero(6, 6)) == iou(a, b)

    def test_exact_translation_scores_one(self):
        a = boxmask(6, 8, (0, 1, 2, 3))
        b = boxmask(6, 8, (3, 1, 5, 3))
        flow = FlowField(6, 8, np.full((6, 8), 3, np.float32), np.zeros((6, 8), np.float32))
        assert maskprop_score(a, b, flow) == 1.0

    def test_warp_out_of_image(self):
        a = boxmask(4, 4, (0, 0, 1, 1))
        b = boxmask(4, 4, (2, 2, 3, 3))
        flow = FlowField(4, 4, np.full((4, 4), 10, np.float32), np.zeros((4, 4), np.float32))
        assert maskprop_score(a, b, flow) == 0.0

    def test_self_identity(self):
        a = boxmask(5, 5, (1, 1, 3, 3))
        assert maskprop_score(a, a, FlowField.zero(5, 5)) == 1.0


class TestBboxIouWarped:
    def test_zero_flow_identical_boxes(self):
        a = boxmask(6, 6, (1, 1, 3, 3))
        assert bbox_iou_warped(a, a, FlowField.zero(6, 6)) == 1.0

    def test_uniform_shift(self):
        a = boxmask(6, 10, (0, 1, 2, 3))
        b = boxmask(6, 10, (2, 1, 4, 3))
        flow = FlowField(6, 10, np.full((6, 10), 2, np.float32), np.zeros((6, 10), np.float32))
        assert bbox_iou_warped(a, b, flow) == 1.0

    def test_mixed_flow_matches_dense_oracle(self):
        # 2x2 previous box so the medians exercise the even-count rule
        prev = boxmask(5, 5, (1, 1, 2, 2))
        cur = boxmask(5, 5, (2, 1, 3, 2))
        u = np.zeros((5, 5), np.float32)
        v = np.zeros((5, 5), np.float32)
        u[1:3, 1:3] = [[1, 2], [3, 4]]
        v[1:3, 1:3] = [[0, 1], [1, 2]]
        flow = FlowField(5, 5, u, v)
        got = bbox_iou_warped(prev, cur, flow)
        # oracle: explicit sorted-median (lower middle) + rectangle IoU
        du = sorted([1, 2, 3, 4])[(4 - 1) // 2]
        dv = sorted([0, 1, 1, 2])[(4 - 1) // 2]
        ax0, ay0, ax1, ay1 = 1 + du, 1 + dv, 3 + du, 3 + dv
        bx0, by0, bx1, by1 = 2, 1, 4, 3
        iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
        ih = max(0.0, min(ay1, by1) - max(ay0, by0))
        inter = iw * ih
        union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
        assert got == inter / union

    def test_empty_mask_rejected(self):
        with pytest.raises(ConstraintError):
            bbox_iou_warped(Mask.empty(4, 4), boxmask(4, 4, (0, 0, 1, 1)),
                            FlowField.zero(4, 4))


class TestCenterDistance:
    def test_same_mask(self):
        m = boxmask(6, 6, (1, 1, 3, 3))
        assert center_distance(m, m) == 0.0

    def test_single_pixels(self):
        a = boxmask(6, 6, (0, 0, 0, 0))
        b = boxmask(6, 6, (3, 4, 3, 4))
        assert center_distance(a, b) == 5.0

    def test_fractional_centers(self):
        a = boxmask(8, 8, (1, 1, 2, 1))   # center (1.5, 1)
        b = boxmask(8, 8, (4, 5, 5, 5))   # center (4.5, 5)
        assert center_distance(a, b) == 5.0


class TestCostMatrix:
    def test_all_infeasible(self):
        heads = [(det(boxmask(4, 4, (0, 0, 1, 1)), [0.0, 0.0]), 1)]
        dets = [det(boxmask(4, 4, (2, 2, 3, 3)), [10.0, 0.0])]
        mech = AssociationMechanism("embedding", 0.5)
        cost, feasible = build_cost_matrix(heads, dets, mech)
        assert not feasible.any()

    def test_single_feasible_entry(self):
        heads = [(det(boxmask(4, 4, (0, 0, 1, 1)), [0.0]), 1)]
        dets = [det(boxmask(4, 4, (0, 0, 1, 1)), [0.1]), ]
        mech = AssociationMechanism("embedding", 0.5)
        cost, feasible = build_cost_matrix(heads, dets, mech)
        assert feasible[0, 0]
        assert cost[0, 0] == pytest.approx(0.1)

    def test_mask_iou_matrix_matches_oracle(self):
        h = w = 10
        flow = FlowField.zero(h, w)
        prev_masks = [boxmask(h, w, (0, 0, 2, 2)), boxmask(h, w, (4, 4, 6, 6)),
                      boxmask(h, w, (7, 7, 9, 9))]
        cur_masks = [boxmask(h, w, (0, 0, 2, 2)), boxmask(h, w, (5, 4, 7, 6)),
                     boxmask(h, w, (0, 7, 2, 9))]
        heads = [(det(m), 1) for m in prev_masks]
        dets = [det(m) for m in cur_masks]
        mech = AssociationMechanism("mask_iou", 0.2)
        cost, feasible = build_cost_matrix(heads, dets, mech, flow)
        for i, pm in enumerate(prev_masks):
            for j, cm in enumerate(cur_masks):
                inter = np.logical_and(pm.to_dense(), cm.to_dense()).sum()
                union = np.logical_or(pm.to_dense(), cm.to_dense()).sum()
                value = inter / union
                assert cost[i, j] == 1.0 - value
                assert feasible[i, j] == (value > 0.2)

    def test_age_violation_for_adjacent_only(self):
        heads = [(det(boxmask(4, 4, (0, 0, 1, 1))), 2)]
        dets = [det(boxmask(4, 4, (0, 0, 1, 1)))]
        with pytest.raises(ConstraintError):
            build_cost_matrix(heads, dets, AssociationMechanism("bbox_center", 5.0))

    def test_flow_required(self):
        heads = [(det(boxmask(4, 4, (0, 0, 1, 1))), 1)]
        dets = [det(boxmask(4, 4, (0, 0, 1, 1)))]
        with pytest.raises(ConstraintError):
            build_cost_matrix(heads, dets, AssociationMechanism("mask_iou", 0.5))

    def test_feasibility_monotone_in_threshold(self, session_rng):
        heads = [(det(boxmask(8, 8, (0, 0, 2, 2)),
                      session_rng.standard_normal(3)), 1) for _ in range(3)]
        dets = [det(boxmask(8, 8, (1, 0, 3, 2)),
                    session_rng.standard_normal(3)) for _ in range(4)]
        prev = None
        for delta in (0.5, 1.0, 2.0, 4.0, 8.0):
            _, feas = build_cost_matrix(heads, dets,
                                        AssociationMechanism("embedding", delta))
            if prev is not None:
                assert (feas | prev == feas).all()  # grows monotonically
            prev = feas

    def test_cost_conversion_preserves_argmin(self):
        h = w = 12
        flow = FlowField.zero(h, w)
        prev = boxmask(h, w, (0, 0, 3, 3))
        curs = [boxmask(h, w, (0, 0, 3, 3)), boxmask(h, w, (1, 0, 4, 3)),
                boxmask(h, w, (2, 0, 5, 3))]
        heads = [(det(prev), 1)]
        dets = [det(m) for m in curs]
        mech = AssociationMechanism("mask_iou", 0.0)
        cost, feasible = build_cost_matrix(heads, dets, mech, flow)
        ious = [maskprop_score(prev, m, flow) for m in curs]
        assert int(np.argmin(cost[0])) == int(np.argmax(ious))
        assert feasible[0].all()


class TestMechanismValidation:
    def test_unknown_variant(self):
        with pytest.raises(ConstraintError):
            AssociationMechanism("magic", 0.5)

    def test_iou_threshold_range(self):
        with pytest.raises(ConstraintError):
            AssociationMechanism("mask_iou", 1.5)

    def test_negative_distance_threshold(self):
        with pytest.raises(ConstraintError):
            AssociationMechanism("embedding", -1.0)
