"""
Unit Tests - Evaluation
Errores de pose, métricas agregadas y muestreo de queries
"""

import numpy as np
import pytest

from pano_localizer.domain.entities import Metrics, Pose, PoseError, QueryParams
from pano_localizer.domain.errors import InvalidParamsError, QuerySamplingError
from pano_localizer.domain.evaluation import (
    center_ray_distance,
    compute_metrics,
    count_classes,
    pose_error,
    sample_query_poses,
)
from pano_localizer.domain.geometry import rotation_from_ypr
from pano_localizer.domain.scene_model import point_room_lookup, scene_to_primitives

pytestmark = pytest.mark.unit


def err(terr, rerr=0.0, terr_xy=None, rerr_yaw=None):
    return PoseError(terr, terr if terr_xy is None else terr_xy, rerr, rerr if rerr_yaw is None else rerr_yaw)


class TestPoseError:
    def test_translation_in_cm(self):
        e = pose_error(Pose.identity((0.0, 0.0, 0.0)), Pose.identity((0.3, 0.4, 0.0)))
        assert e.terr_xyz == pytest.approx(50.0)
        assert e.terr_xy == pytest.approx(50.0)
        assert e.rerr_3d == pytest.approx(0.0, abs=1e-9)

    def test_vertical_offset_only_in_3d(self):
        e = pose_error(Pose.identity(), Pose.identity((0.3, 0.0, 0.4)))
        assert e.terr_xyz == pytest.approx(50.0)
        assert e.terr_xy == pytest.approx(30.0)

    def test_yaw_error(self):
        e = pose_error(Pose(tuple(rotation_from_ypr(10.0))), Pose(tuple(rotation_from_ypr(40.0))))
        assert e.rerr_3d == pytest.approx(30.0)
        assert e.rerr_yaw == pytest.approx(30.0)

    def test_yaw_wraps(self):
        e = pose_error(Pose(tuple(rotation_from_ypr(170.0))), Pose(tuple(rotation_from_ypr(-170.0))))
        assert e.rerr_yaw == pytest.approx(20.0)

    def test_pitch_not_in_yaw_error(self):
        e = pose_error(Pose(tuple(rotation_from_ypr(0.0, 10.0))), Pose())
        assert e.rerr_yaw == pytest.approx(0.0, abs=1e-9)
        assert e.rerr_3d == pytest.approx(10.0)


class TestMetrics:
    def test_recalls_and_median(self):
        errors = [err(5, 10), err(40, 10), err(90, 50), err(150, 5)]
        metrics = compute_metrics(errors, errors)
        assert metrics.recall == {"10cm": 25.0, "50cm": 50.0, "100cm": 75.0}
        assert metrics.median_terr_cm == pytest.approx(40.0)
        assert metrics.median_rerr_deg == pytest.approx(10.0)
        assert metrics.inlier_pct == pytest.approx(50.0)
        assert metrics.topk_recall_pct == pytest.approx(75.0)
        assert metrics.n == 4
        assert metrics.check_invariants() == []

    def test_topk_uses_its_own_errors(self):
        top1 = [err(500), err(20)]
        topk = [err(80), err(20)]
        metrics = compute_metrics(top1, topk)
        assert metrics.recall["100cm"] == 50.0
        assert metrics.topk_recall_pct == 100.0

    def test_two_dimensional_mode(self):
        errors = [err(150, 40, terr_xy=30, rerr_yaw=5)]
        metrics = compute_metrics(errors, errors, mode="2d")
        assert metrics.recall["100cm"] == 100.0
        assert metrics.inlier_pct == 100.0
        assert metrics.median_terr_cm == pytest.approx(30.0)

    def test_no_errors_within_one_meter(self):
        errors = [err(150), err(300)]
        metrics = compute_metrics(errors, errors)
        assert metrics.median_terr_cm is None
        assert metrics.median_rerr_deg is None
        assert metrics.inlier_pct == 0.0

    def test_custom_thresholds_sorted(self):
        errors = [err(30)]
        metrics = compute_metrics(errors, errors, thresholds_cm=(100, 25))
        assert metrics.thresholds_cm == (25.0, 100.0)
        assert list(metrics.recall) == ["25cm", "100cm"]

    def test_bbox_iou_and_config(self):
        errors = [err(10), err(20)]
        metrics = compute_metrics(errors, errors, bbox_ious=[0.5, 1.0], config={"seed": 1})
        assert metrics.mean_bbox_iou == pytest.approx(0.75)
        assert metrics.config == {"seed": 1}

    def test_dict_round_trip(self):
        errors = [err(10, 3), err(60, 40)]
        metrics = compute_metrics(errors, errors, bbox_ious=[0.2, 0.4])
        assert Metrics.from_dict(metrics.to_dict()) == metrics

    @pytest.mark.parametrize(
        "errors,topk,kwargs",
        [
            ([], [], {}),
            ([err(1)], [], {}),
            ([err(1)], [err(1)], {"mode": "4d"}),
        ],
    )
    def test_invalid_inputs(self, errors, topk, kwargs):
        with pytest.raises(InvalidParamsError):
            compute_metrics(errors, topk, **kwargs)

    def test_invariant_violations_reported(self):
        metrics = Metrics("3d", (10.0, 100.0), 30.0, 1, None, None, {"10cm": 80.0, "100cm": 50.0}, 60.0, 40.0)
        problems = metrics.check_invariants()
        assert len(problems) == 3


class TestQuerySampling:
    def test_count_classes(self):
        sem = np.zeros((10, 10), dtype=np.uint8)
        sem[:5] = 1
        sem[5:] = 2
        sem[0, 0] = 5
        assert count_classes(sem, 0.01) == 3
        assert count_classes(sem, 0.05) == 2

    def test_center_ray_distance(self, box_scene):
        prims = scene_to_primitives(box_scene)
        assert center_ray_distance(prims, Pose.identity((2.0, 2.0, 1.5))) == pytest.approx(2.0)

    def test_sampled_queries_are_valid(self, generated_scene):
        prims = scene_to_primitives(generated_scene)
        params = QueryParams(resolution=32)
        queries = sample_query_poses(generated_scene, prims, 3, params, seed=5, scene_id="s")
        assert [q.index for q in queries] == [0, 1, 2]
        for q in queries:
            assert q.semantic.shape == (32, 32)
            assert q.class_count >= params.min_classes
            assert q.center_distance >= params.min_center_distance
            assert point_room_lookup(generated_scene, q.pose.translation) is not None
            assert q.scene_id == "s"

    def test_sampling_is_deterministic(self, generated_scene):
        prims = scene_to_primitives(generated_scene)
        params = QueryParams(resolution=16)
        a = sample_query_poses(generated_scene, prims, 2, params, seed=9)
        b = sample_query_poses(generated_scene, prims, 2, params, seed=9)
        assert [q.pose for q in a] == [q.pose for q in b]

    def test_zero_count(self, generated_scene):
        assert sample_query_poses(generated_scene, scene_to_primitives(generated_scene), 0) == []

    def test_negative_count(self, generated_scene):
        with pytest.raises(InvalidParamsError):
            sample_query_poses(generated_scene, scene_to_primitives(generated_scene), -1)

    def test_impossible_criteria(self, box_scene):
        params = QueryParams(min_center_distance=100.0, resolution=8)
        with pytest.raises(QuerySamplingError):
            sample_query_poses(box_scene, scene_to_primitives(box_scene), 1, params)
