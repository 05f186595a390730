"""
Unit Tests - Spherical Camera Geometry
Proyecciones, poses y cajas circulares
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pano_localizer.domain.entities import CameraIntrinsics, CircularBBox, Pose
from pano_localizer.domain.errors import RasterMismatchError
from pano_localizer.domain.geometry import (
    bbox_from_rotation,
    camera_to_world,
    circular_iou,
    compose_pose,
    compute_viewport_mask,
    dir_to_equirect_pixel,
    equirect_pixel_to_dir,
    frustum_mask,
    heading_of,
    mask_to_circular_bbox,
    matrix_to_quat,
    persp_pixel_to_ray,
    pose_matrix,
    project_point,
    quat_exp,
    quat_log,
    quat_to_matrix,
    relative_pose,
    rotation_error_deg,
    rotation_from_ypr,
    ypr_from_rotation,
)
from pano_localizer.domain.renderer import render_panorama, render_perspective
from pano_localizer.domain.scene_model import scene_to_primitives

pytestmark = pytest.mark.unit

angles = st.floats(min_value=-170.0, max_value=170.0, allow_nan=False)
tilts = st.floats(min_value=-80.0, max_value=80.0, allow_nan=False)


def random_pose(rng):
    q = rng.normal(size=4)
    return Pose(tuple(q / np.linalg.norm(q)), tuple(rng.uniform(-5, 5, size=3)))


class TestEquirect:
    def test_north_maps_to_center(self):
        u, v = dir_to_equirect_pixel([0.0, 1.0, 0.0], 256, 128)
        assert float(u) == pytest.approx(128.0)
        assert float(v) == pytest.approx(64.0)

    def test_east_maps_to_three_quarters(self):
        u, v = dir_to_equirect_pixel([1.0, 0.0, 0.0], 256, 128)
        assert float(u) == pytest.approx(192.0)
        assert float(v) == pytest.approx(64.0)

    def test_up_is_top_row(self):
        _, v = dir_to_equirect_pixel([0.0, 0.0, 1.0], 256, 128)
        assert float(v) == pytest.approx(0.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(min_value=0.0, max_value=255.99),
        st.floats(min_value=0.5, max_value=127.5),
    )
    def test_pixel_round_trip(self, u, v):
        d = equirect_pixel_to_dir(u, v, 256, 128)
        assert np.linalg.norm(d) == pytest.approx(1.0)
        u2, v2 = dir_to_equirect_pixel(d, 256, 128)
        du = abs(float(u2) - u) % 256
        assert min(du, 256 - du) < 1e-6
        assert float(v2) == pytest.approx(v, abs=1e-6)


class TestRotations:
    def test_identity_faces_north(self):
        assert heading_of(rotation_from_ypr(0.0)) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("yaw", [30.0, 90.0, -120.0])
    def test_heading_matches_yaw(self, yaw):
        assert heading_of(rotation_from_ypr(yaw, 0.0, 0.0)) == pytest.approx(yaw, abs=1e-9)

    def test_yaw_90_faces_east(self):
        forward = quat_to_matrix(rotation_from_ypr(90.0)) @ np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(forward, [1.0, 0.0, 0.0], atol=1e-12)

    def test_positive_pitch_looks_up(self):
        forward = quat_to_matrix(rotation_from_ypr(0.0, 20.0)) @ np.array([0.0, 1.0, 0.0])
        assert forward[2] == pytest.approx(math.sin(math.radians(20.0)))

    @settings(max_examples=50, deadline=None)
    @given(angles, tilts, angles)
    def test_ypr_round_trip(self, yaw, pitch, roll):
        q = rotation_from_ypr(yaw, pitch, roll)
        assert q[0] >= 0
        q2 = rotation_from_ypr(*ypr_from_rotation(q))
        assert rotation_error_deg(q, q2) < 1e-6

    def test_rotation_error_of_yaw(self):
        a = rotation_from_ypr(10.0)
        b = rotation_from_ypr(40.0)
        assert rotation_error_deg(a, b) == pytest.approx(30.0, abs=1e-9)

    def test_rotation_error_sign_invariant(self):
        q = rotation_from_ypr(25.0, 5.0, -3.0)
        assert rotation_error_deg(q, -q) == pytest.approx(0.0, abs=1e-9)

    def test_rotation_error_tiny_angle_is_stable(self):
        a = rotation_from_ypr(0.0)
        b = rotation_from_ypr(1e-6)
        assert rotation_error_deg(a, b) == pytest.approx(1e-6, rel=1e-3)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-0.9, max_value=0.9), min_size=3, max_size=3))
    def test_exp_log_inverse(self, v):
        q = quat_exp(v)
        assert np.linalg.norm(q) == pytest.approx(1.0)
        np.testing.assert_allclose(quat_log(q), v, atol=1e-9)

    def test_exp_near_zero(self):
        q = quat_exp([1e-9, 0.0, 0.0])
        np.testing.assert_allclose(q, [1.0, 1e-9, 0.0, 0.0], atol=1e-15)

    def test_matrix_round_trip_is_canonical(self):
        q = rotation_from_ypr(25.0, 5.0, -3.0)
        np.testing.assert_allclose(matrix_to_quat(quat_to_matrix(q)), q, atol=1e-12)
        np.testing.assert_allclose(matrix_to_quat(quat_to_matrix(-q)), q, atol=1e-12)


class TestPoses:
    def test_compose_example(self):
        ref = Pose.identity((2.0, 3.0, 1.5))
        rel = Pose(tuple(rotation_from_ypr(30.0)), (0.5, -0.2, 0.1))
        out = compose_pose(ref, rel)
        np.testing.assert_allclose(out.translation, (2.5, 2.8, 1.6), atol=1e-12)
        assert heading_of(out.rotation) == pytest.approx(30.0)

    def test_compose_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b = random_pose(rng), random_pose(rng)
            np.testing.assert_allclose(
                pose_matrix(compose_pose(a, b)), pose_matrix(a) @ pose_matrix(b), atol=1e-11
            )

    def test_relative_inverts_compose(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            ref, absolute = random_pose(rng), random_pose(rng)
            back = compose_pose(ref, relative_pose(ref, absolute))
            np.testing.assert_allclose(back.translation, absolute.translation, atol=1e-10)
            assert rotation_error_deg(back.rotation, absolute.rotation) < 1e-6


class TestPerspective:
    def test_point_straight_ahead_projects_to_center(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        u, v, d = project_point(Pose.identity(), K, [0.0, 2.0, 0.0])
        assert (u, v, d) == pytest.approx((32.0, 32.0, 2.0))

    def test_point_above_projects_to_upper_half(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        _, v, _ = project_point(Pose.identity(), K, [0.0, 2.0, 0.5])
        assert v < 32.0

    def test_center_and_edge_rays(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        np.testing.assert_allclose(persp_pixel_to_ray(K, 32.0, 32.0), [0.0, 0.0, 1.0])
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(persp_pixel_to_ray(K, 0.0, 32.0), [-s, 0.0, s])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.0, 63.99), st.floats(0.0, 47.99), st.integers(0, 10_000))
    def test_pixel_ray_round_trip(self, u, v, seed):
        K = CameraIntrinsics(math.radians(75), 64, 48)
        pose = random_pose(np.random.default_rng(seed))
        ray = camera_to_world(pose.rotation) @ persp_pixel_to_ray(K, u, v)
        pu, pv, distance = project_point(pose, K, np.asarray(pose.translation) + 3.0 * ray)
        assert (pu, pv, distance) == pytest.approx((u, v, 3.0), abs=1e-6)

    def test_point_behind_is_none(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        assert project_point(Pose.identity(), K, [0.0, -2.0, 0.0]) is None

    def test_invalid_intrinsics(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(math.pi, 64, 64)
        with pytest.raises(ValueError):
            CameraIntrinsics(1.0, 1, 64)

    def test_vertical_fov(self):
        assert CameraIntrinsics(math.radians(90), 64, 64).vfov == pytest.approx(math.radians(90))
        assert CameraIntrinsics(math.radians(90), 64, 32).vfov == pytest.approx(2 * math.atan(0.5))


class TestViewports:
    def test_identity_bbox(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        box = bbox_from_rotation(rotation_from_ypr(0.0), K, 256, 128)
        assert abs(box.u_min - 96) <= 1
        assert abs(box.width - 64) <= 1
        assert abs(box.v_min - 32) <= 1
        assert abs(box.height - 64) <= 1
        assert not box.wraps(256)

    def test_backward_view_wraps(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        box = bbox_from_rotation(rotation_from_ypr(180.0), K, 256, 128)
        assert box.wraps(256)
        assert box.is_valid(256, 128)
        assert abs(box.width - 64) <= 1

    def test_looking_up_covers_all_columns(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        box = bbox_from_rotation(rotation_from_ypr(0.0, 90.0), K, 256, 128)
        assert box.width == 256
        assert box.u_min == 0

    def test_frustum_solid_angle(self):
        K = CameraIntrinsics(math.radians(90), 64, 64)
        mask = frustum_mask(rotation_from_ypr(0.0), K, 1024, 512)
        theta = (0.5 - (np.arange(512) + 0.5) / 512) * np.pi
        weights = np.cos(theta)[:, None] * np.ones((1, 1024))
        assert (weights * mask).sum() / weights.sum() == pytest.approx(1 / 6, abs=0.002)

    def test_viewport_mask_in_box(self, box_scene):
        prims = scene_to_primitives(box_scene)
        center = (2.0, 2.0, 1.5)
        pano = render_panorama(prims, center, 256, 128)
        K = CameraIntrinsics(math.radians(90), 256, 256)
        pose = Pose.identity(center)
        persp = render_perspective(prims, pose, K)
        mask = compute_viewport_mask(pano.depth, center, persp.depth, pose, K)
        theta = (0.5 - (np.arange(128) + 0.5) / 128) * np.pi
        weights = np.cos(theta)[:, None] * np.ones((1, 256))
        assert (weights * mask).sum() / weights.sum() == pytest.approx(1 / 6, abs=0.01)

    def test_viewport_mask_raster_mismatch(self):
        K = CameraIntrinsics(math.radians(90), 32, 32)
        with pytest.raises(RasterMismatchError):
            compute_viewport_mask(np.ones((64, 128)), (0, 0, 0), np.ones((16, 16)), Pose.identity(), K)

    def test_empty_mask_has_no_bbox(self):
        assert mask_to_circular_bbox(np.zeros((8, 16), dtype=bool)) is None

    def test_bbox_over_seam(self):
        mask = np.zeros((8, 16), dtype=bool)
        mask[2:4, 14:] = True
        mask[2:4, :3] = True
        assert mask_to_circular_bbox(mask) == CircularBBox(14, 2, 5, 2)

    def test_contains_wraps(self):
        bbox = CircularBBox(14, 2, 5, 2)
        assert bbox.contains(15, 2, 16) and bbox.contains(2, 3, 16)
        assert not bbox.contains(3, 2, 16)
        assert not bbox.contains(14, 4, 16)


    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.booleans(), min_size=48, max_size=48))
    def test_bbox_is_minimal_and_covers_mask(self, cells):
        mask = np.array(cells).reshape(4, 12)
        box = mask_to_circular_bbox(mask)
        occupied = np.flatnonzero(mask.any(axis=0))
        if occupied.size == 0:
            assert box is None
            return

        narrowest = min(int(max((c - s) % 12 for c in occupied)) + 1 for s in range(12))
        assert box.width == narrowest
        assert box.is_valid(12, 4)
        inside = np.zeros_like(mask)
        inside[box.v_min : box.v_min + box.height][:, box.columns(12)] = True
        assert not (mask & ~inside).any()
        assert mask[box.v_min].any()
        assert mask[box.v_min + box.height - 1].any()


class TestCircularIoU:
    def test_wrapping_example(self):
        a = CircularBBox(350, 0, 20, 10)
        b = CircularBBox(0, 0, 20, 10)
        assert circular_iou(a, b, 360, 10) == pytest.approx(1 / 3)

    def test_identical_boxes(self):
        a = CircularBBox(5, 1, 10, 4)
        assert circular_iou(a, a, 64, 8) == pytest.approx(1.0)

    def test_disjoint_boxes(self):
        assert circular_iou(CircularBBox(0, 0, 4, 4), CircularBBox(10, 0, 4, 4), 64, 8) == 0.0

    @settings(max_examples=80, deadline=None)
    @given(
        st.integers(0, 47), st.integers(0, 7), st.integers(1, 48), st.integers(1, 8),
        st.integers(0, 47), st.integers(0, 7), st.integers(1, 48), st.integers(1, 8),
    )
    def test_matches_rasterized_oracle(self, ua, va, wa, ha, ub, vb, wb, hb):
        W, H = 48, 8
        ha, hb = min(ha, H - va), min(hb, H - vb)
        a, b = CircularBBox(ua, va, wa, ha), CircularBBox(ub, vb, wb, hb)

        def raster(box):
            m = np.zeros((H, W), dtype=bool)
            m[box.v_min : box.v_min + box.height][:, box.columns(W)] = True
            return m

        ra, rb = raster(a), raster(b)
        expected = (ra & rb).sum() / (ra | rb).sum()
        assert circular_iou(a, b, W, H) == pytest.approx(expected)
