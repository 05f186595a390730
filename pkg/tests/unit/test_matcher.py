"""
Unit Tests - Viewport Matcher
Codificación, hipótesis de rotación, acuerdo semántico y ranking
"""

import math

import numpy as np
import pytest

from pano_localizer.domain.entities import (
    CEILING,
    FLOOR,
    WALL,
    WINDOW,
    CameraIntrinsics,
    CircularBBox,
    HypothesisConfig,
    MatchResult,
    PanoEncoding,
    Pose,
)
from pano_localizer.domain.errors import InvalidParamsError, RasterMismatchError
from pano_localizer.domain.geometry import rotation_error_deg, rotation_from_ypr
from pano_localizer.domain.matcher import (
    SAMPLE_CACHE_SIZE,
    ViewportMatcher,
    agreement,
    class_fractions,
    encode_panorama,
    encode_query,
    enumerate_hypotheses,
    match_viewport,
    rank_references,
    warp_pano_to_view,
)
from pano_localizer.domain.renderer import render_panorama, render_perspective
from pano_localizer.domain.scene_model import scene_to_primitives

pytestmark = pytest.mark.unit

HFOV = math.radians(90)


class TestEncoding:
    def test_class_fractions(self):
        sem = np.array(
            [
                [1, 1, 2, 0],
                [1, 3, 2, 2],
                [0, 0, 4, 4],
                [0, 0, 4, 5],
            ],
            dtype=np.uint8,
        )
        grid = class_fractions(sem, 2, 2)
        assert grid.shape == (2, 2, 6)
        np.testing.assert_allclose(grid[0, 0, :3], [0.75, 0.0, 0.25])
        np.testing.assert_allclose(grid[0, 1, :2], [0.0, 0.75])
        assert grid[1, 0].sum() == 0.0
        np.testing.assert_allclose(grid[1, 1, 3:5], [0.75, 0.25])

    def test_panorama_must_be_two_to_one(self):
        with pytest.raises(RasterMismatchError):
            encode_panorama(np.zeros((64, 64), dtype=np.uint8), (0, 0, 0))

    def test_panorama_grid_clamped_to_image(self):
        enc = encode_panorama(np.ones((16, 32), dtype=np.uint8), (1, 2, 3), 128, 64)
        assert enc.grid.shape == (16, 32, 6)
        assert enc.position == (1.0, 2.0, 3.0)

    def test_query_present_classes(self):
        sem = np.full((100, 100), WALL, dtype=np.uint8)
        sem[:50] = FLOOR
        sem[0, 0] = WINDOW
        q = encode_query(sem, HFOV, grid=10, class_fraction=0.01)
        assert q.present == (WALL - 1, FLOOR - 1)
        assert q.grid.shape == (10, 10, 6)
        assert q.intrinsics == CameraIntrinsics(HFOV, 100, 100)


class TestHypotheses:
    def test_default_count(self):
        hypotheses = enumerate_hypotheses(HypothesisConfig())
        assert len(hypotheses) == 216
        np.testing.assert_allclose(hypotheses[0], rotation_from_ypr(0.0, -10.0, 0.0))

    def test_coarse_count(self):
        cfg = HypothesisConfig(yaw_step_deg=90.0, pitches_deg=(0.0,), rolls_deg=(0.0,))
        hypotheses = enumerate_hypotheses(cfg)
        assert len(hypotheses) == 4
        assert hypotheses[0] == (1.0, 0.0, 0.0, 0.0)

    @pytest.mark.parametrize(
        "cfg",
        [
            HypothesisConfig(yaw_step_deg=7.0),
            HypothesisConfig(yaw_step_deg=0.0),
            HypothesisConfig(pitches_deg=()),
            HypothesisConfig(pitches_deg=(0.0, 0.0)),
            HypothesisConfig(pitches_deg=(90.0,)),
        ],
    )
    def test_invalid_configs(self, cfg):
        with pytest.raises(InvalidParamsError):
            enumerate_hypotheses(cfg)


class TestAgreement:
    def test_half_scale(self):
        a = np.zeros((4, 4, 6))
        b = np.zeros((4, 4, 6))
        a[..., 0] = 1.0
        b[..., 0] = 0.5
        a[..., 1] = b[..., 1] = 0.3
        assert agreement(a, b, (0, 1)) == pytest.approx(0.75)

    def test_absent_in_both_counts_as_one(self):
        a = np.zeros((2, 2, 6))
        a[..., 0] = 1.0
        assert agreement(a, a.copy(), (0, 2)) == pytest.approx(1.0)

    def test_nothing_present(self):
        a = np.ones((2, 2, 6))
        assert agreement(a, a, ()) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(RasterMismatchError):
            agreement(np.zeros((2, 2, 6)), np.zeros((2, 3, 6)), (0,))


class TestWarp:
    def test_yaw_half_turn_equals_rolled_grid(self):
        rng = np.random.default_rng(1)
        grid = rng.random((32, 64, 6))
        enc = PanoEncoding(grid, (0.0, 0.0, 0.0), 64, 32)
        rolled = PanoEncoding(np.roll(grid, 32, axis=1), (0.0, 0.0, 0.0), 64, 32)
        a = warp_pano_to_view(enc, rotation_from_ypr(0.0), HFOV, 16)
        b = warp_pano_to_view(rolled, rotation_from_ypr(180.0), HFOV, 16)
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_warp_agrees_with_perspective_render(self, window_scene):
        prims = scene_to_primitives(window_scene)
        center = (1.5, 2.5, 1.5)
        pano = render_panorama(prims, center, 1024, 512)
        enc = encode_panorama(pano.semantic, center, 1024, 512)
        rotation = rotation_from_ypr(20.0, 5.0)
        query = render_perspective(prims, Pose(tuple(rotation), center), CameraIntrinsics(HFOV, 32, 32))
        warped = warp_pano_to_view(enc, rotation, HFOV, 32)
        q = encode_query(query.semantic, HFOV, 32)
        assert agreement(warped, q.grid, q.present) >= 0.9


class TestMatching:
    def test_uniform_scene_picks_first_hypothesis(self):
        cfg = HypothesisConfig(yaw_step_deg=30.0, pitches_deg=(0.0,), rolls_deg=(0.0,))
        enc = encode_panorama(np.full((32, 64), WALL, dtype=np.uint8), (0, 0, 0), 64, 32)
        q = encode_query(np.full((16, 16), WALL, dtype=np.uint8), HFOV, 16)
        result = match_viewport(enc, q, cfg, reference_index=3)
        assert result.rotation == enumerate_hypotheses(cfg)[0]
        assert result.score == pytest.approx(1.0)
        assert result.reference_index == 3

    def test_query_without_classes_scores_zero(self):
        matcher = ViewportMatcher(HypothesisConfig(yaw_step_deg=90.0, pitches_deg=(0.0,)))
        enc = encode_panorama(np.full((32, 64), WALL, dtype=np.uint8), (0, 0, 0), 64, 32)
        q = encode_query(np.zeros((16, 16), dtype=np.uint8), HFOV, 16)
        assert (matcher.scores(enc, q) == 0).all()

    def test_sample_grids_are_reused(self):
        matcher = ViewportMatcher(HypothesisConfig(yaw_step_deg=90.0, pitches_deg=(0.0,), rolls_deg=(0.0,)))
        first = matcher.samples_for(HFOV, (8, 8), (32, 64))
        assert matcher.samples_for(HFOV, [8, 8], [32, 64]) is first
        assert len(first) == 4

    def test_sample_cache_is_bounded(self):
        matcher = ViewportMatcher(HypothesisConfig(yaw_step_deg=90.0, pitches_deg=(0.0,), rolls_deg=(0.0,)))
        for degrees in range(40, 40 + 3 * SAMPLE_CACHE_SIZE):
            matcher.samples_for(math.radians(degrees), (4, 4), (16, 32))
        assert matcher._cached_samples.cache_info().currsize == SAMPLE_CACHE_SIZE

    @pytest.mark.slow
    @pytest.mark.parametrize("yaw,tolerance,min_score", [(35.0, 1e-6, 0.85), (37.0, 3.0 + 1e-6, 0.7)])
    def test_self_consistency(self, window_scene, yaw, tolerance, min_score):
        prims = scene_to_primitives(window_scene)
        center = (1.5, 2.5, 1.5)
        pano = render_panorama(prims, center, 256, 128)
        enc = encode_panorama(pano.semantic, center)
        gt = rotation_from_ypr(yaw)
        query = render_perspective(prims, Pose(tuple(gt), center), CameraIntrinsics(HFOV, 64, 64))
        result = ViewportMatcher().match(enc, encode_query(query.semantic, HFOV))
        assert rotation_error_deg(result.rotation, gt) <= tolerance
        assert result.score >= min_score
        assert result.bbox.is_valid(256, 128)
        assert CEILING - 1 in encode_query(query.semantic, HFOV).present


class TestRanking:
    def test_rank_by_score(self):
        box = CircularBBox(0, 0, 1, 1)
        results = [MatchResult(s, (1.0, 0.0, 0.0, 0.0), box, i) for i, s in enumerate([0.2, 0.9, 0.5])]
        assert rank_references(results) == [1, 2, 0]

    def test_ties_by_reference_index(self):
        box = CircularBBox(0, 0, 1, 1)
        results = [MatchResult(0.5, (1.0, 0.0, 0.0, 0.0), box, i) for i in (4, 2, 7)]
        assert rank_references(results) == [1, 0, 2]
