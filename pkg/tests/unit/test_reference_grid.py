"""
Unit Tests - Reference Grid
Posiciones de panoramas de referencia (modos global y local)
"""

import pytest

from pano_localizer.domain.entities import Room, Scene, WallItem
from pano_localizer.domain.errors import InvalidParamsError
from pano_localizer.domain.reference_grid import sample_reference_positions
from pano_localizer.domain.scene_model import generate_synthetic_scene, point_room_lookup

pytestmark = pytest.mark.unit


def rectangle(width, depth, items=(), height=3.0):
    room = Room(0, ((0.0, 0.0), (width, 0.0), (width, depth), (0.0, depth)), 0.0, height)
    return Scene(1, (room,), tuple(items))


class TestGlobalGrid:
    def test_count_and_anchor(self):
        positions = sample_reference_positions(rectangle(6.0, 4.0), spacing=1.2, mode="global")
        assert len(positions) == 15
        assert positions[0] == pytest.approx((0.6, 0.6, 1.5))
        assert {p[2] for p in positions} == {1.5}

    def test_only_inside_rooms(self, two_room_scene):
        positions = sample_reference_positions(two_room_scene, spacing=1.0, mode="global")
        assert positions
        assert all(point_room_lookup(two_room_scene, p) is not None for p in positions)
        # la franja y > 3 de la segunda habitación queda fuera
        assert not any(p[0] > 4.0 and p[1] > 3.0 for p in positions)


class TestLocalGrid:
    def test_center_plus_door_point(self):
        door = WallItem(0, 0, "door", 1.0, 0.9, 0.0, 2.1)
        positions = sample_reference_positions(rectangle(6.0, 4.0, [door]), spacing=10.0, mode="local")
        assert len(positions) == 2
        assert positions[0] == pytest.approx((3.0, 2.0, 1.5))
        assert positions[1] == pytest.approx((1.45, 0.1, 1.5))

    def test_windows_add_no_points(self):
        window = WallItem(0, 0, "window", 1.0, 1.0, 0.9, 2.1)
        positions = sample_reference_positions(rectangle(6.0, 4.0, [window]), spacing=10.0, mode="local")
        assert len(positions) == 1

    @pytest.mark.parametrize("spacing,expected", [(2.4, 25), (1.2, 100)])
    def test_centered_counts(self, spacing, expected):
        assert len(sample_reference_positions(rectangle(12.0, 12.0), spacing=spacing, mode="local")) == expected

    @pytest.mark.parametrize("seed", range(6))
    def test_halving_spacing_quadruples_room_counts(self, seed):
        coarse, fine = 0.5, 0.25
        for room in generate_synthetic_scene(seed).rooms:
            xmin, ymin, xmax, ymax = room.bounds
            assert min(xmax - xmin, ymax - ymin) >= 5.9 * coarse
            alone = Scene(1, (room,))
            n_coarse = len(sample_reference_positions(alone, spacing=coarse, mode="local"))
            n_fine = len(sample_reference_positions(alone, spacing=fine, mode="local"))
            assert n_fine / n_coarse == pytest.approx(4.0, rel=0.2)

    def test_rounds_like_the_global_grid(self):
        # 3.4 / 1.0 -> 3 puntos, 3.6 / 1.0 -> 4
        assert len(sample_reference_positions(rectangle(3.4, 3.6), spacing=1.0, mode="local")) == 12

    def test_door_points_are_inside_their_rooms(self, two_room_scene):
        positions = sample_reference_positions(two_room_scene, spacing=10.0, mode="local")
        assert (3.9, 1.45, 1.5) == pytest.approx(positions[1])
        assert (4.1, 1.45, 1.5) == pytest.approx(positions[3])
        assert point_room_lookup(two_room_scene, positions[3]) == 1

    def test_generated_scene_positions_inside(self):
        scene = generate_synthetic_scene(3)
        positions = sample_reference_positions(scene)
        assert len(positions) >= len(scene.rooms)
        assert all(point_room_lookup(scene, p) is not None for p in positions)

    def test_deterministic(self, generated_scene):
        assert sample_reference_positions(generated_scene) == sample_reference_positions(generated_scene)


class TestParameters:
    def test_camera_above_ceiling_skips_room(self):
        assert sample_reference_positions(rectangle(4.0, 4.0, height=2.5), h_pano=3.0) == []

    def test_floor_offset(self):
        room = Room(0, ((0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)), 1.0, 4.0)
        (position,) = sample_reference_positions(Scene(1, (room,)), spacing=5.0)
        assert position == pytest.approx((1.0, 1.0, 2.5))

    @pytest.mark.parametrize("kwargs", [{"spacing": 0.0}, {"spacing": -1.0}, {"mode": "radial"}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParamsError):
            sample_reference_positions(rectangle(4.0, 4.0), **kwargs)

    def test_empty_scene(self):
        assert sample_reference_positions(Scene(1, ())) == []
