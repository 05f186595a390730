"""
Test Configuration for Pano Localizer
Configuración central y fixtures de escenas para todos los tests del proyecto
"""

import sys
from pathlib import Path

import pytest

# Add project root to Python path for imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from pano_localizer.domain.entities import (  # noqa: E402
    GridConfig,
    HypothesisConfig,
    RefineConfig,
    Room,
    Scene,
    WallItem,
)
from pano_localizer.domain.scene_model import generate_synthetic_scene, scene_to_primitives  # noqa: E402

TEST_REPORTS_DIR = project_root / "tests" / "reports"
TEST_REPORTS_DIR.mkdir(exist_ok=True)


def make_box_scene(size=4.0, height=3.0, items=()):
    """Habitación cuadrada [0, size]^2 con suelo en 0"""
    room = Room(0, ((0.0, 0.0), (size, 0.0), (size, size), (0.0, size)), 0.0, height)
    return Scene(1, (room,), tuple(items))


@pytest.fixture
def box_scene():
    """Caja cerrada 4 x 4 x 3 m sin items"""
    return make_box_scene()


@pytest.fixture
def window_scene():
    """Caja 4 x 4 x 3 m con una ventana en la pared norte (x en [1, 3])"""
    window = WallItem(0, 2, "window", 1.0, 2.0, 0.9, 2.1)
    return make_box_scene(items=[window])


@pytest.fixture
def two_room_scene():
    """Habitación 4 x 4 y habitación 6 x 3 unidas por una puerta; ventana en la segunda"""
    room_a = Room(0, ((0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)), 0.0, 3.0)
    room_b = Room(1, ((4.0, 0.0), (10.0, 0.0), (10.0, 3.0), (4.0, 3.0)), 0.0, 3.0)
    items = (
        WallItem(0, 1, "door", 1.0, 0.9, 0.0, 2.1),
        WallItem(1, 3, "door", 1.1, 0.9, 0.0, 2.1),
        WallItem(1, 2, "window", 2.0, 1.5, 0.9, 2.1),
    )
    return Scene(1, (room_a, room_b), items)


@pytest.fixture
def two_room_prims(two_room_scene):
    return scene_to_primitives(two_room_scene)


@pytest.fixture(scope="session")
def generated_scene():
    return generate_synthetic_scene(1)


@pytest.fixture
def small_grid():
    """Panoramas pequeños para que los tests de pipeline sean rápidos"""
    return GridConfig(spacing=2.0, mode="local", h_pano=1.5, pano_width=128, pano_height=64)


@pytest.fixture
def fast_hypotheses():
    return HypothesisConfig(yaw_step_deg=10.0, pitches_deg=(0.0,), rolls_deg=(0.0,), pano_grid_width=64, pano_grid_height=32)


@pytest.fixture
def fast_refine():
    return RefineConfig(max_evaluations=150)


@pytest.fixture(scope="session")
def test_config():
    """Configuración global de los tests"""
    return {"reports_dir": TEST_REPORTS_DIR, "seed": 7}
