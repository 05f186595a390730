"""
Reference Grid - Pano Localizer
Posiciones de las cámaras panorámicas de referencia sobre el plano de planta
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
import shapely

from .entities import DOOR, OPENING, Room, Scene
from .errors import InvalidParamsError
from .scene_model import item_midpoint, room_polygon, scene_bounds

logger = logging.getLogger(__name__)

DEDUPE_DISTANCE = 0.01
ITEM_INSET = 0.10

Position = Tuple[float, float, float]


def _room_at_xy(scene: Scene, x: float, y: float) -> Optional[Room]:
    for room in sorted(scene.rooms, key=lambda r: r.id):
        if shapely.intersects_xy(room_polygon(room), x, y):
            return room
    return None


def _axis(start: float, stop: float, spacing: float) -> np.ndarray:
    """start + spacing/2 + k * spacing mientras quede dentro de [start, stop]"""
    count = int(math.floor((stop - start) / spacing + 0.5 + 1e-9))
    return start + spacing / 2 + spacing * np.arange(max(0, count))


def _centered_axis(start: float, stop: float, spacing: float) -> np.ndarray:
    """Mismo número de puntos que _axis (al menos 1), centrados con margen simétrico"""
    extent = stop - start
    count = max(1, int(math.floor(extent / spacing + 0.5 + 1e-9)))
    margin = (extent - (count - 1) * spacing) / 2
    return start + margin + spacing * np.arange(count)


def _global_positions(scene: Scene, spacing: float, h_pano: float) -> List[Tuple[int, Position]]:
    xmin, ymin, xmax, ymax = scene_bounds(scene)
    points = []
    for y in _axis(ymin, ymax, spacing):
        for x in _axis(xmin, xmax, spacing):
            room = _room_at_xy(scene, float(x), float(y))
            if room is None or room.floor_z + h_pano > room.ceiling_z:
                continue
            points.append((room.id, (float(x), float(y), room.floor_z + h_pano)))
    # orden estable: habitación y luego filas
    return sorted(points, key=lambda item: item[0])


def _local_positions(scene: Scene, spacing: float, h_pano: float) -> List[Tuple[int, Position]]:
    points = []
    for room in sorted(scene.rooms, key=lambda r: r.id):
        z = room.floor_z + h_pano
        if z > room.ceiling_z:
            continue
        polygon = room_polygon(room)
        xmin, ymin, xmax, ymax = room.bounds

        grid = [
            (float(x), float(y), z)
            for y in _centered_axis(ymin, ymax, spacing)
            for x in _centered_axis(xmin, xmax, spacing)
            if shapely.intersects_xy(polygon, float(x), float(y))
        ]
        if not grid:
            rep = polygon.representative_point()
            grid = [(float(rep.x), float(rep.y), z)]
        points.extend((room.id, p) for p in grid)

        for item in scene.items_of(room.id):
            if item.class_index not in (DOOR, OPENING):
                continue
            p0, p1 = room.edge(item.edge)
            direction = (p1 - p0) / np.linalg.norm(p1 - p0)
            inward = np.array([-direction[1], direction[0]])
            mid = item_midpoint(room, item) + ITEM_INSET * inward
            points.append((room.id, (float(mid[0]), float(mid[1]), z)))
    return points


def sample_reference_positions(
    scene: Scene,
    spacing: float = 1.2,
    mode: str = "local",
    h_pano: float = 1.5,
) -> List[Position]:
    """Posiciones de referencia a altura suelo + h_pano

    global: rejilla anclada en el mínimo del bounding box de la escena.
    local: rejilla centrada por habitación más un punto por puerta/abertura,
    desplazado 10 cm hacia el interior de la habitación del item.
    Duplicados a menos de 1 cm se eliminan conservando el primero.
    """
    if spacing <= 0:
        raise InvalidParamsError(f"spacing debe ser positivo: {spacing}")
    if mode not in ("global", "local"):
        raise InvalidParamsError(f"mode inválido: {mode}")
    if not scene.rooms:
        return []

    if mode == "global":
        tagged = _global_positions(scene, spacing, h_pano)
    else:
        tagged = _local_positions(scene, spacing, h_pano)

    kept: List[Position] = []
    for _, point in tagged:
        if all(math.dist(point, other) >= DEDUPE_DISTANCE for other in kept):
            kept.append(point)

    logger.debug(f"Rejilla {mode} (spacing={spacing} m): {len(kept)} posiciones")
    return kept
