"""
Scene Model - Pano Localizer
Validación, teselado y consultas espaciales sobre el modelo semántico

Las habitaciones son prismas verticales (polígono xy + suelo/techo); puertas y
ventanas son quads coplanares etiquetados, las aberturas son huecos.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import shapely
from mapbox_earcut import triangulate_float32
from shapely.geometry import LinearRing, Point, Polygon

from .entities import (
    CEILING,
    DOOR,
    FLOOR,
    ITEM_CLASSES,
    OPENING,
    WALL,
    PrimitiveSet,
    Room,
    Scene,
    SceneGenParams,
    WallItem,
)
from .errors import InvalidParamsError, InvalidSceneError

logger = logging.getLogger(__name__)

EPS = 1e-9
MIN_TRIANGLE_AREA = 1e-12
FLOOR_SURFACE = -1
CEILING_SURFACE = -2

# Aristas de las habitaciones rectangulares generadas
SOUTH, EAST, NORTH, WEST = range(4)


@lru_cache(maxsize=4096)
def room_polygon(room: Room) -> Polygon:
    """Polígono shapely preparado (cacheado por habitación inmutable)"""
    polygon = Polygon(room.polygon)
    shapely.prepare(polygon)
    return polygon


# ---------------------------------------------------------------------------
# Validación
# ---------------------------------------------------------------------------


def _validate_room(room: Room) -> List[str]:
    name = f"room {room.id}"
    if len(room.polygon) < 3:
        return [f"{name}: polygon needs at least 3 vertices, got {len(room.polygon)}"]

    violations = []
    if not room.floor_z < room.ceiling_z:
        violations.append(f"{name}: floor_z {room.floor_z} must be below ceiling_z {room.ceiling_z}")

    if not LinearRing(room.polygon).is_simple:
        violations.append(f"{name}: polygon is self-intersecting")
        return violations

    area = room.signed_area
    if area <= 0:
        kind = "degenerate (zero area)" if abs(area) <= EPS else "clockwise"
        violations.append(f"{name}: polygon is {kind}, expected counter-clockwise with area > 0")
    return violations


def _validate_item(index: int, item: WallItem, room: Optional[Room]) -> List[str]:
    name = f"wall_item {index} (room {item.room}, edge {item.edge}, {item.cls})"
    if item.cls not in ITEM_CLASSES:
        return [f"{name}: unknown class '{item.cls}'"]
    if room is None:
        return [f"{name}: references missing room {item.room}"]
    if not 0 <= item.edge < room.num_edges:
        return [f"{name}: edge index out of range [0, {room.num_edges})"]

    violations = []
    length = room.edge_length(item.edge)
    if item.width <= 0:
        violations.append(f"{name}: width must be > 0, got {item.width}")
    if item.offset < -EPS or item.offset + item.width > length + EPS:
        violations.append(
            f"{name}: interval [{item.offset}, {item.offset + item.width}] exceeds edge length {length:.6f}"
        )
    if item.bottom_z < room.floor_z - EPS:
        violations.append(f"{name}: bottom_z {item.bottom_z} below floor_z {room.floor_z}")
    if item.top_z > room.ceiling_z + EPS:
        violations.append(f"{name}: top_z {item.top_z} above ceiling_z {room.ceiling_z}")
    if not item.bottom_z < item.top_z:
        violations.append(f"{name}: bottom_z must be below top_z")
    return violations


def validate_scene(scene: Scene) -> List[str]:
    """Lista de violaciones; vacía si la escena cumple todas las invariantes"""
    violations: List[str] = []

    seen: Set[int] = set()
    for room in scene.rooms:
        if room.id in seen:
            violations.append(f"room {room.id}: duplicate room id")
        seen.add(room.id)
        violations.extend(_validate_room(room))

    valid_items = []
    for index, item in enumerate(scene.wall_items):
        problems = _validate_item(index, item, scene.room_by_id(item.room))
        violations.extend(problems)
        if not problems:
            valid_items.append((index, item))

    by_edge: Dict[Tuple[int, int], List[Tuple[int, WallItem]]] = {}
    for index, item in valid_items:
        by_edge.setdefault((item.room, item.edge), []).append((index, item))
    for (room_id, edge), items in sorted(by_edge.items()):
        items.sort(key=lambda pair: pair[1].offset)
        for (ia, a), (ib, b) in zip(items, items[1:]):
            if a.offset + a.width > b.offset + EPS:
                violations.append(
                    f"wall_item {ia} and wall_item {ib}: overlap on room {room_id} edge {edge}"
                )

    if violations:
        logger.debug(f"Escena inválida: {len(violations)} violaciones")
    return violations


def ensure_valid(scene: Scene) -> Scene:
    violations = validate_scene(scene)
    if violations:
        raise InvalidSceneError(violations)
    return scene


# ---------------------------------------------------------------------------
# Teselado
# ---------------------------------------------------------------------------


def _cap_triangles(room: Room, z: float) -> List[np.ndarray]:
    xy = np.asarray(room.polygon, dtype=float)
    rings = np.array([len(xy)], dtype=np.uint32)
    indices = triangulate_float32(xy.astype(np.float32), rings).reshape(-1, 3)
    pts = np.column_stack([xy, np.full(len(xy), z)])
    return [pts[tri] for tri in indices]


def _wall_cells(room: Room, edge: int, items: Sequence[WallItem]):
    """Rejilla de rectángulos (s0, s1, z0, z1, clase) de una arista; huecos omitidos"""
    length = room.edge_length(edge)
    s_breaks = {0.0, length}
    z_breaks = {room.floor_z, room.ceiling_z}
    for item in items:
        s_breaks.update((item.offset, item.offset + item.width))
        z_breaks.update((item.bottom_z, item.top_z))
    s_values = sorted(s for s in s_breaks if -EPS <= s <= length + EPS)
    z_values = sorted(z for z in z_breaks if room.floor_z - EPS <= z <= room.ceiling_z + EPS)

    for s0, s1 in zip(s_values, s_values[1:]):
        if s1 - s0 <= EPS:
            continue
        sc = 0.5 * (s0 + s1)
        for z0, z1 in zip(z_values, z_values[1:]):
            if z1 - z0 <= EPS:
                continue
            zc = 0.5 * (z0 + z1)
            cls = WALL
            for item in items:
                if item.offset < sc < item.offset + item.width and item.bottom_z < zc < item.top_z:
                    cls = item.class_index
                    break
            if cls == OPENING:
                continue
            yield s0, s1, z0, z1, cls


def scene_to_primitives(scene: Scene) -> PrimitiveSet:
    """Triángulos etiquetados: tapas de suelo/techo y paredes teseladas alrededor de los items

    Orden determinista: por habitación; suelo, techo y luego aristas; dentro de
    cada arista de izquierda a derecha y de abajo arriba.
    """
    ensure_valid(scene)

    triangles: List[np.ndarray] = []
    classes: List[int] = []
    room_ids: List[int] = []
    surfaces: List[int] = []

    def emit(tri: np.ndarray, cls: int, room_id: int, surface: int) -> None:
        area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
        if area > MIN_TRIANGLE_AREA:
            triangles.append(tri)
            classes.append(cls)
            room_ids.append(room_id)
            surfaces.append(surface)

    for room in scene.rooms:
        for tri in _cap_triangles(room, room.floor_z):
            emit(tri, FLOOR, room.id, FLOOR_SURFACE)
        for tri in _cap_triangles(room, room.ceiling_z):
            emit(tri, CEILING, room.id, CEILING_SURFACE)

        for edge in range(room.num_edges):
            p0, p1 = room.edge(edge)
            direction = (p1 - p0) / np.linalg.norm(p1 - p0)
            items = scene.items_of(room.id, edge)
            for s0, s1, z0, z1, cls in _wall_cells(room, edge, items):
                a, b, c, d = (
                    np.array([*(p0 + s * direction), z]) for s, z in ((s0, z0), (s1, z0), (s1, z1), (s0, z1))
                )
                emit(np.stack([a, b, c]), cls, room.id, edge)
                emit(np.stack([a, c, d]), cls, room.id, edge)

    if not triangles:
        triangles_arr = np.zeros((0, 3, 3))
    else:
        triangles_arr = np.stack(triangles)
    logger.debug(f"Teselado: {len(triangles)} triángulos de {len(scene.rooms)} habitaciones")
    return PrimitiveSet(
        triangles=triangles_arr,
        classes=np.asarray(classes, dtype=np.uint8),
        room_ids=np.asarray(room_ids, dtype=int),
        surfaces=np.asarray(surfaces, dtype=int),
    )


# ---------------------------------------------------------------------------
# Consultas espaciales
# ---------------------------------------------------------------------------


def point_room_lookup(scene: Scene, p: Sequence[float]) -> Optional[int]:
    """Id de la habitación que contiene p (borde incluido); empate -> menor id"""
    x, y, z = (float(c) for c in p)
    for room in sorted(scene.rooms, key=lambda r: r.id):
        if not room.floor_z <= z <= room.ceiling_z:
            continue
        if len(room.polygon) >= 3 and shapely.intersects_xy(room_polygon(room), x, y):
            return room.id
    return None


def scene_bounds(scene: Scene) -> Tuple[float, float, float, float]:
    """(xmin, ymin, xmax, ymax) de todas las habitaciones"""
    boxes = np.array([room.bounds for room in scene.rooms])
    return (
        float(boxes[:, 0].min()),
        float(boxes[:, 1].min()),
        float(boxes[:, 2].max()),
        float(boxes[:, 3].max()),
    )


def item_midpoint(room: Room, item: WallItem) -> np.ndarray:
    """Punto medio xy del intervalo del item sobre su arista"""
    p0, p1 = room.edge(item.edge)
    direction = (p1 - p0) / np.linalg.norm(p1 - p0)
    return p0 + (item.offset + item.width / 2) * direction


def room_adjacency(scene: Scene) -> Dict[int, Set[int]]:
    """Grafo de conexiones por puerta/abertura entre habitaciones"""
    graph: Dict[int, Set[int]] = {room.id: set() for room in scene.rooms}
    for item in scene.wall_items:
        if item.class_index not in (DOOR, OPENING):
            continue
        room = scene.room_by_id(item.room)
        if room is None:
            continue
        mid = Point(item_midpoint(room, item))
        for other in scene.rooms:
            if other.id == room.id:
                continue
            if room_polygon(other).exterior.distance(mid) <= 1e-6:
                graph[room.id].add(other.id)
                graph[other.id].add(room.id)
    return graph


def reachable_rooms(scene: Scene, start: int) -> Set[int]:
    graph = room_adjacency(scene)
    seen = {start}
    frontier = [start]
    while frontier:
        current = frontier.pop()
        for nxt in sorted(graph.get(current, ())):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


# ---------------------------------------------------------------------------
# Generador sintético
# ---------------------------------------------------------------------------


def _check_params(params: SceneGenParams) -> None:
    problems = []
    if params.min_rooms < 1 or params.max_rooms < params.min_rooms:
        problems.append(f"room count range [{params.min_rooms}, {params.max_rooms}]")
    if params.min_room_size < 1.5 or params.max_room_size < params.min_room_size:
        problems.append(f"room size range [{params.min_room_size}, {params.max_room_size}] (min 1.5 m)")
    if params.min_ceiling <= 2.2 or params.max_ceiling < params.min_ceiling:
        problems.append(f"ceiling range [{params.min_ceiling}, {params.max_ceiling}] (min > 2.2 m)")
    for name in ("door_density", "window_density", "extra_connection_density"):
        value = getattr(params, name)
        if not 0.0 <= value <= 1.0:
            problems.append(f"{name}={value} outside [0, 1]")
    if problems:
        raise InvalidParamsError("Parámetros de generación inviables: " + "; ".join(problems))


def _connection_item(rng: np.random.Generator, params: SceneGenParams, length: float, floor: float, ceiling: float):
    if rng.random() < params.door_density:
        cls, width, top = "door", 0.9, min(floor + 2.1, ceiling)
    else:
        cls = "opening"
        width = float(rng.uniform(1.0, min(2.0, length - 0.2)))
        top = min(floor + 2.4, ceiling)
    offset = float(rng.uniform(0.1, length - width - 0.1))
    return cls, offset, width, floor, top


def generate_synthetic_scene(seed: int, params: Optional[SceneGenParams] = None) -> Scene:
    """Apartamento sintético determinista: rejilla de habitaciones rectangulares conectadas

    Las habitaciones ocupan las primeras n celdas (orden por filas) de una
    rejilla de columnas/filas de tamaño aleatorio. Cada habitación se conecta
    con su vecina izquierda (o la de abajo si está en la primera columna), lo
    que garantiza conectividad; las demás adyacencias se conectan con
    probabilidad extra_connection_density.
    """
    params = params or SceneGenParams()
    _check_params(params)
    rng = np.random.default_rng(seed)

    n = int(rng.integers(params.min_rooms, params.max_rooms + 1))
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    widths = rng.uniform(params.min_room_size, params.max_room_size, cols)
    depths = rng.uniform(params.min_room_size, params.max_room_size, rows)
    xs = np.concatenate([[0.0], np.cumsum(widths)])
    ys = np.concatenate([[0.0], np.cumsum(depths)])
    floor = 0.0
    ceiling = float(np.round(rng.uniform(params.min_ceiling, params.max_ceiling), 3))

    rooms = []
    cells: Dict[Tuple[int, int], int] = {}
    for k in range(n):
        r, c = divmod(k, cols)
        x0, x1 = float(np.round(xs[c], 3)), float(np.round(xs[c + 1], 3))
        y0, y1 = float(np.round(ys[r], 3)), float(np.round(ys[r + 1], 3))
        rooms.append(Room(k, ((x0, y0), (x1, y0), (x1, y1), (x0, y1)), floor, ceiling))
        cells[(r, c)] = k

    items: List[WallItem] = []
    connected_edges: Set[Tuple[int, int]] = set()

    def connect(a: int, edge_a: int, b: int, edge_b: int) -> None:
        length = rooms[a].edge_length(edge_a)
        cls, offset, width, bottom, top = _connection_item(rng, params, length, floor, ceiling)
        mirrored = length - offset - width
        items.append(WallItem(a, edge_a, cls, round(offset, 4), round(width, 4), bottom, top))
        items.append(WallItem(b, edge_b, cls, round(mirrored, 4), round(width, 4), bottom, top))
        connected_edges.update({(a, edge_a), (b, edge_b)})

    for k in range(1, n):
        r, c = divmod(k, cols)
        left = cells.get((r, c - 1)) if c > 0 else None
        below = cells.get((r - 1, c)) if r > 0 else None
        if left is not None:
            connect(k, WEST, left, EAST)
            if below is not None and rng.random() < params.extra_connection_density:
                connect(k, SOUTH, below, NORTH)
        elif below is not None:
            connect(k, SOUTH, below, NORTH)

    neighbours = {
        SOUTH: (-1, 0),
        EAST: (0, 1),
        NORTH: (1, 0),
        WEST: (0, -1),
    }
    for k, room in enumerate(rooms):
        r, c = divmod(k, cols)
        for edge, (dr, dc) in neighbours.items():
            if (r + dr, c + dc) in cells or (k, edge) in connected_edges:
                continue
            if rng.random() >= params.window_density:
                continue
            length = room.edge_length(edge)
            width = float(rng.uniform(0.8, min(1.6, length - 0.2)))
            offset = float(rng.uniform(0.1, length - width - 0.1))
            top = min(floor + 2.1, ceiling - 0.05)
            items.append(WallItem(k, edge, "window", round(offset, 4), round(width, 4), floor + 0.9, top))

    scene = Scene(1, tuple(rooms), tuple(items))
    logger.debug(f"Escena sintética seed={seed}: {n} habitaciones, {len(items)} items")
    return scene
