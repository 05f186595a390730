"""
Domain Entities - Pano Localizer
Entidades del dominio siguiendo DDD (Domain Driven Design)

Convenciones: mundo diestro, z arriba, +y = norte, unidades en metros.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

# Paleta semántica fija
VOID, WALL, FLOOR, CEILING, DOOR, WINDOW, OPENING = range(7)
CLASS_NAMES = {
    VOID: "void",
    WALL: "wall",
    FLOOR: "floor",
    CEILING: "ceiling",
    DOOR: "door",
    WINDOW: "window",
    OPENING: "opening",
}
NUM_CLASSES = len(CLASS_NAMES)
ITEM_CLASSES = {"door": DOOR, "window": WINDOW, "opening": OPENING}

# Aliases de rasters (arrays numpy H x W)
SemanticImage = np.ndarray  # uint8, índice de clase, 0 = void
DepthImage = np.ndarray  # float64, distancia del rayo en metros, 0 = sin impacto
NormalImage = np.ndarray  # float64 H x W x 3, normal unitaria en mundo
ViewportMask = np.ndarray  # bool, alineada al panorama


@dataclass(frozen=True)
class Room:
    """Value Object - Habitación como prisma vertical"""

    id: int
    polygon: Tuple[Tuple[float, float], ...]
    floor_z: float
    ceiling_z: float

    @property
    def height(self) -> float:
        return self.ceiling_z - self.floor_z

    @property
    def num_edges(self) -> int:
        return len(self.polygon)

    def edge(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Segmento polygon[i] -> polygon[(i+1) mod n]"""
        p0 = np.asarray(self.polygon[index], dtype=float)
        p1 = np.asarray(self.polygon[(index + 1) % self.num_edges], dtype=float)
        return p0, p1

    def edge_length(self, index: int) -> float:
        p0, p1 = self.edge(index)
        return float(np.hypot(*(p1 - p0)))

    @property
    def signed_area(self) -> float:
        """Shoelace; positivo si el polígono es antihorario"""
        pts = np.asarray(self.polygon, dtype=float)
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        pts = np.asarray(self.polygon, dtype=float)
        return (
            float(pts[:, 0].min()),
            float(pts[:, 1].min()),
            float(pts[:, 0].max()),
            float(pts[:, 1].max()),
        )


@dataclass(frozen=True)
class WallItem:
    """Value Object - Puerta, ventana o abertura montada en una pared"""

    room: int
    edge: int
    cls: str
    offset: float
    width: float
    bottom_z: float
    top_z: float

    @property
    def class_index(self) -> int:
        return ITEM_CLASSES[self.cls]

    @property
    def area(self) -> float:
        return self.width * (self.top_z - self.bottom_z)


@dataclass(frozen=True)
class Scene:
    """Entidad Principal - Modelo semántico mínimo del edificio"""

    version: int
    rooms: Tuple[Room, ...]
    wall_items: Tuple[WallItem, ...] = ()

    def room_by_id(self, room_id: int) -> Optional[Room]:
        for room in self.rooms:
            if room.id == room_id:
                return room
        return None

    def items_of(self, room_id: int, edge: Optional[int] = None) -> List[WallItem]:
        return [
            item
            for item in self.wall_items
            if item.room == room_id and (edge is None or item.edge == edge)
        ]


@dataclass(frozen=True, eq=False)
class PrimitiveSet:
    """Triángulos etiquetados de la escena, listos para el trazador de rayos

    `surfaces` codifica el origen de cada triángulo: índice de arista para
    paredes, -1 para suelo y -2 para techo.
    """

    triangles: np.ndarray  # (N, 3, 3)
    classes: np.ndarray  # (N,) uint8
    room_ids: np.ndarray  # (N,) int
    surfaces: np.ndarray  # (N,) int
    v0: np.ndarray = field(init=False, repr=False)
    e1: np.ndarray = field(init=False, repr=False)
    e2: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tris = np.asarray(self.triangles, dtype=float).reshape(-1, 3, 3)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "v0", tris[:, 0])
        object.__setattr__(self, "e1", tris[:, 1] - tris[:, 0])
        object.__setattr__(self, "e2", tris[:, 2] - tris[:, 0])
        cross = np.cross(self.e1, self.e2)
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        object.__setattr__(
            self, "normals", np.divide(cross, norm, out=np.zeros_like(cross), where=norm > 0)
        )

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(np.cross(self.e1, self.e2), axis=1)

    @property
    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        pts = self.triangles.reshape(-1, 3)
        return pts.min(axis=0), pts.max(axis=0)


def _canonical(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        return -q
    if q[0] == 0:
        nonzero = q[1:][q[1:] != 0]
        if nonzero.size and nonzero[0] < 0:
            return -q
    return q


@dataclass(frozen=True)
class Pose:
    """Value Object - Transformación rígida 6D cámara -> mundo

    p_world = R · p_cam + t, con cuaternión unitario (w, x, y, z) y w >= 0.
    """

    rotation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    translation: Tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        q = _canonical(np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "rotation", tuple(float(c) for c in q))
        object.__setattr__(self, "translation", tuple(float(c) for c in self.translation))

    @classmethod
    def identity(cls, translation=(0.0, 0.0, 0.0)) -> "Pose":
        return cls((1.0, 0.0, 0.0, 0.0), tuple(translation))

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.rotation)

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.translation)

    def to_dict(self) -> Dict[str, List[float]]:
        return {"q": list(self.rotation), "t": list(self.translation)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Pose":
        return cls(tuple(data["q"]), tuple(data["t"]))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Value Object - Cámara pinhole con punto principal centrado"""

    hfov: float
    width: int
    height: int

    def __post_init__(self):
        if not 0 < self.hfov < math.pi:
            raise ValueError(f"hfov fuera de (0, pi): {self.hfov}")
        if self.width < 2 or self.height < 2:
            raise ValueError(f"Dimensiones inválidas: {self.width}x{self.height}")

    @property
    def focal(self) -> float:
        return (self.width / 2) / math.tan(self.hfov / 2)

    @property
    def vfov(self) -> float:
        return 2 * math.atan((self.height / 2) / self.focal)

    def resized(self, width: int, height: Optional[int] = None) -> "CameraIntrinsics":
        """Misma hfov, otra resolución (altura proporcional por defecto)"""
        if height is None:
            height = max(2, int(round(width * self.height / self.width)))
        return CameraIntrinsics(self.hfov, width, height)


@dataclass(frozen=True)
class CircularBBox:
    """Value Object - Caja alineada en el panorama cuyo intervalo azimutal envuelve

    El intervalo de columnas es [u_min, u_min + width) tomado módulo W.
    """

    u_min: int
    v_min: int
    width: int
    height: int

    def is_valid(self, pano_width: int, pano_height: int) -> bool:
        return (
            0 <= self.u_min < pano_width
            and 0 <= self.v_min
            and self.v_min + self.height <= pano_height
            and 0 < self.width <= pano_width
            and self.height > 0
        )

    def wraps(self, pano_width: int) -> bool:
        return self.u_min + self.width > pano_width

    def columns(self, pano_width: int) -> np.ndarray:
        return (self.u_min + np.arange(self.width)) % pano_width

    def contains(self, u: int, v: int, pano_width: int) -> bool:
        du = (u - self.u_min) % pano_width
        return du < self.width and self.v_min <= v < self.v_min + self.height

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class RenderBundle:
    """Salida del renderizador: semántica, profundidad y normales"""

    semantic: SemanticImage
    depth: DepthImage
    normal: NormalImage
    pose: Pose
    intrinsics: Optional[CameraIntrinsics] = None

    @property
    def width(self) -> int:
        return int(self.semantic.shape[1])

    @property
    def height(self) -> int:
        return int(self.semantic.shape[0])

    @property
    def is_panorama(self) -> bool:
        return self.intrinsics is None


@dataclass(frozen=True, eq=False)
class PanoEncoding:
    """Rejilla de ocupación por clase (soft one-hot) de un panorama de referencia"""

    grid: np.ndarray  # (h, w, NUM_CLASSES - 1)
    position: Tuple[float, float, float]
    pano_width: int
    pano_height: int


@dataclass(frozen=True, eq=False)
class QueryEncoding:
    """Rejilla soft one-hot de la imagen query y sus clases presentes"""

    grid: np.ndarray  # (gh, gw, NUM_CLASSES - 1)
    hfov: float
    present: Tuple[int, ...]  # índices de canal (clase - 1)
    width: int
    height: int

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.hfov, self.width, self.height)


@dataclass(frozen=True)
class MatchResult:
    """Resultado de matching de la query contra una referencia (score = c_bb)"""

    score: float
    rotation: Tuple[float, float, float, float]
    bbox: CircularBBox
    reference_index: int


@dataclass(frozen=True)
class HypothesisConfig:
    """Discretización de rotaciones y resoluciones del matcher"""

    yaw_step_deg: float = 5.0
    pitches_deg: Tuple[float, ...] = (-10.0, 0.0, 10.0)
    rolls_deg: Tuple[float, ...] = (0.0,)
    pano_grid_width: int = 128
    pano_grid_height: int = 64
    query_grid: int = 32


@dataclass(frozen=True)
class RefineConfig:
    """Parámetros de la búsqueda por patrones (compass search)"""

    translation_step: float = 0.4
    rotation_step_deg: float = 5.0
    shrink: float = 0.5
    min_translation_step: float = 0.01
    min_rotation_step_deg: float = 0.1
    max_evaluations: int = 400
    resolution: int = 64
    bound_xy: float = 1.4
    bound_z: float = 0.3

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink debe estar en (0, 1): {self.shrink}")
        positives = {
            "translation_step": self.translation_step,
            "rotation_step_deg": self.rotation_step_deg,
            "min_translation_step": self.min_translation_step,
            "min_rotation_step_deg": self.min_rotation_step_deg,
            "resolution": self.resolution,
            "bound_xy": self.bound_xy,
            "bound_z": self.bound_z,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} debe ser positivo: {value}")
        if self.max_evaluations < 0:
            raise ValueError(f"max_evaluations negativo: {self.max_evaluations}")


@dataclass(frozen=True)
class RefineResult:
    """Resultado de refine_pose"""

    pose: Pose
    score: float
    evaluations: int
    converged: bool
    initial_score: float
    translation_offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    rotation_log: Tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class GridConfig:
    """Rejilla de panoramas de referencia (xy_pano, h_pano)"""

    spacing: float = 1.2
    mode: str = "local"
    h_pano: float = 1.5
    pano_width: int = 256
    pano_height: int = 128

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError(f"spacing debe ser positivo: {self.spacing}")
        if self.mode not in ("global", "local"):
            raise ValueError(f"mode inválido: {self.mode}")


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """Panoramas de referencia precalculados para una escena"""

    scene: Scene
    primitives: PrimitiveSet
    positions: Tuple[Tuple[float, float, float], ...]
    bundles: Tuple[RenderBundle, ...]
    encodings: Tuple[PanoEncoding, ...]
    grid: GridConfig
    scene_hash: str

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class Candidate:
    """Candidato top-n tras refinar"""

    reference_index: int
    match: MatchResult
    pose: Pose
    score: float
    initial_score: float


@dataclass(frozen=True)
class LocalizationResult:
    """Candidatos ordenados y pose absoluta seleccionada"""

    candidates: Tuple[Candidate, ...]
    selected: Pose
    selected_score: float
    refinement_rounds: int

    @property
    def best(self) -> Candidate:
        return self.candidates[0]


@dataclass(frozen=True)
class SceneGenParams:
    """Parámetros del generador de apartamentos sintéticos"""

    min_rooms: int = 4
    max_rooms: int = 8
    min_room_size: float = 3.0
    max_room_size: float = 6.0
    door_density: float = 0.6
    window_density: float = 0.5
    extra_connection_density: float = 0.2
    min_ceiling: float = 2.5
    max_ceiling: float = 3.0


@dataclass(frozen=True)
class QueryParams:
    """Criterios de muestreo de queries de test"""

    hfov_deg: float = 90.0
    tilt_max_deg: float = 10.0
    min_height: float = 1.2
    max_height: float = 1.8
    resolution: int = 128
    min_classes: int = 3
    class_fraction: float = 0.01
    min_center_distance: float = 1.0
    wall_clearance: float = 0.1


@dataclass(frozen=True, eq=False)
class QuerySpec:
    """Pose de query válida con sus diagnósticos"""

    index: int
    pose: Pose
    hfov: float
    scene_id: str
    seed: int
    class_count: int
    center_distance: float
    semantic: Optional[SemanticImage] = field(default=None, repr=False)

    @property
    def intrinsics(self) -> CameraIntrinsics:
        size = self.semantic.shape if self.semantic is not None else (128, 128)
        return CameraIntrinsics(self.hfov, int(size[1]), int(size[0]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "pose": self.pose.to_dict(),
            "hfov_deg": math.degrees(self.hfov),
            "scene_id": self.scene_id,
            "seed": self.seed,
            "class_count": self.class_count,
            "center_distance": self.center_distance,
        }


@dataclass(frozen=True)
class PoseError:
    """Errores de traslación (cm) y rotación (grados)"""

    terr_xyz: float
    terr_xy: float
    rerr_3d: float
    rerr_yaw: float


@dataclass
class Metrics:
    """Métricas agregadas de localización"""

    mode: str
    thresholds_cm: Tuple[float, ...]
    angle_threshold_deg: float
    n: int
    median_terr_cm: Optional[float]
    median_rerr_deg: Optional[float]
    recall: Dict[str, float]
    inlier_pct: float
    topk_recall_pct: float
    mean_bbox_iou: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["thresholds_cm"] = list(self.thresholds_cm)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Metrics":
        data = dict(data)
        data["thresholds_cm"] = tuple(data["thresholds_cm"])
        return cls(**data)

    def check_invariants(self) -> List[str]:
        """Monotonía de recalls; vacío si todo se cumple"""
        problems = []
        values = [self.recall[recall_key(t)] for t in sorted(self.thresholds_cm)]
        if any(a > b for a, b in zip(values, values[1:])):
            problems.append(f"recall no monótono: {values}")
        one_meter = self.recall.get(recall_key(100.0))
        if one_meter is not None:
            if self.inlier_pct > one_meter:
                problems.append("inlier > recall@1m")
            if self.topk_recall_pct < one_meter:
                problems.append("top-k < recall@1m")
        return problems


def recall_key(threshold_cm: float) -> str:
    return f"{threshold_cm:g}cm"


