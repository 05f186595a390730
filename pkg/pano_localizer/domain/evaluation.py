"""
Evaluation - Pano Localizer
Muestreo de poses de query, errores de pose y métricas de recall
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import shapely
from shapely.geometry import Point

from .entities import (
    NUM_CLASSES,
    CameraIntrinsics,
    Metrics,
    PoseError,
    Pose,
    PrimitiveSet,
    QueryParams,
    QuerySpec,
    Scene,
    SemanticImage,
    recall_key,
)
from .errors import InvalidParamsError, QuerySamplingError
from .geometry import camera_to_world, heading_of, rotation_error_deg, rotation_from_ypr
from .renderer import intersect_ray, render_perspective
from .scene_model import room_polygon

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS_CM = (10.0, 50.0, 100.0)
ONE_METER_CM = 100.0
MAX_REJECTIONS_PER_QUERY = 1000


def count_classes(sem: SemanticImage, class_fraction: float = 0.01) -> int:
    """Número de clases no-void que cubren al menos `class_fraction` de los píxeles"""
    sem = np.asarray(sem)
    totals = np.bincount(sem.ravel().astype(int), minlength=NUM_CLASSES)[1:] / sem.size
    return int(np.count_nonzero(totals >= class_fraction))


def center_ray_distance(prims: PrimitiveSet, pose: Pose) -> Optional[float]:
    """Distancia de impacto del rayo central de la cámara (None sin impacto)"""
    forward = camera_to_world(pose.rotation) @ np.array([0.0, 0.0, 1.0])
    hit = intersect_ray(prims, pose.t, forward)
    return None if hit is None else hit.distance


def _uniform_in_room(rng: np.random.Generator, room) -> Optional[np.ndarray]:
    xmin, ymin, xmax, ymax = room.bounds
    polygon = room_polygon(room)
    for _ in range(100):
        x, y = rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)
        if shapely.contains_xy(polygon, x, y):
            return np.array([x, y])
    return None


def sample_query_poses(
    scene: Scene,
    prims: PrimitiveSet,
    count: int,
    params: Optional[QueryParams] = None,
    seed: int = 0,
    scene_id: str = "",
) -> List[QuerySpec]:
    """Muestreo por rechazo de poses de query válidas

    Criterios: (a) al menos `min_classes` clases con >= 1% de píxeles,
    (b) rayo central a >= 1 m (la cámara mira hacia el interior), y
    (c) posición a >= 10 cm de cualquier pared.
    """
    params = params or QueryParams()
    if count < 0:
        raise InvalidParamsError(f"count negativo: {count}")
    if count == 0:
        return []
    if not scene.rooms:
        raise QuerySamplingError("Escena sin habitaciones")

    rng = np.random.default_rng(seed)
    hfov = math.radians(params.hfov_deg)
    K = CameraIntrinsics(hfov, params.resolution, params.resolution)
    rooms = list(scene.rooms)
    areas = np.array([max(room.signed_area, 0.0) for room in rooms])
    weights = areas / areas.sum()

    accepted: List[QuerySpec] = []
    rejections = 0
    budget = MAX_REJECTIONS_PER_QUERY * count
    while len(accepted) < count:
        if rejections >= budget:
            raise QuerySamplingError(
                f"Sólo {len(accepted)}/{count} queries válidas tras {rejections} rechazos"
            )
        room = rooms[int(rng.choice(len(rooms), p=weights))]
        xy = _uniform_in_room(rng, room)
        z = room.floor_z + rng.uniform(params.min_height, params.max_height)
        yaw = rng.uniform(0.0, 360.0)
        pitch = rng.uniform(-params.tilt_max_deg, params.tilt_max_deg)
        roll = rng.uniform(-params.tilt_max_deg, params.tilt_max_deg)

        if xy is None or z >= room.ceiling_z:
            rejections += 1
            continue
        if room_polygon(room).exterior.distance(Point(xy)) < params.wall_clearance:
            rejections += 1
            continue

        pose = Pose(tuple(rotation_from_ypr(yaw, pitch, roll)), (float(xy[0]), float(xy[1]), float(z)))
        distance = center_ray_distance(prims, pose)
        if distance is None or distance < params.min_center_distance:
            rejections += 1
            continue

        semantic = render_perspective(prims, pose, K).semantic
        classes = count_classes(semantic, params.class_fraction)
        if classes < params.min_classes:
            rejections += 1
            continue

        accepted.append(
            QuerySpec(
                index=len(accepted),
                pose=pose,
                hfov=hfov,
                scene_id=scene_id,
                seed=seed,
                class_count=classes,
                center_distance=float(distance),
                semantic=semantic,
            )
        )

    logger.debug(f"Queries muestreadas: {count} aceptadas, {rejections} rechazos")
    return accepted


def pose_error(gt: Pose, est: Pose) -> PoseError:
    """Errores de traslación (cm) y rotación (grados) entre dos poses"""
    delta = gt.t - est.t
    yaw_delta = abs(heading_of(gt.rotation) - heading_of(est.rotation)) % 360.0
    return PoseError(
        terr_xyz=float(np.linalg.norm(delta) * 100.0),
        terr_xy=float(np.linalg.norm(delta[:2]) * 100.0),
        rerr_3d=rotation_error_deg(gt.rotation, est.rotation),
        rerr_yaw=float(min(yaw_delta, 360.0 - yaw_delta)),
    )


def _median(values: Sequence[float]) -> Optional[float]:
    if len(values) == 0:
        return None
    return float(np.median(np.sort(np.asarray(values, dtype=float))))


def compute_metrics(
    errors: Sequence[PoseError],
    topk_errors: Sequence[PoseError],
    thresholds_cm: Sequence[float] = DEFAULT_THRESHOLDS_CM,
    angle_threshold_deg: float = 30.0,
    mode: str = "3d",
    bbox_ious: Optional[Sequence[float]] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Metrics:
    """Medianas (sólo errores < 1 m), recalls, tasa de inliers y recall top-k

    mode "3d" usa terr_xyz / rerr_3d; mode "2d" usa terr_xy / rerr_yaw.
    """
    if not errors:
        raise InvalidParamsError("compute_metrics requiere al menos un error")
    if len(topk_errors) != len(errors):
        raise InvalidParamsError(f"topk_errors ({len(topk_errors)}) no alineado con errors ({len(errors)})")
    if mode not in ("2d", "3d"):
        raise InvalidParamsError(f"mode inválido: {mode}")

    def terr(e: PoseError) -> float:
        return e.terr_xyz if mode == "3d" else e.terr_xy

    def rerr(e: PoseError) -> float:
        return e.rerr_3d if mode == "3d" else e.rerr_yaw

    n = len(errors)
    within = [e for e in errors if terr(e) < ONE_METER_CM]
    recall = {recall_key(t): 100.0 * sum(terr(e) < t for e in errors) / n for t in sorted(thresholds_cm)}
    inliers = sum(terr(e) < ONE_METER_CM and rerr(e) < angle_threshold_deg for e in errors)
    topk_hits = sum(terr(e) < ONE_METER_CM for e in topk_errors)

    mean_iou = None
    if bbox_ious:
        mean_iou = float(np.mean(np.sort(np.asarray(bbox_ious, dtype=float))))

    return Metrics(
        mode=mode,
        thresholds_cm=tuple(float(t) for t in sorted(thresholds_cm)),
        angle_threshold_deg=float(angle_threshold_deg),
        n=n,
        median_terr_cm=_median([terr(e) for e in within]),
        median_rerr_deg=_median([rerr(e) for e in within]),
        recall=recall,
        inlier_pct=100.0 * inliers / n,
        topk_recall_pct=100.0 * topk_hits / n,
        mean_bbox_iou=mean_iou,
        config=dict(config or {}),
    )
