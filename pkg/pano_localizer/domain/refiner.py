"""
Pose Refiner - Pano Localizer
Refinamiento 6D por búsqueda de patrón (compass search) sobre un objetivo render-and-compare

El objetivo renderiza la escena en la pose candidata, la reduce a una rejilla
baja por filtro de caja y mide el IoU suave balanceado por clase contra la
query. La búsqueda no usa gradientes: el objetivo rasterizado es constante a trozos.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .entities import (
    NUM_CLASSES,
    CameraIntrinsics,
    HypothesisConfig,
    PrimitiveSet,
    Pose,
    RefineConfig,
    RefineResult,
    Scene,
    SemanticImage,
)
from .errors import OutOfBoundsError
from .geometry import (
    camera_to_world,
    quat_conjugate,
    quat_log,
    quat_multiply,
    quat_to_matrix,
    rotation_from_ypr,
)
from .matcher import ViewportMatcher, agreement, class_fractions, encode_panorama, encode_query
from .renderer import intersect_ray, render_panorama, render_perspective
from .scene_model import point_room_lookup

logger = logging.getLogger(__name__)

BOUNDS_TOLERANCE = 1e-9
SUPERSAMPLE = 2
PIVOT_FALLBACK = 3.0
PIVOT_RANGE = (0.5, 20.0)
RESTART_SHRINKS = 2


def harden_query(query_sem: SemanticImage, width: int, height: int) -> np.ndarray:
    """Submuestrea la query por filtro de caja y asigna a cada celda su clase mayoritaria"""
    fractions = class_fractions(query_sem, height, width)
    void = 1.0 - fractions.sum(axis=-1, keepdims=True)
    labels = np.argmax(np.concatenate([void, fractions], axis=-1), axis=-1)
    return labels.astype(np.uint8)


class RenderCompareObjective:
    """Acuerdo semántico entre la query y el render en una pose candidata

    La rejilla de comparación es de `resolution` columnas (acotada por la
    query); el render se hace hasta SUPERSAMPLE veces más fino y se reduce por
    filtro de caja, de modo que desplazamientos subcelda siguen moviendo el score.
    """

    def __init__(
        self,
        prims: PrimitiveSet,
        query_sem: SemanticImage,
        K: CameraIntrinsics,
        resolution: int = 64,
        class_fraction: float = 0.01,
    ):
        self.prims = prims
        self.K = K.resized(min(resolution, K.width))
        self.render_K = K.resized(min(SUPERSAMPLE * self.K.width, K.width))

        query_sem = np.asarray(query_sem)
        if query_sem.shape == (self.render_K.height, self.render_K.width):
            labels = query_sem
        else:
            labels = harden_query(query_sem, self.render_K.width, self.render_K.height)
        self.query_grid = class_fractions(labels, self.K.height, self.K.width)

        totals = np.bincount(query_sem.ravel().astype(int), minlength=NUM_CLASSES)[1:] / query_sem.size
        self.present = tuple(int(c) for c in np.flatnonzero(totals >= class_fraction))
        self.evaluations = 0

    def __call__(self, pose: Pose) -> float:
        self.evaluations += 1
        bundle = render_perspective(self.prims, pose, self.render_K)
        rendered = class_fractions(bundle.semantic, self.K.height, self.K.width)
        return agreement(rendered, self.query_grid, self.present)


def objective(
    prims: PrimitiveSet,
    query_sem: SemanticImage,
    K: CameraIntrinsics,
    pose: Pose,
    resolution: int = 64,
) -> float:
    """Acuerdo en [0, 1] entre la query y el render en `pose`"""
    return RenderCompareObjective(prims, query_sem, K, resolution)(pose)


def pivot_distance(prims: PrimitiveSet, pose: Pose) -> float:
    """Distancia a la superficie bajo el rayo central (acotada; fallback si no hay impacto)"""
    forward = camera_to_world(pose.rotation) @ np.array([0.0, 0.0, 1.0])
    hit = intersect_ray(prims, pose.t, forward)
    distance = PIVOT_FALLBACK if hit is None else hit.distance
    return float(np.clip(distance, *PIVOT_RANGE))


def _offset_pose(init: Pose, x: np.ndarray, pivot: float = np.inf) -> Pose:
    """Pose desplazada por x = (derecha, adelante, arriba, yaw, pitch, roll)

    La traslación se expresa en el cuerpo de la pose inicial. Un paso lateral
    o vertical gira además la cámara para seguir mirando al punto a distancia
    `pivot` sobre el rayo central, así los ejes de traslación y de rotación
    quedan casi desacoplados en el objetivo.
    """
    if not np.any(x):
        return init
    body = quat_to_matrix(init.rotation)
    depth = max(pivot - x[1], PIVOT_RANGE[0])
    yaw = x[3] - np.degrees(np.arctan2(x[0], depth))
    pitch = x[4] - np.degrees(np.arctan2(x[2], depth))
    q = quat_multiply(init.rotation, rotation_from_ypr(yaw, pitch, x[5]))
    return Pose(tuple(q), tuple(init.t + body @ x[:3]))


def _inside_box(prims: PrimitiveSet, p: np.ndarray) -> bool:
    if len(prims) == 0:
        return False
    lo, hi = prims.bounds
    return bool(np.all(p >= lo - BOUNDS_TOLERANCE) and np.all(p <= hi + BOUNDS_TOLERANCE))


class _BudgetExhausted(Exception):
    pass


def refine_pose(
    prims: PrimitiveSet,
    query_sem: SemanticImage,
    K: CameraIntrinsics,
    init: Pose,
    cfg: Optional[RefineConfig] = None,
    anchor: Optional[Sequence[float]] = None,
    scorer: Optional[RenderCompareObjective] = None,
) -> RefineResult:
    """Búsqueda de patrón sobre 3 traslaciones y yaw/pitch/roll

    En cada sondeo se evalúa +/- el paso actual en cada eje (orden fijo), se
    avanza al mejor vecino que mejora estrictamente y se prueba un paso de
    patrón en la misma dirección; si ningún vecino mejora se reducen todos los
    pasos. Al bajar de los umbrales la búsqueda se relanza desde la mejor pose
    con pasos intermedios, hasta que una pasada completa no se mueve. Las
    traslaciones quedan acotadas alrededor de `anchor` (por defecto la pose
    inicial). Sólo cuentan para el presupuesto las evaluaciones de vecinos.
    """
    cfg = cfg or RefineConfig()
    if not _inside_box(prims, init.t):
        raise OutOfBoundsError(f"Pose inicial {init.translation} fuera de los límites de la escena")

    scorer = scorer or RenderCompareObjective(prims, query_sem, K, cfg.resolution)
    anchor = init.t if anchor is None else np.asarray(anchor, dtype=float)
    limits = np.array([cfg.bound_xy, cfg.bound_xy, cfg.bound_z])
    pivot = pivot_distance(prims, init)

    initial_score = scorer(init)
    best_score = initial_score
    x = np.zeros(6)
    evaluations = 0

    def score_of(candidate: np.ndarray) -> Optional[float]:
        """Score del vecino, o None si sale de los límites alrededor del ancla"""
        nonlocal evaluations
        if evaluations >= cfg.max_evaluations:
            raise _BudgetExhausted
        pose = _offset_pose(init, candidate, pivot)
        if np.any(np.abs(pose.t - anchor) > limits + BOUNDS_TOLERANCE):
            return None
        evaluations += 1
        return scorer(pose)

    step_t, step_r = cfg.translation_step, cfg.rotation_step_deg
    restart_t = cfg.translation_step * cfg.shrink**RESTART_SHRINKS
    restart_r = cfg.rotation_step_deg * cfg.shrink**RESTART_SHRINKS
    pass_start = x.copy()
    converged = False
    try:
        while True:
            if step_t < cfg.min_translation_step and step_r < cfg.min_rotation_step_deg:
                if np.array_equal(x, pass_start):
                    converged = True
                    break
                pass_start = x.copy()
                step_t, step_r = restart_t, restart_r
                continue

            best_x: Optional[np.ndarray] = None
            best_neighbour = best_score
            for axis in range(6):
                step = step_t if axis < 3 else step_r
                for sign in (1.0, -1.0):
                    candidate = x.copy()
                    candidate[axis] += sign * step
                    score = score_of(candidate)
                    if score is not None and score > best_neighbour:
                        best_neighbour = score
                        best_x = candidate

            if best_x is None:
                step_t *= cfg.shrink
                step_r *= cfg.shrink
                continue

            previous, x, best_score = x, best_x, best_neighbour
            pattern = 2.0 * x - previous
            score = score_of(pattern)
            if score is not None and score > best_score:
                x, best_score = pattern, score
    except _BudgetExhausted:
        pass

    pose = _offset_pose(init, x, pivot)
    rotation_offset = quat_multiply(quat_conjugate(init.rotation), pose.rotation)
    logger.debug(
        f"Refinamiento: score {initial_score:.4f} -> {best_score:.4f} "
        f"({evaluations} evaluaciones, convergido={converged})"
    )
    return RefineResult(
        pose=pose,
        score=best_score,
        evaluations=evaluations,
        converged=converged,
        initial_score=initial_score,
        translation_offset=tuple(float(c) for c in pose.t - init.t),
        rotation_log=tuple(float(c) for c in quat_log(rotation_offset)),
    )


def iterate_refinement(
    prims: PrimitiveSet,
    query_sem: SemanticImage,
    K: CameraIntrinsics,
    estimate: Pose,
    scene: Scene,
    rounds: int,
    pano_size: Tuple[int, int] = (256, 128),
    hypotheses: Optional[HypothesisConfig] = None,
    cfg: Optional[RefineConfig] = None,
    anchor: Optional[Sequence[float]] = None,
    matcher: Optional[ViewportMatcher] = None,
    scorer: Optional[RenderCompareObjective] = None,
) -> Tuple[Pose, float, int]:
    """Re-renderiza un panorama en la posición estimada, re-empareja y refina

    Cada ronda se acepta sólo si mejora el score del objetivo. Se detiene si la
    posición estimada sale de todas las habitaciones.

    Returns:
        (pose, score, rondas aplicadas)
    """
    cfg = cfg or RefineConfig()
    matcher = matcher or ViewportMatcher(hypotheses)
    scorer = scorer or RenderCompareObjective(prims, query_sem, K, cfg.resolution)
    anchor = estimate.t if anchor is None else np.asarray(anchor, dtype=float)
    width, height = pano_size

    current = estimate
    current_score = scorer(current)
    applied = 0
    query = encode_query(query_sem, K.hfov, matcher.config.query_grid)

    for round_index in range(max(0, rounds)):
        position = current.t
        if point_room_lookup(scene, position) is None:
            logger.debug(f"Ronda {round_index}: estimación fuera de las habitaciones, se detiene")
            break

        bundle = render_panorama(prims, position, width, height)
        enc = encode_panorama(
            bundle.semantic, position, matcher.config.pano_grid_width, matcher.config.pano_grid_height
        )
        match = matcher.match(enc, query)
        seed = Pose(match.rotation, tuple(position))
        result = refine_pose(prims, query_sem, K, seed, cfg, anchor=anchor, scorer=scorer)

        if result.score > current_score:
            current, current_score = result.pose, result.score
            applied += 1
        else:
            break

    return current, current_score, applied
