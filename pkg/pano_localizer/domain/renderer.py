"""
Semantic Renderer - Pano Localizer
Ray casting en CPU de imágenes semánticas, de profundidad y de normales
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .entities import CameraIntrinsics, PrimitiveSet, Pose, RenderBundle
from .geometry import camera_to_world, panorama_directions, perspective_rays

logger = logging.getLogger(__name__)

HIT_EPS = 1e-9
TIE_EPS = 1e-9
DET_EPS = 1e-14
# Elementos rayo x triángulo por bloque
CHUNK_ELEMENTS = 1_500_000


@dataclass(frozen=True)
class Hit:
    """Impacto más cercano de un rayo"""

    distance: float
    cls: int
    normal: Tuple[float, float, float]
    triangle: int


def _intersect_block(
    v0: np.ndarray, e1: np.ndarray, e2: np.ndarray, origins: np.ndarray, dirs: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Möller–Trumbore vectorizado; devuelve (distancia, índice local) por rayo"""
    pvec = np.cross(dirs[:, None, :], e2[None, :, :])
    det = np.einsum("tk,rtk->rt", e1, pvec)
    ok = np.abs(det) > DET_EPS
    inv_det = np.divide(1.0, det, out=np.zeros_like(det), where=ok)

    tvec = origins[:, None, :] - v0[None, :, :]
    u = np.einsum("rtk,rtk->rt", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1[None, :, :])
    v = np.einsum("rk,rtk->rt", dirs, qvec) * inv_det
    t = np.einsum("tk,rtk->rt", e2, qvec) * inv_det

    valid = ok & (u >= -HIT_EPS) & (v >= -HIT_EPS) & (u + v <= 1.0 + HIT_EPS) & (t > HIT_EPS)
    t = np.where(valid, t, np.inf)
    t_min = t.min(axis=1)
    # empates dentro de TIE_EPS -> menor índice de triángulo
    first = np.argmax(t <= (t_min + TIE_EPS)[:, None], axis=1)
    index = np.where(np.isfinite(t_min), first, -1)
    return np.where(np.isfinite(t_min), t[np.arange(len(t)), first], 0.0), index


def intersect_rays(
    prims: PrimitiveSet,
    origins: np.ndarray,
    dirs: np.ndarray,
    candidates: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Intersección más cercana para N rayos

    Returns:
        (distancias (N,), índices de triángulo (N,)); índice -1 y distancia 0 sin impacto
    """
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    origins = np.broadcast_to(np.asarray(origins, dtype=float), dirs.shape)
    n_rays = len(dirs)
    distances = np.zeros(n_rays)
    indices = np.full(n_rays, -1, dtype=int)

    tri_ids = np.arange(len(prims)) if candidates is None else np.asarray(candidates, dtype=int)
    if n_rays == 0 or tri_ids.size == 0:
        return distances, indices

    v0, e1, e2 = prims.v0[tri_ids], prims.e1[tri_ids], prims.e2[tri_ids]
    step = max(1, CHUNK_ELEMENTS // len(tri_ids))
    for start in range(0, n_rays, step):
        stop = min(n_rays, start + step)
        dist, local = _intersect_block(v0, e1, e2, origins[start:stop], dirs[start:stop])
        distances[start:stop] = dist
        indices[start:stop] = np.where(local >= 0, tri_ids[np.maximum(local, 0)], -1)
    return distances, indices


def intersect_ray(prims: PrimitiveSet, origin: Sequence[float], direction: Sequence[float]) -> Optional[Hit]:
    """Impacto más cercano de un único rayo (dirección unitaria)"""
    d = np.asarray(direction, dtype=float)
    distances, indices = intersect_rays(prims, np.asarray(origin, dtype=float), d[None, :])
    if indices[0] < 0:
        return None
    normal = prims.normals[indices[0]]
    if np.dot(normal, d) > 0:
        normal = -normal
    return Hit(float(distances[0]), int(prims.classes[indices[0]]), tuple(float(c) for c in normal), int(indices[0]))


def _shade(prims: PrimitiveSet, origin: np.ndarray, dirs: np.ndarray, candidates=None):
    height, width = dirs.shape[:2]
    flat = dirs.reshape(-1, 3)
    distances, indices = intersect_rays(prims, origin, flat, candidates)
    hit = indices >= 0

    semantic = np.zeros(len(flat), dtype=np.uint8)
    semantic[hit] = prims.classes[indices[hit]]
    normals = np.zeros_like(flat)
    normals[hit] = prims.normals[indices[hit]]
    facing = np.einsum("nk,nk->n", normals, flat) > 0
    normals[facing] *= -1.0

    return (
        semantic.reshape(height, width),
        np.where(hit, distances, 0.0).reshape(height, width),
        normals.reshape(height, width, 3),
    )


def render_panorama(prims: PrimitiveSet, position: Sequence[float], width: int = 256, height: int = 128) -> RenderBundle:
    """Panorama equirectangular con orientación identidad (norte arriba, horizonte alineado)"""
    origin = np.asarray(position, dtype=float)
    semantic, depth, normal = _shade(prims, origin, panorama_directions(width, height))
    logger.debug(f"Panorama {width}x{height} en {tuple(np.round(origin, 3))}")
    return RenderBundle(semantic, depth, normal, Pose.identity(tuple(origin)))


def frustum_candidates(prims: PrimitiveSet, pose: Pose, K: CameraIntrinsics) -> np.ndarray:
    """Triángulos no descartados por ningún plano del frustum

    Un triángulo con los tres vértices estrictamente fuera de un mismo plano
    lateral (o detrás de la cámara) no puede cortar ningún rayo de píxel.
    """
    if len(prims) == 0:
        return np.zeros(0, dtype=int)
    cam = (prims.triangles - pose.t) @ camera_to_world(pose.rotation)
    x, y, z = cam[..., 0], cam[..., 1], cam[..., 2]
    tan_x = math.tan(K.hfov / 2)
    tan_y = (K.height / 2) / K.focal
    outside = (
        (z <= 0).all(axis=1)
        | (x - tan_x * z > HIT_EPS).all(axis=1)
        | (-x - tan_x * z > HIT_EPS).all(axis=1)
        | (y - tan_y * z > HIT_EPS).all(axis=1)
        | (-y - tan_y * z > HIT_EPS).all(axis=1)
    )
    return np.flatnonzero(~outside)


def render_perspective(prims: PrimitiveSet, pose: Pose, K: CameraIntrinsics) -> RenderBundle:
    """Imagen perspectiva: rayos de píxel transformados por la pose"""
    dirs = perspective_rays(K) @ camera_to_world(pose.rotation).T
    candidates = frustum_candidates(prims, pose, K)
    semantic, depth, normal = _shade(prims, pose.t, dirs, candidates)
    logger.debug(f"Perspectiva {K.width}x{K.height}: {candidates.size}/{len(prims)} triángulos tras culling")
    return RenderBundle(semantic, depth, normal, pose, K)
