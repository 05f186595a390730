"""
Spherical Camera Geometry - Pano Localizer
Proyecciones equirectangular/perspectiva, poses y cajas circulares

Convenciones:
- Equirectangular: azimut phi = atan2(x, y), elevación theta = atan2(z, |xy|);
  u = (0.5 + phi / 2pi) * W mod W, v = (0.5 - theta / pi) * H. Centros de
  píxel en coordenadas semienteras.
- Cámara perspectiva: +x derecha, +y abajo, +z adelante. El cambio de base
  fijo B lleva cam(+x, +y, +z) a cuerpo(+x, -z, +y); la rotación de la pose
  lleva el cuerpo (x derecha, y adelante, z arriba) al mundo.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .entities import CameraIntrinsics, CircularBBox, DepthImage, Pose, ViewportMask
from .errors import RasterMismatchError

CAM_TO_BODY = np.array(
    [
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, -1.0, 0.0],
    ]
)

_SERIES_THRESHOLD = 1e-6


# ---------------------------------------------------------------------------
# Cuaterniones (w, x, y, z)
# ---------------------------------------------------------------------------


def canonical_quat(q: Sequence[float]) -> np.ndarray:
    """Normaliza y elige el hemisferio w >= 0"""
    return Pose(tuple(q)).q


def quat_multiply(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def quat_to_matrix(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    x, y, z, w = Rotation.from_matrix(m).as_quat()
    return canonical_quat((w, x, y, z))


def quat_exp(v: Sequence[float]) -> np.ndarray:
    """exp(v) = (cos|v|, sin|v| v/|v|); serie de Taylor cerca de cero"""
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n < _SERIES_THRESHOLD:
        w = 1.0 - n * n / 2.0
        s = 1.0 - n * n / 6.0
    else:
        w = math.cos(n)
        s = math.sin(n) / n
    q = np.concatenate([[w], s * v])
    return q / np.linalg.norm(q)


def quat_log(q: Sequence[float]) -> np.ndarray:
    """Inversa de quat_exp sobre el hemisferio canónico"""
    q = canonical_quat(q)
    xyz = q[1:]
    n = float(np.linalg.norm(xyz))
    if n < _SERIES_THRESHOLD:
        return xyz * (1.0 + n * n / 6.0)
    return xyz * (math.atan2(n, q[0]) / n)


def rotation_from_ypr(yaw_deg: float, pitch_deg: float = 0.0, roll_deg: float = 0.0) -> np.ndarray:
    """Rz(-yaw) Rx(pitch) Ry(roll); yaw medido como azimut (sentido de phi)"""
    x, y, z, w = Rotation.from_euler(
        "ZXY", [-yaw_deg, pitch_deg, roll_deg], degrees=True
    ).as_quat()
    return canonical_quat((w, x, y, z))


def ypr_from_rotation(q: Sequence[float]) -> Tuple[float, float, float]:
    w, x, y, z = q
    a, b, c = Rotation.from_quat([x, y, z, w]).as_euler("ZXY", degrees=True)
    return float(-a), float(b), float(c)


def heading_of(q: Sequence[float]) -> float:
    """Azimut del eje adelante rotado: atan2(f_x, f_y)"""
    forward = quat_to_matrix(q) @ np.array([0.0, 1.0, 0.0])
    return math.degrees(math.atan2(forward[0], forward[1]))


def rotation_error_deg(q_a: Sequence[float], q_b: Sequence[float]) -> float:
    """Ángulo geodésico entre rotaciones, estable cerca de cero"""
    a = canonical_quat(q_a)
    b = canonical_quat(q_b)
    chord = min(np.linalg.norm(a - b), np.linalg.norm(a + b))
    return math.degrees(4.0 * math.asin(min(1.0, chord / 2.0)))


# ---------------------------------------------------------------------------
# Poses
# ---------------------------------------------------------------------------


def pose_matrix(pose: Pose) -> np.ndarray:
    """Matriz homogénea 4x4 de la pose"""
    m = np.eye(4)
    m[:3, :3] = quat_to_matrix(pose.rotation)
    m[:3, 3] = pose.translation
    return m


def compose_pose(reference: Pose, relative: Pose) -> Pose:
    """R = R_ref R_rel; t = R_ref t_rel + t_ref"""
    q = quat_multiply(reference.rotation, relative.rotation)
    t = quat_to_matrix(reference.rotation) @ relative.t + reference.t
    return Pose(tuple(q), tuple(t))


def relative_pose(reference: Pose, absolute: Pose) -> Pose:
    """Offset P_i tal que compose_pose(reference, P_i) == absolute"""
    q_ref_inv = quat_conjugate(reference.rotation)
    q = quat_multiply(q_ref_inv, absolute.rotation)
    t = quat_to_matrix(q_ref_inv) @ (absolute.t - reference.t)
    return Pose(tuple(q), tuple(t))


def camera_to_world(rotation: Sequence[float]) -> np.ndarray:
    """R · B: rayos de cámara a direcciones en mundo"""
    return quat_to_matrix(rotation) @ CAM_TO_BODY


# ---------------------------------------------------------------------------
# Equirectangular
# ---------------------------------------------------------------------------


def equirect_pixel_to_dir(u, v, width: int, height: int) -> np.ndarray:
    """(u, v) continuos -> dirección unitaria (..., 3)"""
    phi = (np.asarray(u, dtype=float) / width - 0.5) * 2.0 * np.pi
    theta = (0.5 - np.asarray(v, dtype=float) / height) * np.pi
    cos_t = np.cos(theta)
    return np.stack([cos_t * np.sin(phi), cos_t * np.cos(phi), np.sin(theta)], axis=-1)


def dir_to_equirect_pixel(d, width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    """Dirección (no nula) -> (u, v); en los polos u = W/2"""
    d = np.asarray(d, dtype=float)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    horizontal = np.hypot(x, y)
    phi = np.where(horizontal > 0, np.arctan2(x, y), 0.0)
    theta = np.arctan2(z, horizontal)
    u = np.mod((0.5 + phi / (2.0 * np.pi)) * width, width)
    v = (0.5 - theta / np.pi) * height
    return u, v


def panorama_directions(width: int, height: int) -> np.ndarray:
    """Direcciones de los centros de píxel, (H, W, 3)"""
    u, v = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    return equirect_pixel_to_dir(u, v, width, height)


# ---------------------------------------------------------------------------
# Perspectiva
# ---------------------------------------------------------------------------


def persp_pixel_to_ray(K: CameraIntrinsics, u, v) -> np.ndarray:
    """Píxel continuo -> rayo unitario en el frame de cámara"""
    f = K.focal
    x = (np.asarray(u, dtype=float) - K.width / 2) / f
    y = (np.asarray(v, dtype=float) - K.height / 2) / f
    rays = np.stack([x, y, np.ones_like(x)], axis=-1)
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def perspective_rays(K: CameraIntrinsics) -> np.ndarray:
    """Rayos de cámara de todos los centros de píxel, (H, W, 3)"""
    u, v = np.meshgrid(np.arange(K.width) + 0.5, np.arange(K.height) + 0.5)
    return persp_pixel_to_ray(K, u, v)


def project_points(pose: Pose, K: CameraIntrinsics, points):
    """Proyecta puntos de mundo; devuelve (u, v, distancia, delante)"""
    points = np.asarray(points, dtype=float)
    cam = (points - pose.t) @ camera_to_world(pose.rotation)
    z = cam[..., 2]
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    f = K.focal
    u = f * cam[..., 0] / safe_z + K.width / 2
    v = f * cam[..., 1] / safe_z + K.height / 2
    distance = np.linalg.norm(points - pose.t, axis=-1)
    return u, v, distance, in_front


def project_point(pose: Pose, K: CameraIntrinsics, p_world) -> Optional[Tuple[float, float, float]]:
    """(u, v, distancia del rayo) o None si queda detrás de la cámara"""
    u, v, distance, in_front = project_points(pose, K, np.asarray(p_world, dtype=float))
    if not bool(in_front):
        return None
    return float(u), float(v), float(distance)


# ---------------------------------------------------------------------------
# Viewports y cajas circulares
# ---------------------------------------------------------------------------


def compute_viewport_mask(
    pano_depth: DepthImage,
    pano_pos,
    persp_depth: DepthImage,
    persp_pose: Pose,
    K: CameraIntrinsics,
) -> ViewportMask:
    """Píxeles del panorama visibles desde la cámara perspectiva (con oclusión)"""
    if persp_depth.shape != (K.height, K.width):
        raise RasterMismatchError(
            f"Profundidad perspectiva {persp_depth.shape} no coincide con {K.height}x{K.width}"
        )
    height, width = pano_depth.shape
    dirs = panorama_directions(width, height)
    points = np.asarray(pano_pos, dtype=float) + pano_depth[..., None] * dirs
    u, v, distance, in_front = project_points(persp_pose, K, points)

    inside = (pano_depth > 0) & in_front & (u >= 0) & (u < K.width) & (v >= 0) & (v < K.height)
    iu = np.clip(np.floor(np.where(inside, u, 0)).astype(int), 0, K.width - 1)
    iv = np.clip(np.floor(np.where(inside, v, 0)).astype(int), 0, K.height - 1)
    seen = persp_depth[iv, iu]
    tolerance = np.maximum(0.02, 0.01 * distance)
    return inside & (seen > 0) & (np.abs(distance - seen) <= tolerance)


def frustum_mask(rotation: Sequence[float], K: CameraIntrinsics, width: int, height: int) -> ViewportMask:
    """Viewport analítico de una cámara co-localizada con el panorama"""
    dirs = panorama_directions(width, height)
    cam = dirs @ camera_to_world(rotation)
    z = cam[..., 2]
    safe_z = np.where(z > 0, z, 1.0)
    tan_x = math.tan(K.hfov / 2)
    tan_y = (K.height / 2) / K.focal
    mask = (z > 0) & (np.abs(cam[..., 0] / safe_z) <= tan_x) & (np.abs(cam[..., 1] / safe_z) <= tan_y)

    forward = camera_to_world(rotation) @ np.array([0.0, 0.0, 1.0])
    u, v = dir_to_equirect_pixel(forward, width, height)
    mask[min(int(v), height - 1), int(u) % width] = True
    return mask


def mask_to_circular_bbox(mask: ViewportMask) -> Optional[CircularBBox]:
    """Caja mínima; el intervalo de columnas es el complemento del mayor hueco cíclico"""
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    height, width = mask.shape
    v_min = int(rows[0])
    box_height = int(rows[-1] - rows[0] + 1)

    occupied = mask.any(axis=0)
    if occupied.all():
        return CircularBBox(0, v_min, width, box_height)

    start = int(np.flatnonzero(occupied)[0])
    rolled = np.roll(occupied, -start)
    best_start, best_len = 0, 0
    run_start = None
    for i, occ in enumerate(np.append(rolled, True)):
        if not occ and run_start is None:
            run_start = i
        elif occ and run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None

    u_min = (start + best_start + best_len) % width
    return CircularBBox(int(u_min), v_min, width - best_len, box_height)


def _cyclic_overlap(a_start: int, a_len: int, b_start: int, b_len: int, period: int) -> int:
    total = 0
    for shift in (-period, 0, period):
        lo = max(a_start, b_start + shift)
        hi = min(a_start + a_len, b_start + shift + b_len)
        total += max(0, hi - lo)
    return min(total, a_len, b_len)


def circular_iou(a: CircularBBox, b: CircularBBox, width: int, height: int) -> float:
    """IoU con envolvimiento azimutal (hasta dos componentes de intersección)"""
    du = _cyclic_overlap(a.u_min, a.width, b.u_min, b.width, width)
    dv = max(0, min(a.v_min + a.height, b.v_min + b.height) - max(a.v_min, b.v_min))
    intersection = du * dv
    union = a.width * a.height + b.width * b.height - intersection
    return intersection / union if union > 0 else 0.0


def bbox_from_rotation(
    rotation: Sequence[float], K: CameraIntrinsics, width: int, height: int
) -> CircularBBox:
    """Caja circular del frustum analítico (aproximación de rotación pura)"""
    return mask_to_circular_bbox(frustum_mask(rotation, K, width, height))
