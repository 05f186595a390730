"""
Image Adapter - Pano Localizer
Códecs PNG (Pillow) para rasters semánticos, de profundidad y de normales
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from ...domain.entities import (
    NUM_CLASSES,
    CameraIntrinsics,
    DepthImage,
    NormalImage,
    Pose,
    RenderBundle,
    SemanticImage,
)
from ...domain.errors import RasterMismatchError

logger = logging.getLogger(__name__)

# Paleta RGB para vistas de depuración (índice = clase)
PALETTE = np.array(
    [
        [0, 0, 0],  # void
        [174, 199, 232],  # wall
        [152, 223, 138],  # floor
        [255, 187, 120],  # ceiling
        [214, 39, 40],  # door
        [31, 119, 180],  # window
        [148, 103, 189],  # opening
    ],
    dtype=np.uint8,
)

MAX_DEPTH_MM = 65535


def encode_depth(depth: DepthImage) -> np.ndarray:
    """Metros -> milímetros uint16 (0 = sin impacto, satura en 65.535 m)"""
    return np.clip(np.round(np.asarray(depth, dtype=float) * 1000.0), 0, MAX_DEPTH_MM).astype(np.uint16)


def decode_depth(raw: np.ndarray) -> DepthImage:
    return np.asarray(raw, dtype=float) / 1000.0


def encode_normals(normals: NormalImage) -> np.ndarray:
    """n_mapped = round((n + 1) / 2 * 255)"""
    return np.clip(np.round((np.asarray(normals, dtype=float) + 1.0) / 2.0 * 255.0), 0, 255).astype(np.uint8)


def decode_normals(raw: np.ndarray, depth: Optional[DepthImage] = None) -> NormalImage:
    normals = np.asarray(raw, dtype=float) / 255.0 * 2.0 - 1.0
    norm = np.linalg.norm(normals, axis=-1, keepdims=True)
    normals = np.divide(normals, norm, out=np.zeros_like(normals), where=norm > 0)
    if depth is not None:
        normals[np.asarray(depth) <= 0] = 0.0
    return normals


def colorize(sem: SemanticImage) -> np.ndarray:
    """Imagen RGB de clases con la paleta fija"""
    sem = np.asarray(sem)
    if sem.size and int(sem.max()) >= NUM_CLASSES:
        raise RasterMismatchError(f"Clase fuera de la paleta: {int(sem.max())}")
    return PALETTE[sem]


def save_semantic(sem: SemanticImage, path: Path) -> Path:
    Image.fromarray(np.asarray(sem, dtype=np.uint8)).save(path)
    return Path(path)


def load_semantic(path: Path) -> SemanticImage:
    with Image.open(path) as image:
        if image.mode not in ("L", "P"):
            raise RasterMismatchError(f"{path}: se esperaba PNG de 8 bits y un canal, modo {image.mode}")
        return np.array(image, dtype=np.uint8)


def save_depth(depth: DepthImage, path: Path) -> Path:
    Image.fromarray(encode_depth(depth)).save(path)
    return Path(path)


def load_depth(path: Path) -> DepthImage:
    with Image.open(path) as image:
        return decode_depth(np.array(image))


def save_normals(normals: NormalImage, path: Path) -> Path:
    Image.fromarray(encode_normals(normals)).save(path)
    return Path(path)


def load_normals(path: Path, depth: Optional[DepthImage] = None) -> NormalImage:
    with Image.open(path) as image:
        return decode_normals(np.array(image.convert("RGB")), depth)


def save_color(rgb: np.ndarray, path: Path) -> Path:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)
    return Path(path)


def quantize_bundle(bundle: RenderBundle) -> RenderBundle:
    """El bundle tal como vuelve de save_bundle + load_bundle"""
    depth = decode_depth(encode_depth(bundle.depth))
    normal = decode_normals(encode_normals(bundle.normal), depth)
    return replace(bundle, depth=depth, normal=normal)


def save_bundle(bundle: RenderBundle, prefix: Path) -> Path:
    """Escribe <prefix>.sem.png, <prefix>.depth.png y <prefix>.norm.png"""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    save_semantic(bundle.semantic, prefix.with_name(prefix.name + ".sem.png"))
    save_depth(bundle.depth, prefix.with_name(prefix.name + ".depth.png"))
    save_normals(bundle.normal, prefix.with_name(prefix.name + ".norm.png"))
    return prefix


def load_bundle(prefix: Path, pose: Pose, intrinsics: Optional[CameraIntrinsics] = None) -> RenderBundle:
    """Lee un RenderBundle (profundidad y normales cuantizadas)"""
    prefix = Path(prefix)
    semantic = load_semantic(prefix.with_name(prefix.name + ".sem.png"))
    depth = load_depth(prefix.with_name(prefix.name + ".depth.png"))
    normal = load_normals(prefix.with_name(prefix.name + ".norm.png"), depth)
    if depth.shape != semantic.shape or normal.shape[:2] != semantic.shape:
        raise RasterMismatchError(f"Rasters inconsistentes en {prefix}")
    return RenderBundle(semantic, depth, normal, pose, intrinsics)
