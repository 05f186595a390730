"""
Viewport Matcher - Pano Localizer
Matching determinista de la query contra panoramas de referencia por hipótesis de rotación

Para cada referencia se evalúan todas las rotaciones de la rejilla de
hipótesis: la codificación del panorama se muestrea en las direcciones de la
cámara rotada (cámara co-localizada, rotación pura) y se compara con la
codificación de la query mediante IoU suave balanceado por clase.
"""

import functools
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .entities import (
    NUM_CLASSES,
    CameraIntrinsics,
    HypothesisConfig,
    MatchResult,
    PanoEncoding,
    QueryEncoding,
    SemanticImage,
)
from .errors import InvalidParamsError, RasterMismatchError
from .geometry import bbox_from_rotation, camera_to_world, dir_to_equirect_pixel, perspective_rays, rotation_from_ypr

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-12
HYPOTHESIS_CHUNK = 24
SAMPLE_CACHE_SIZE = 8
CHANNELS = NUM_CLASSES - 1


def class_fractions(sem: SemanticImage, grid_height: int, grid_width: int) -> np.ndarray:
    """Filtro de caja: fracción de píxeles de cada clase no-void por celda, (gh, gw, 6)"""
    sem = np.asarray(sem)
    height, width = sem.shape
    rows = (np.arange(height) * grid_height) // height
    cols = (np.arange(width) * grid_width) // width
    cell = (rows[:, None] * grid_width + cols[None, :]).ravel()
    labels = sem.ravel().astype(int)

    n_cells = grid_height * grid_width
    counts = np.bincount(cell, minlength=n_cells).astype(float)
    hits = labels > 0
    per_class = np.bincount(
        cell[hits] * CHANNELS + (labels[hits] - 1), minlength=n_cells * CHANNELS
    ).astype(float)
    fractions = per_class.reshape(n_cells, CHANNELS) / counts[:, None]
    return fractions.reshape(grid_height, grid_width, CHANNELS)


def encode_panorama(
    sem: SemanticImage,
    position: Sequence[float],
    grid_width: int = 128,
    grid_height: int = 64,
) -> PanoEncoding:
    """Codificación soft one-hot de un panorama (W = 2H)"""
    height, width = np.asarray(sem).shape
    if width != 2 * height:
        raise RasterMismatchError(f"Panorama no equirectangular: {width}x{height} (se requiere W = 2H)")
    grid_width = min(grid_width, width)
    grid_height = min(grid_height, height)
    grid = class_fractions(sem, grid_height, grid_width)
    return PanoEncoding(grid, tuple(float(c) for c in position), width, height)


def encode_query(
    sem: SemanticImage,
    hfov: float,
    grid: int = 32,
    class_fraction: float = 0.01,
) -> QueryEncoding:
    """Codificación de la query a la resolución de muestreo de hipótesis"""
    sem = np.asarray(sem)
    height, width = sem.shape
    grid_width = min(grid, width)
    grid_height = max(2, min(height, int(round(grid_width * height / width))))
    fractions = class_fractions(sem, grid_height, grid_width)

    totals = np.bincount(sem.ravel().astype(int), minlength=NUM_CLASSES)[1:] / sem.size
    present = tuple(int(c) for c in np.flatnonzero(totals >= class_fraction))
    return QueryEncoding(fractions, float(hfov), present, int(width), int(height))


def enumerate_hypotheses(cfg: HypothesisConfig) -> List[Tuple[float, float, float, float]]:
    """Producto cartesiano yaw x pitch x roll (yaw mayor), sin duplicados"""
    step = cfg.yaw_step_deg
    if step <= 0 or step > 360:
        raise InvalidParamsError(f"Paso de yaw inválido: {step}")
    count = 360.0 / step
    if abs(count - round(count)) > 1e-9:
        raise InvalidParamsError(f"El paso de yaw {step} no divide 360")
    for name, values in (("pitches", cfg.pitches_deg), ("rolls", cfg.rolls_deg)):
        if not values:
            raise InvalidParamsError(f"Conjunto de {name} vacío")
        if len(set(values)) != len(values):
            raise InvalidParamsError(f"Valores repetidos en {name}: {values}")
    if any(abs(p) >= 90 for p in cfg.pitches_deg):
        raise InvalidParamsError(f"Pitch fuera de (-90, 90): {cfg.pitches_deg}")

    hypotheses = []
    for k in range(int(round(count))):
        for pitch in cfg.pitches_deg:
            for roll in cfg.rolls_deg:
                hypotheses.append(tuple(float(c) for c in rotation_from_ypr(k * step, pitch, roll)))
    return hypotheses


class SampleGrid:
    """Coordenadas de muestreo bilineal precalculadas para un conjunto de rotaciones"""

    def __init__(self, rotations: Sequence[Sequence[float]], hfov: float, grid_shape: Tuple[int, int], pano_shape: Tuple[int, int]):
        grid_height, grid_width = grid_shape
        pano_height, pano_width = pano_shape
        rays = perspective_rays(CameraIntrinsics(hfov, grid_width, grid_height)).reshape(-1, 3)
        dirs = np.stack([rays @ camera_to_world(q).T for q in rotations])
        u, v = dir_to_equirect_pixel(dirs, pano_width, pano_height)

        x = u - 0.5
        y = np.clip(v - 0.5, 0.0, pano_height - 1.0)
        x0 = np.floor(x)
        y0 = np.floor(y)
        self.fx = (x - x0)[..., None]
        self.fy = (y - y0)[..., None]
        self.x0 = x0.astype(int) % pano_width
        self.x1 = (self.x0 + 1) % pano_width
        self.y0 = y0.astype(int)
        self.y1 = np.minimum(self.y0 + 1, pano_height - 1)
        self.grid_shape = (grid_height, grid_width)

    def __len__(self) -> int:
        return len(self.x0)

    def sample(self, grid: np.ndarray, rows: slice = slice(None)) -> np.ndarray:
        """Muestreo bilineal (envolvente en u, recortado en v); (n_rot, gh*gw, C)"""
        x0, x1, y0, y1 = self.x0[rows], self.x1[rows], self.y0[rows], self.y1[rows]
        fx, fy = self.fx[rows], self.fy[rows]
        top = grid[y0, x0] * (1 - fx) + grid[y0, x1] * fx
        bottom = grid[y1, x0] * (1 - fx) + grid[y1, x1] * fx
        return top * (1 - fy) + bottom * fy


def warp_pano_to_view(enc: PanoEncoding, rotation: Sequence[float], hfov: float, n: int = 32) -> np.ndarray:
    """Recorte perspectiva n x n de la codificación del panorama bajo (rotación, hfov)"""
    samples = SampleGrid([rotation], hfov, (n, n), enc.grid.shape[:2])
    return samples.sample(enc.grid)[0].reshape(n, n, -1)


def _soft_iou(a: np.ndarray, b: np.ndarray, present: Sequence[int]) -> np.ndarray:
    """IoU suave medio sobre las clases presentes; ejes (..., celdas, C)"""
    channels = list(present)
    a = a[..., channels]
    b = b[..., channels]
    inter = np.minimum(a, b).sum(axis=-2)
    union = np.maximum(a, b).sum(axis=-2)
    iou = np.divide(inter, union, out=np.ones_like(inter), where=union > 0)
    return iou.mean(axis=-1)


def agreement(a: np.ndarray, b: np.ndarray, present: Sequence[int]) -> float:
    """IoU suave balanceado por clase; 0/0 := 1; sin clases presentes -> 0"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise RasterMismatchError(f"Rejillas de distinta forma: {a.shape} vs {b.shape}")
    if not present:
        return 0.0
    return float(_soft_iou(a.reshape(-1, a.shape[-1]), b.reshape(-1, b.shape[-1]), present))


class ViewportMatcher:
    """Matcher por hipótesis de rotación con caché de rejillas de muestreo"""

    def __init__(self, config: Optional[HypothesisConfig] = None):
        self.config = config or HypothesisConfig()
        self.hypotheses = enumerate_hypotheses(self.config)
        self._cached_samples = functools.lru_cache(maxsize=SAMPLE_CACHE_SIZE)(self._build_samples)

    def _build_samples(self, hfov: float, grid_shape: Tuple[int, int], pano_shape: Tuple[int, int]) -> SampleGrid:
        logger.debug(f"Precalculando {len(self.hypotheses)} hipótesis para hfov={math.degrees(hfov):.1f}°")
        return SampleGrid(self.hypotheses, hfov, grid_shape, pano_shape)

    def samples_for(self, hfov: float, grid_shape: Tuple[int, int], pano_shape: Tuple[int, int]) -> SampleGrid:
        """Rejilla de muestreo por (hfov, forma de la query, forma del panorama); LRU acotada"""
        return self._cached_samples(float(hfov), tuple(grid_shape), tuple(pano_shape))

    def scores(self, enc: PanoEncoding, q: QueryEncoding) -> np.ndarray:
        if not q.present:
            return np.zeros(len(self.hypotheses))
        samples = self.samples_for(q.hfov, q.grid.shape[:2], enc.grid.shape[:2])
        query = q.grid.reshape(1, -1, q.grid.shape[-1])
        scores = np.zeros(len(samples))
        for start in range(0, len(samples), HYPOTHESIS_CHUNK):
            rows = slice(start, start + HYPOTHESIS_CHUNK)
            warped = samples.sample(enc.grid, rows)
            scores[rows] = _soft_iou(warped, np.broadcast_to(query, warped.shape), q.present)
        return scores

    def match(self, enc: PanoEncoding, q: QueryEncoding, reference_index: int = 0) -> MatchResult:
        scores = self.scores(enc, q)
        best_score = float(scores.max())
        best = int(np.flatnonzero(scores >= best_score - TIE_TOLERANCE)[0])
        rotation = self.hypotheses[best]
        bbox = bbox_from_rotation(rotation, q.intrinsics, enc.pano_width, enc.pano_height)
        return MatchResult(float(scores[best]), rotation, bbox, reference_index)


def match_viewport(
    enc: PanoEncoding,
    q: QueryEncoding,
    cfg: Optional[HypothesisConfig] = None,
    reference_index: int = 0,
) -> MatchResult:
    """Mejor hipótesis de rotación, score (c_bb) y bbox circular para una referencia"""
    return ViewportMatcher(cfg).match(enc, q, reference_index)


def rank_references(results: Sequence[MatchResult]) -> List[int]:
    """Posiciones ordenadas por score descendente; empates por índice de referencia"""
    return sorted(range(len(results)), key=lambda i: (-results[i].score, results[i].reference_index, i))
