"""
Domain Services - Pano Localizer
Servicios del dominio: construcción del conjunto de referencias y localización
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .entities import (
    CameraIntrinsics,
    Candidate,
    CircularBBox,
    GridConfig,
    HypothesisConfig,
    LocalizationResult,
    Pose,
    PrimitiveSet,
    ReferenceSet,
    RefineConfig,
    RenderBundle,
    Scene,
    SemanticImage,
)
from .errors import LocalizationError, OutOfBoundsError
from .geometry import compute_viewport_mask, mask_to_circular_bbox
from .matcher import ViewportMatcher, encode_panorama, encode_query, rank_references
from .ports import ReferenceCache
from .refiner import RenderCompareObjective, iterate_refinement, refine_pose
from .renderer import render_panorama, render_perspective
from .scene_model import point_room_lookup, scene_to_primitives

logger = logging.getLogger(__name__)


def _executor(threads: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=threads if threads > 0 else None)


class ReferenceSetBuilder:
    """Servicio - Renderiza y codifica los panoramas de referencia (con caché)"""

    def __init__(self, cache: Optional[ReferenceCache] = None, threads: int = 1):
        self.cache = cache
        self.threads = threads
        self.renders = 0

    def build(
        self,
        scene: Scene,
        positions: Sequence[Sequence[float]],
        grid: Optional[GridConfig] = None,
        hypotheses: Optional[HypothesisConfig] = None,
        scene_hash: str = "",
        prims: Optional[PrimitiveSet] = None,
    ) -> ReferenceSet:
        grid = grid or GridConfig()
        hypotheses = hypotheses or HypothesisConfig()
        prims = prims if prims is not None else scene_to_primitives(scene)
        dims = (grid.pano_width, grid.pano_height)
        positions = [tuple(float(c) for c in p) for p in positions]

        for p in positions:
            if point_room_lookup(scene, p) is None:
                raise OutOfBoundsError(f"Posición de referencia fuera de las habitaciones: {p}")

        bundles: List[Optional[RenderBundle]] = [None] * len(positions)
        if self.cache is not None:
            for i, p in enumerate(positions):
                bundles[i] = self.cache.get(scene_hash, p, dims)
        missing = [i for i, b in enumerate(bundles) if b is None]
        logger.info(f"📦 Referencias: {len(positions) - len(missing)} desde caché, {len(missing)} a renderizar")

        if missing:
            with _executor(self.threads) as pool:
                rendered = list(pool.map(lambda i: render_panorama(prims, positions[i], *dims), missing))
            self.renders += len(rendered)
            for i, bundle in zip(missing, rendered):
                if self.cache is not None:
                    bundle = self.cache.put(scene_hash, positions[i], dims, bundle)
                bundles[i] = bundle

        encodings = tuple(
            encode_panorama(b.semantic, p, hypotheses.pano_grid_width, hypotheses.pano_grid_height)
            for b, p in zip(bundles, positions)
        )
        return ReferenceSet(
            scene=scene,
            primitives=prims,
            positions=tuple(positions),
            bundles=tuple(bundles),
            encodings=encodings,
            grid=grid,
            scene_hash=scene_hash,
        )


def build_reference_set(
    scene: Scene,
    positions: Sequence[Sequence[float]],
    pano_width: int = 256,
    pano_height: int = 128,
    cache: Optional[ReferenceCache] = None,
    scene_hash: str = "",
) -> ReferenceSet:
    """Renderiza y codifica un panorama por posición"""
    grid = GridConfig(pano_width=pano_width, pano_height=pano_height)
    return ReferenceSetBuilder(cache).build(scene, positions, grid, scene_hash=scene_hash)


class LocalizationService:
    """Servicio principal - Orquesta matching, ranking, refinamiento y selección"""

    def __init__(
        self,
        hypotheses: Optional[HypothesisConfig] = None,
        refine: Optional[RefineConfig] = None,
        threads: int = 1,
    ):
        self.matcher = ViewportMatcher(hypotheses)
        self.refine_config = refine or RefineConfig()
        self.threads = threads

    def _refine_candidate(self, refs: ReferenceSet, query_sem: SemanticImage, K: CameraIntrinsics, match) -> Candidate:
        position = refs.positions[match.reference_index]
        init = Pose(match.rotation, position)
        result = refine_pose(refs.primitives, query_sem, K, init, self.refine_config, anchor=position)
        return Candidate(
            reference_index=match.reference_index,
            match=match,
            pose=result.pose,
            score=result.score,
            initial_score=result.initial_score,
        )

    def localize(
        self,
        refs: ReferenceSet,
        query_sem: SemanticImage,
        K: CameraIntrinsics,
        top_n: int = 3,
        refine_rounds: int = 1,
    ) -> LocalizationResult:
        """
        Caso de uso principal: localizar una imagen semántica de query
        """
        if len(refs) == 0:
            raise LocalizationError("Conjunto de referencias vacío")
        query_sem = np.asarray(query_sem)
        if not np.any(query_sem > 0):
            raise LocalizationError("La query no tiene píxeles no-void")
        if top_n < 1:
            raise LocalizationError(f"top_n debe ser >= 1: {top_n}")

        query = encode_query(query_sem, K.hfov, self.matcher.config.query_grid)
        self.matcher.samples_for(query.hfov, query.grid.shape[:2], refs.encodings[0].grid.shape[:2])

        with _executor(self.threads) as pool:
            matches = list(pool.map(lambda i: self.matcher.match(refs.encodings[i], query, i), range(len(refs))))
            top = [matches[i] for i in rank_references(matches)[:top_n]]
            candidates = list(pool.map(lambda m: self._refine_candidate(refs, query_sem, K, m), top))

        candidates.sort(key=lambda c: (-c.score, c.reference_index))
        best = candidates[0]
        pose, score, rounds = iterate_refinement(
            refs.primitives,
            query_sem,
            K,
            best.pose,
            refs.scene,
            refine_rounds,
            pano_size=(refs.grid.pano_width, refs.grid.pano_height),
            cfg=self.refine_config,
            anchor=refs.positions[best.reference_index],
            matcher=self.matcher,
            scorer=RenderCompareObjective(refs.primitives, query_sem, K, self.refine_config.resolution),
        )
        if rounds > 0:
            candidates[0] = Candidate(best.reference_index, best.match, pose, score, best.initial_score)

        logger.debug(
            f"Localización: referencia {best.reference_index} (c_bb={best.match.score:.3f}), "
            f"score refinado {candidates[0].score:.4f}, {rounds} rondas"
        )
        return LocalizationResult(
            candidates=tuple(candidates),
            selected=candidates[0].pose,
            selected_score=candidates[0].score,
            refinement_rounds=rounds,
        )


def viewport_bbox(
    refs: ReferenceSet, reference_index: int, pose: Pose, K: CameraIntrinsics
) -> Tuple[Optional[CircularBBox], np.ndarray]:
    """Viewport geométrico de la cámara `pose` sobre el panorama de una referencia

    Returns:
        (bbox circular o None, máscara de viewport)
    """
    bundle = refs.bundles[reference_index]
    persp = render_perspective(refs.primitives, pose, K)
    mask = compute_viewport_mask(bundle.depth, refs.positions[reference_index], persp.depth, pose, K)
    return mask_to_circular_bbox(mask), mask
