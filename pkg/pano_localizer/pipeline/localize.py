"""
Localization Pipeline - Pano Localizer
Localización de una query: referencias (con caché), matching, refinamiento y salida JSON
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..adapters.reporting.report_adapter import FileReportWriter
from ..adapters.storage.reference_cache import DiskReferenceCache
from ..adapters.storage.scene_adapter import JsonSceneRepository
from ..config import RunConfig
from ..domain.entities import CameraIntrinsics, LocalizationResult, Pose, ReferenceSet, Scene, SemanticImage
from ..domain.evaluation import pose_error
from ..domain.ports import ReferenceCache
from ..domain.reference_grid import sample_reference_positions
from ..domain.renderer import render_perspective
from ..domain.scene_model import ensure_valid, scene_to_primitives
from ..domain.services import LocalizationService, ReferenceSetBuilder, viewport_bbox

logger = logging.getLogger(__name__)


class LocalizationPipeline:
    """Pipeline de localización de queries contra una escena"""

    def __init__(self, run_config: RunConfig, cache: Optional[ReferenceCache] = None):
        """
        Args:
            run_config: Configuración resuelta de la ejecución
            cache: Caché de referencias (por defecto en disco bajo cache_dir)
        """
        self.run_config = run_config
        self.scene_repo = JsonSceneRepository()
        self.cache = cache if cache is not None else DiskReferenceCache(Path(run_config.cache_dir))
        self.builder = ReferenceSetBuilder(self.cache, run_config.threads)
        self.service = LocalizationService(
            run_config.hypotheses.to_domain(), run_config.refine.to_domain(), run_config.threads
        )
        self.writer = FileReportWriter()

    def load_references(self, scene: Scene) -> ReferenceSet:
        """Rejilla de referencias de la escena, renderizada o leída de caché"""
        grid = self.run_config.grid.to_domain()
        ensure_valid(scene)
        positions = sample_reference_positions(scene, grid.spacing, grid.mode, grid.h_pano)
        renders_before = self.builder.renders
        refs = self.builder.build(
            scene,
            positions,
            grid,
            self.run_config.hypotheses.to_domain(),
            scene_hash=self.scene_repo.scene_hash(scene),
            prims=scene_to_primitives(scene),
        )
        rendered = self.builder.renders - renders_before
        logger.info(
            f"✅ {len(refs)} referencias ({grid.mode}, spacing {grid.spacing} m); "
            f"{rendered} renderizadas, {len(refs) - rendered} reutilizadas de caché"
        )
        return refs

    def localize(self, refs: ReferenceSet, query_sem: SemanticImage, hfov: float) -> LocalizationResult:
        query_sem = np.asarray(query_sem)
        K = CameraIntrinsics(hfov, query_sem.shape[1], query_sem.shape[0])
        return self.service.localize(refs, query_sem, K, self.run_config.top_n, self.run_config.refine_rounds)

    def run(
        self,
        scene_path: Path,
        query_sem: SemanticImage,
        hfov: float,
        out_dir: Path,
        gt_pose: Optional[Pose] = None,
        debug: bool = False,
    ) -> Dict[str, Any]:
        """
        Ejecuta la localización completa de una query y escribe localization.json
        """
        try:
            logger.info("🚀 Iniciando localización")
            out_dir = Path(out_dir)
            self.run_config.write(out_dir)

            scene = self.scene_repo.load(scene_path)
            refs = self.load_references(scene)
            result = self.localize(refs, query_sem, hfov)
            best = result.best

            query_sem = np.asarray(query_sem)
            K = CameraIntrinsics(hfov, query_sem.shape[1], query_sem.shape[0])
            predicted_bbox, _ = viewport_bbox(refs, best.reference_index, result.selected, K)

            extra: Dict[str, Any] = {
                "reference_position": list(refs.positions[best.reference_index]),
                "viewport_bbox": predicted_bbox.to_dict() if predicted_bbox is not None else None,
            }
            if gt_pose is not None:
                err = pose_error(gt_pose, result.selected)
                extra["ground_truth"] = gt_pose.to_dict()
                extra["error"] = {
                    "terr_xyz_cm": err.terr_xyz,
                    "terr_xy_cm": err.terr_xy,
                    "rerr_3d_deg": err.rerr_3d,
                    "rerr_yaw_deg": err.rerr_yaw,
                }
                logger.info(f"📊 Error: {err.terr_xyz:.1f} cm, {err.rerr_3d:.2f}°")

            path = self.writer.write_localization(result, out_dir / "localization.json", extra)
            if debug:
                render = render_perspective(refs.primitives, result.selected, K)
                self.writer.write_debug(
                    query_sem,
                    render.semantic,
                    refs.bundles[best.reference_index].semantic,
                    best.match.bbox,
                    out_dir / "debug.png",
                )

            logger.info(f"🏆 Pose seleccionada (score {result.selected_score:.4f}) escrita en {path}")
            return {"result": result, "path": path, **extra}

        except Exception as e:
            logger.error(f"❌ Error en localización: {e}")
            raise
