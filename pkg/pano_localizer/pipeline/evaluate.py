"""
Evaluation Pipeline - Pano Localizer
Evaluación por lotes: escenas + queries -> localización -> métricas y reporte
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from ..adapters.storage.query_adapter import load_query_set
from ..adapters.storage.scene_adapter import JsonSceneRepository, scene_hash
from ..config import RunConfig
from ..domain.entities import CameraIntrinsics, Metrics, PoseError, QuerySpec, Scene
from ..domain.evaluation import ONE_METER_CM, compute_metrics, pose_error, sample_query_poses
from ..domain.geometry import circular_iou
from ..domain.ports import ExperimentTracker, ReferenceCache
from ..domain.renderer import render_perspective
from ..domain.scene_model import generate_synthetic_scene, scene_to_primitives
from ..domain.services import viewport_bbox
from .localize import LocalizationPipeline

logger = logging.getLogger(__name__)

# No afectan al resultado; fuera de metrics.json para que sea idéntico entre ejecuciones
RUN_ONLY_FIELDS = {"threads", "cache_dir", "output_dir"}


@dataclass
class SceneCase:
    """Escena de evaluación con sus queries"""

    scene_id: str
    scene: Scene
    queries: List[QuerySpec]


@dataclass
class EvaluationRun:
    """Acumulado de errores y filas del CSV"""

    errors: List[PoseError] = field(default_factory=list)
    topk_errors: List[PoseError] = field(default_factory=list)
    bbox_ious: List[float] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)


def generate_suite(run_config: RunConfig, num_scenes: int, queries_per_scene: int) -> List[SceneCase]:
    """Escenas sintéticas sembradas y sus queries (semillas derivadas de --seed)"""
    params = run_config.scene_gen.to_domain()
    query_params = run_config.query.to_domain()
    cases = []
    for k in range(num_scenes):
        seed = run_config.seed + k
        scene = generate_synthetic_scene(seed, params)
        queries = sample_query_poses(
            scene,
            scene_to_primitives(scene),
            queries_per_scene,
            query_params,
            seed=seed,
            scene_id=f"scene_{seed:04d}",
        )
        cases.append(SceneCase(f"scene_{seed:04d}", scene, queries))
    logger.info(f"✅ Suite generada: {num_scenes} escenas x {queries_per_scene} queries")
    return cases


def load_case(scene_path: Path, query_dir: Path) -> SceneCase:
    """Escena JSON + directorio de queries escrito por gen-queries"""
    scene = JsonSceneRepository().load(scene_path)
    expected, queries = load_query_set(query_dir)
    actual = scene_hash(scene)
    if expected and expected != actual:
        raise ValueError(f"Las queries de {query_dir} son de otra escena ({expected[:12]} != {actual[:12]})")
    return SceneCase(Path(scene_path).stem, scene, queries)


class EvaluationPipeline:
    """Pipeline completo de evaluación"""

    def __init__(
        self,
        run_config: RunConfig,
        cache: Optional[ReferenceCache] = None,
        tracker: Optional[ExperimentTracker] = None,
        debug_queries: int = 0,
    ):
        self.run_config = run_config
        self.localizer = LocalizationPipeline(run_config, cache)
        self.tracker = tracker
        self.debug_queries = debug_queries

    def _best_of_k(self, gt, candidates) -> PoseError:
        mode = self.run_config.metrics_mode
        errors = [pose_error(gt, c.pose) for c in candidates]
        return min(errors, key=lambda e: e.terr_xyz if mode == "3d" else e.terr_xy)

    def evaluate_scene(self, case: SceneCase, run: EvaluationRun, out_dir: Path) -> None:
        refs = self.localizer.load_references(case.scene)
        pano_w, pano_h = refs.grid.pano_width, refs.grid.pano_height
        for q in tqdm(case.queries, desc=case.scene_id, disable=not logger.isEnabledFor(logging.INFO)):
            K = CameraIntrinsics(q.hfov, q.semantic.shape[1], q.semantic.shape[0])
            result = self.localizer.localize(refs, q.semantic, q.hfov)
            best = result.best

            err = pose_error(q.pose, result.selected)
            topk = self._best_of_k(q.pose, result.candidates)
            gt_bbox, _ = viewport_bbox(refs, best.reference_index, q.pose, K)
            iou = circular_iou(best.match.bbox, gt_bbox, pano_w, pano_h) if gt_bbox is not None else 0.0

            run.errors.append(err)
            run.topk_errors.append(topk)
            run.bbox_ious.append(iou)
            run.records.append(self._record(case.scene_id, q, result, err, topk, iou))

            if len(run.records) <= self.debug_queries:
                render = render_perspective(refs.primitives, result.selected, K)
                self.localizer.writer.write_debug(
                    q.semantic,
                    render.semantic,
                    refs.bundles[best.reference_index].semantic,
                    best.match.bbox,
                    out_dir / "debug" / f"{case.scene_id}_{q.index:04d}.png",
                )

    def _record(self, scene_id, q: QuerySpec, result, err: PoseError, topk: PoseError, iou: float) -> Dict[str, Any]:
        mode = self.run_config.metrics_mode
        terr = err.terr_xyz if mode == "3d" else err.terr_xy
        topk_terr = topk.terr_xyz if mode == "3d" else topk.terr_xy
        gt, est = q.pose, result.selected
        return {
            "scene_id": scene_id,
            "query_index": q.index,
            "hfov_deg": round(math.degrees(q.hfov), 9),
            **{f"gt_q{c}": v for c, v in zip("wxyz", gt.rotation)},
            **{f"gt_t{c}": v for c, v in zip("xyz", gt.translation)},
            **{f"est_q{c}": v for c, v in zip("wxyz", est.rotation)},
            **{f"est_t{c}": v for c, v in zip("xyz", est.translation)},
            "terr_xyz_cm": err.terr_xyz,
            "terr_xy_cm": err.terr_xy,
            "rerr_3d_deg": err.rerr_3d,
            "rerr_yaw_deg": err.rerr_yaw,
            "top1_reference": result.best.reference_index,
            "match_score": result.best.match.score,
            "selected_score": result.selected_score,
            "refinement_rounds": result.refinement_rounds,
            "bbox_iou": iou,
            "top1_within_1m": bool(terr < ONE_METER_CM),
            "topk_within_1m": bool(topk_terr < ONE_METER_CM),
        }

    def run_complete_pipeline(self, cases: Sequence[SceneCase], out_dir: Path) -> Tuple[Metrics, Dict[str, Path]]:
        """
        Ejecuta la evaluación completa y escribe metrics.json / results.csv
        """
        try:
            logger.info(f"🚀 Iniciando evaluación: {len(cases)} escenas")
            out_dir = Path(out_dir)
            config_path = self.run_config.write(out_dir)

            run = EvaluationRun()
            for case in cases:
                self.evaluate_scene(case, run, out_dir)

            echo = self.run_config.model_dump(exclude=RUN_ONLY_FIELDS)
            echo["scene_hashes"] = {c.scene_id: scene_hash(c.scene) for c in cases}
            metrics = compute_metrics(
                run.errors,
                run.topk_errors,
                mode=self.run_config.metrics_mode,
                bbox_ious=run.bbox_ious,
                config=echo,
            )
            problems = metrics.check_invariants()
            if problems:
                logger.warning(f"⚠️ Invariantes de métricas no cumplidos: {problems}")

            paths = self.localizer.writer.write_report(metrics, run.records, out_dir)
            paths["run_config"] = config_path

            if self.tracker is not None:
                flat = {
                    "inlier_pct": metrics.inlier_pct,
                    "topk_recall_pct": metrics.topk_recall_pct,
                    **{f"recall_{k}": v for k, v in metrics.recall.items()},
                }
                if metrics.median_terr_cm is not None:
                    flat["median_terr_cm"] = metrics.median_terr_cm
                    flat["median_rerr_deg"] = metrics.median_rerr_deg
                if metrics.mean_bbox_iou is not None:
                    flat["mean_bbox_iou"] = metrics.mean_bbox_iou
                self.tracker.log_run(
                    f"evaluate_{self.run_config.metrics_mode}_{len(cases)}scenes",
                    self.run_config.model_dump(),
                    flat,
                    [paths["metrics"], paths["results"], config_path],
                )

            logger.info(
                f"🏆 Evaluación completa: n={metrics.n}, recall@1m={metrics.recall.get('100cm', 0):.2f}%, "
                f"inliers={metrics.inlier_pct:.2f}%"
            )
            return metrics, paths

        except Exception as e:
            logger.error(f"❌ Error en la evaluación: {e}")
            raise
