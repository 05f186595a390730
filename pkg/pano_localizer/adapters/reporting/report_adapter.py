"""
Report Adapter - Pano Localizer
metrics.json, results.csv (pandas), resultados de localización y vistas de depuración
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ...domain.entities import CircularBBox, LocalizationResult, Metrics, SemanticImage
from ...domain.ports import ReportWriter
from ..storage.image_adapter import colorize, save_color

logger = logging.getLogger(__name__)

# Cabecera fija de results.csv
RESULT_COLUMNS = [
    "scene_id",
    "query_index",
    "hfov_deg",
    "gt_qw",
    "gt_qx",
    "gt_qy",
    "gt_qz",
    "gt_tx",
    "gt_ty",
    "gt_tz",
    "est_qw",
    "est_qx",
    "est_qy",
    "est_qz",
    "est_tx",
    "est_ty",
    "est_tz",
    "terr_xyz_cm",
    "terr_xy_cm",
    "rerr_3d_deg",
    "rerr_yaw_deg",
    "top1_reference",
    "match_score",
    "selected_score",
    "refinement_rounds",
    "bbox_iou",
    "top1_within_1m",
    "topk_within_1m",
]

BBOX_COLOR = np.array([255, 255, 0], dtype=np.uint8)
PANEL_GAP = 4


def localization_to_dict(result: LocalizationResult) -> Dict[str, Any]:
    return {
        "selected": result.selected.to_dict(),
        "selected_score": result.selected_score,
        "refinement_rounds": result.refinement_rounds,
        "candidates": [
            {
                "reference_index": c.reference_index,
                "match_score": c.match.score,
                "match_rotation": list(c.match.rotation),
                "bbox": c.match.bbox.to_dict() if c.match.bbox is not None else None,
                "pose": c.pose.to_dict(),
                "score": c.score,
                "initial_score": c.initial_score,
            }
            for c in result.candidates
        ],
    }


def draw_circular_bbox(rgb: np.ndarray, bbox: CircularBBox, color: np.ndarray = BBOX_COLOR) -> np.ndarray:
    """Contorno de 1 píxel de una caja circular (envuelve en u)"""
    out = np.array(rgb, copy=True)
    width = out.shape[1]
    columns = bbox.columns(width)
    top, bottom = bbox.v_min, bbox.v_min + bbox.height - 1
    out[top, columns] = color
    out[bottom, columns] = color
    out[top : bottom + 1, columns[0]] = color
    out[top : bottom + 1, columns[-1]] = color
    return out


def compose_panels(panels: List[np.ndarray]) -> np.ndarray:
    """Paneles RGB en fila, alineados arriba, separados por PANEL_GAP"""
    height = max(p.shape[0] for p in panels)
    width = sum(p.shape[1] for p in panels) + PANEL_GAP * (len(panels) - 1)
    canvas = np.full((height, width, 3), 255, dtype=np.uint8)
    x = 0
    for panel in panels:
        canvas[: panel.shape[0], x : x + panel.shape[1]] = panel
        x += panel.shape[1] + PANEL_GAP
    return canvas


class FileReportWriter(ReportWriter):
    """Adapter - Reportes en disco"""

    def write_report(self, metrics: Metrics, records: List[Dict[str, Any]], out_dir: Path) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        try:
            metrics_path = out_dir / "metrics.json"
            metrics_path.write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

            results_path = out_dir / "results.csv"
            frame = pd.DataFrame(records, columns=RESULT_COLUMNS)
            frame.to_csv(results_path, index=False)
        except Exception as e:
            logger.error(f"❌ Error escribiendo reporte en {out_dir}: {e}")
            raise

        logger.info(f"📊 Reporte escrito: {metrics_path} y {results_path} ({len(records)} filas)")
        return {"metrics": metrics_path, "results": results_path}

    def write_localization(self, result: LocalizationResult, path: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = localization_to_dict(result)
        if extra:
            data.update(extra)
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
        return path

    def write_debug(
        self,
        query_sem: SemanticImage,
        render_sem: SemanticImage,
        pano_sem: SemanticImage,
        bbox: Optional[CircularBBox],
        path: Path,
    ) -> Path:
        """query | render top-1 | panorama con bbox"""
        pano = colorize(pano_sem)
        if bbox is not None:
            pano = draw_circular_bbox(pano, bbox)
        canvas = compose_panels([colorize(query_sem), colorize(render_sem), pano])
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return save_color(canvas, path)


def load_metrics(path: Path) -> Metrics:
    return Metrics.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
