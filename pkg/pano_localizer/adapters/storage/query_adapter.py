"""
Query Adapter - Pano Localizer
Conjuntos de queries: PNGs semánticos + queries.json con las poses de referencia
"""

import json
import logging
import math
from pathlib import Path
from typing import List, Sequence, Tuple

from ...domain.entities import Pose, QuerySpec
from .image_adapter import load_semantic, save_semantic

logger = logging.getLogger(__name__)

QUERIES_FILE = "queries.json"


def query_image_name(index: int) -> str:
    return f"query_{index:04d}.png"


def write_query_set(queries: Sequence[QuerySpec], out_dir: Path, scene_hash: str = "") -> Path:
    """Escribe un PNG por query y queries.json con poses y diagnósticos"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for q in queries:
        name = query_image_name(q.index)
        if q.semantic is not None:
            save_semantic(q.semantic, out_dir / name)
        record = q.to_dict()
        record["image"] = name
        records.append(record)

    path = out_dir / QUERIES_FILE
    document = {"version": 1, "scene_hash": scene_hash, "count": len(records), "queries": records}
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    logger.info(f"💾 {len(records)} queries escritas en {out_dir}")
    return path


def load_query_set(query_dir: Path) -> Tuple[str, List[QuerySpec]]:
    """Lee queries.json y sus PNGs; devuelve (scene_hash, queries)"""
    query_dir = Path(query_dir)
    document = json.loads((query_dir / QUERIES_FILE).read_text(encoding="utf-8"))
    queries = []
    for record in document["queries"]:
        queries.append(
            QuerySpec(
                index=int(record["index"]),
                pose=Pose.from_dict(record["pose"]),
                hfov=math.radians(float(record["hfov_deg"])),
                scene_id=str(record.get("scene_id", "")),
                seed=int(record.get("seed", 0)),
                class_count=int(record.get("class_count", 0)),
                center_distance=float(record.get("center_distance", 0.0)),
                semantic=load_semantic(query_dir / record["image"]),
            )
        )
    return str(document.get("scene_hash", "")), queries
