"""
Reference Cache - Pano Localizer
Caché de panoramas de referencia en memoria y en disco

Disposición en disco:
    <cache>/<scene-hash>/<idx>.{sem,depth,norm}.png
    <cache>/<scene-hash>/meta.json   (posiciones y dimensiones por índice)
"""

import json
import logging
import threading
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from ...domain.entities import Pose, RenderBundle
from ...domain.ports import ReferenceCache
from .image_adapter import load_bundle, quantize_bundle, save_bundle

logger = logging.getLogger(__name__)

META_FILE = "meta.json"
POSITION_DECIMALS = 6


def _position_key(position: Sequence[float]) -> Tuple[float, ...]:
    return tuple(round(float(c), POSITION_DECIMALS) for c in position)


class InMemoryReferenceCache(ReferenceCache):
    """Adapter - Caché de proceso (tests y ejecuciones por lotes)"""

    def __init__(self):
        self._store: Dict[Tuple, RenderBundle] = {}
        self.hits = 0
        self.misses = 0

    def get(self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int]) -> Optional[RenderBundle]:
        bundle = self._store.get((scene_hash, _position_key(position), tuple(dims)))
        if bundle is None:
            self.misses += 1
        else:
            self.hits += 1
        return bundle

    def put(
        self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int], bundle: RenderBundle
    ) -> RenderBundle:
        self._store[(scene_hash, _position_key(position), tuple(dims))] = bundle
        return bundle


class DiskReferenceCache(ReferenceCache):
    """Adapter - Caché persistente en PNG

    La profundidad y las normales vuelven cuantizadas (mm / 8 bits); la
    codificación semántica es exacta. `put` devuelve ya la versión cuantizada,
    así una ejecución en frío y otra con la caché caliente ven los mismos datos.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        logger.info(f"🗂️ Caché de referencias en {self.root}")

    def _scene_dir(self, scene_hash: str) -> Path:
        return self.root / scene_hash

    def _read_meta(self, scene_hash: str) -> Dict:
        path = self._scene_dir(scene_hash) / META_FILE
        if not path.exists():
            return {"version": 1, "scene_hash": scene_hash, "entries": []}
        return json.loads(path.read_text(encoding="utf-8"))

    def _find(self, meta: Dict, position: Sequence[float], dims: Tuple[int, int]) -> Optional[int]:
        key = list(_position_key(position))
        for entry in meta["entries"]:
            if entry["position"] == key and [entry["width"], entry["height"]] == list(dims):
                return int(entry["index"])
        return None

    def get(self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int]) -> Optional[RenderBundle]:
        with self._lock:
            index = self._find(self._read_meta(scene_hash), position, dims)
        if index is None:
            self.misses += 1
            return None
        try:
            bundle = load_bundle(self._scene_dir(scene_hash) / str(index), Pose.identity(tuple(position)))
        except (OSError, ValueError) as e:
            logger.warning(f"⚠️ Entrada de caché ilegible ({scene_hash[:12]}/{index}): {e}")
            self.misses += 1
            return None
        self.hits += 1
        return bundle

    def put(
        self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int], bundle: RenderBundle
    ) -> RenderBundle:
        with self._lock:
            meta = self._read_meta(scene_hash)
            index = self._find(meta, position, dims)
            if index is None:
                index = len(meta["entries"])
                meta["entries"].append(
                    {"index": index, "position": list(_position_key(position)), "width": dims[0], "height": dims[1]}
                )
            scene_dir = self._scene_dir(scene_hash)
            save_bundle(bundle, scene_dir / str(index))
            (scene_dir / META_FILE).write_text(json.dumps(meta, indent=2), encoding="utf-8")
        return quantize_bundle(bundle)
