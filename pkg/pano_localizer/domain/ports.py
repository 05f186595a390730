"""
Domain Ports - Pano Localizer
Interfaces (Puertos) para la arquitectura hexagonal
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .entities import LocalizationResult, Metrics, RenderBundle, Scene


class SceneRepository(ABC):
    """Puerto - Documentos de escena"""

    @abstractmethod
    def load(self, path: Path) -> Scene:
        """Carga y parsea un documento de escena"""
        pass

    @abstractmethod
    def save(self, scene: Scene, path: Path) -> Path:
        """Serializa una escena de forma canónica"""
        pass

    @abstractmethod
    def scene_hash(self, scene: Scene) -> str:
        """Hash estable del contenido de la escena"""
        pass


class ReferenceCache(ABC):
    """Puerto - Caché de panoramas de referencia renderizados"""

    @abstractmethod
    def get(self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int]) -> Optional[RenderBundle]:
        """Devuelve el render cacheado o None"""
        pass

    @abstractmethod
    def put(
        self, scene_hash: str, position: Sequence[float], dims: Tuple[int, int], bundle: RenderBundle
    ) -> RenderBundle:
        """Guarda un render y lo devuelve tal como lo servirá `get`"""
        pass


class ReportWriter(ABC):
    """Puerto - Escritura de reportes de evaluación y localización"""

    @abstractmethod
    def write_report(self, metrics: Metrics, records: List[Dict[str, Any]], out_dir: Path) -> Dict[str, Path]:
        """Escribe metrics.json y results.csv; devuelve las rutas"""
        pass

    @abstractmethod
    def write_localization(self, result: LocalizationResult, path: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
        """Serializa un LocalizationResult a JSON"""
        pass


class ExperimentTracker(ABC):
    """Puerto - Tracking de experimentos"""

    @abstractmethod
    def log_run(
        self,
        run_name: str,
        params: Dict[str, Any],
        metrics: Dict[str, float],
        artifacts: Optional[List[Path]] = None,
    ) -> Optional[str]:
        """Registra una ejecución; devuelve su id si el backend lo asigna"""
        pass
