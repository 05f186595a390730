"""
Pano Localizer - Semantic Panorama Localization
Localización 6D de cámaras en interiores contra panoramas semánticos renderizados

🎯 Objetivo: Estimar la pose 6D de una imagen semántica perspectiva en un modelo 3D mínimo
🏗️ Arquitectura: Hexagonal (domain / adapters / pipeline)
🚀 Stack: NumPy + SciPy + Shapely + Pillow + pandas + MLflow
"""

# Configuración del proyecto
PROJECT_NAME = "pano_localizer"
VERSION = "1.0.0"
DESCRIPTION = "Localización 6D de cámaras en interiores por matching contra panoramas semánticos"

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .domain.entities import GridConfig, HypothesisConfig, QueryParams, RefineConfig, SceneGenParams

load_dotenv()


@dataclass
class Config:
    """Configuración de entorno del proyecto"""

    cache_dir: str = os.getenv("PANO_LOCALIZER_CACHE_DIR", "data/cache")
    output_dir: str = os.getenv("PANO_LOCALIZER_OUTPUT_DIR", "data/runs")
    log_level: str = os.getenv("LOG_LEVEL", "INFO")

    # MLflow
    mlflow_tracking_uri: str = os.getenv("MLFLOW_TRACKING_URI", "sqlite:///data/mlflow.db")
    mlflow_experiment_name: str = "pano_localizer_evaluation"

    @classmethod
    def from_env(cls) -> "Config":
        """Relee el entorno (útil cuando cambia después del import)"""
        return cls(
            cache_dir=os.getenv("PANO_LOCALIZER_CACHE_DIR", "data/cache"),
            output_dir=os.getenv("PANO_LOCALIZER_OUTPUT_DIR", "data/runs"),
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            mlflow_tracking_uri=os.getenv("MLFLOW_TRACKING_URI", "sqlite:///data/mlflow.db"),
        )


# ---------------------------------------------------------------------------
# RunConfig: defaults <- documento --config <- flags
# ---------------------------------------------------------------------------


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSettings(_Settings):
    spacing: float = Field(1.2, gt=0, description="Separación de la rejilla (m)")
    mode: Literal["global", "local"] = Field("local", description="Rejilla global o por habitación")
    h_pano: float = Field(1.5, gt=0, description="Altura de los panoramas sobre el suelo (m)")
    pano_width: int = Field(256, ge=8)
    pano_height: int = Field(128, ge=4)

    @model_validator(mode="after")
    def _equirectangular(self):
        if self.pano_width != 2 * self.pano_height:
            raise ValueError(f"pano_width debe ser 2 * pano_height: {self.pano_width}x{self.pano_height}")
        return self

    def to_domain(self) -> GridConfig:
        return GridConfig(**self.model_dump())


class HypothesisSettings(_Settings):
    yaw_step_deg: float = Field(5.0, gt=0, le=360)
    pitches_deg: List[float] = Field(default_factory=lambda: [-10.0, 0.0, 10.0], min_length=1)
    rolls_deg: List[float] = Field(default_factory=lambda: [0.0], min_length=1)
    pano_grid_width: int = Field(128, ge=2)
    pano_grid_height: int = Field(64, ge=2)
    query_grid: int = Field(32, ge=2)

    def to_domain(self) -> HypothesisConfig:
        data = self.model_dump()
        data["pitches_deg"] = tuple(data["pitches_deg"])
        data["rolls_deg"] = tuple(data["rolls_deg"])
        return HypothesisConfig(**data)


class RefineSettings(_Settings):
    translation_step: float = Field(0.4, gt=0)
    rotation_step_deg: float = Field(5.0, gt=0)
    shrink: float = Field(0.5, gt=0, lt=1)
    min_translation_step: float = Field(0.01, gt=0)
    min_rotation_step_deg: float = Field(0.1, gt=0)
    max_evaluations: int = Field(400, ge=0)
    resolution: int = Field(64, ge=2)
    bound_xy: float = Field(1.4, gt=0)
    bound_z: float = Field(0.3, gt=0)

    def to_domain(self) -> RefineConfig:
        return RefineConfig(**self.model_dump())


class QuerySettings(_Settings):
    hfov_deg: float = Field(90.0, gt=0, lt=180, description="Campo de visión horizontal")
    tilt_max_deg: float = Field(10.0, ge=0, lt=90)
    min_height: float = Field(1.2, gt=0)
    max_height: float = Field(1.8, gt=0)
    resolution: int = Field(128, ge=8)
    min_classes: int = Field(3, ge=1)
    class_fraction: float = Field(0.01, gt=0, lt=1)
    min_center_distance: float = Field(1.0, ge=0)
    wall_clearance: float = Field(0.1, ge=0)

    @model_validator(mode="after")
    def _height_range(self):
        if self.max_height < self.min_height:
            raise ValueError(f"Rango de alturas vacío: [{self.min_height}, {self.max_height}]")
        return self

    def to_domain(self) -> QueryParams:
        return QueryParams(**self.model_dump())


class SceneGenSettings(_Settings):
    min_rooms: int = Field(4, ge=1)
    max_rooms: int = Field(8, ge=1)
    min_room_size: float = Field(3.0, gt=0)
    max_room_size: float = Field(6.0, gt=0)
    door_density: float = Field(0.6, ge=0, le=1)
    window_density: float = Field(0.5, ge=0, le=1)
    extra_connection_density: float = Field(0.2, ge=0, le=1)
    min_ceiling: float = Field(2.5, gt=0)
    max_ceiling: float = Field(3.0, gt=0)

    def to_domain(self) -> SceneGenParams:
        return SceneGenParams(**self.model_dump())


class RunConfig(_Settings):
    """Configuración resuelta de una ejecución (se escribe como run_config.json)"""

    scene: Optional[str] = None
    cache_dir: str = "data/cache"
    output_dir: str = "data/runs"
    seed: int = 0
    threads: int = Field(1, ge=0, description="0 = automático")
    top_n: int = Field(3, ge=1)
    refine_rounds: int = Field(1, ge=0)
    metrics_mode: Literal["2d", "3d"] = "3d"
    grid: GridSettings = Field(default_factory=GridSettings)
    hypotheses: HypothesisSettings = Field(default_factory=HypothesisSettings)
    refine: RefineSettings = Field(default_factory=RefineSettings)
    query: QuerySettings = Field(default_factory=QuerySettings)
    scene_gen: SceneGenSettings = Field(default_factory=SceneGenSettings)

    @field_validator("scene")
    @classmethod
    def _scene_exists(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not Path(value).is_file():
            raise ValueError(f"Documento de escena inexistente: {value}")
        return value

    @property
    def hfov(self) -> float:
        return math.radians(self.query.hfov_deg)

    def write(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "run_config.json"
        path.write_text(json.dumps(self.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Mezcla recursiva; los valores None de `override` no pisan nada"""
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def resolve_run_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
    env: Optional[Config] = None,
) -> RunConfig:
    """defaults (con entorno) <- documento JSON <- flags explícitos"""
    env = env or Config.from_env()
    data = RunConfig(cache_dir=env.cache_dir, output_dir=env.output_dir).model_dump()
    if config_path is not None:
        data = deep_merge(data, json.loads(Path(config_path).read_text(encoding="utf-8")))
    data = deep_merge(data, overrides or {})
    return RunConfig.model_validate(data)


# Instancia global de configuración
config = Config()
