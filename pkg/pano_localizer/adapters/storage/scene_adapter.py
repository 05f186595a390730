"""
Scene Adapter - Pano Localizer
Documento JSON de escena: parseo estricto (pydantic) y serialización canónica
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Annotated, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ...domain.entities import Room, Scene, WallItem
from ...domain.errors import SceneSchemaError, SceneSyntaxError
from ...domain.ports import SceneRepository

logger = logging.getLogger(__name__)

Point2D = Annotated[List[float], Field(min_length=2, max_length=2)]


class RoomDocument(BaseModel):
    """Habitación en el documento de escena"""

    model_config = ConfigDict(extra="forbid", strict=True)

    id: int
    floor_z: float
    ceiling_z: float
    polygon: List[Point2D]


class WallItemDocument(BaseModel):
    """Puerta, ventana o abertura en el documento de escena"""

    model_config = ConfigDict(extra="forbid", strict=True, populate_by_name=True)

    room: int
    edge: int
    cls: Literal["door", "window", "opening"] = Field(..., alias="class")
    offset: float
    width: float
    bottom_z: float
    top_z: float


class SceneDocument(BaseModel):
    """Documento de escena completo (version 1)"""

    model_config = ConfigDict(extra="forbid", strict=True)

    version: Literal[1]
    rooms: List[RoomDocument]
    wall_items: List[WallItemDocument] = Field(default_factory=list)

    def to_scene(self) -> Scene:
        rooms = tuple(
            Room(r.id, tuple((float(x), float(y)) for x, y in r.polygon), float(r.floor_z), float(r.ceiling_z))
            for r in self.rooms
        )
        items = tuple(
            WallItem(
                i.room, i.edge, i.cls, float(i.offset), float(i.width), float(i.bottom_z), float(i.top_z)
            )
            for i in self.wall_items
        )
        return Scene(self.version, rooms, items)

    @classmethod
    def from_scene(cls, scene: Scene) -> "SceneDocument":
        return cls(
            version=scene.version,
            rooms=[
                RoomDocument(
                    id=r.id,
                    floor_z=r.floor_z,
                    ceiling_z=r.ceiling_z,
                    polygon=[[float(x), float(y)] for x, y in r.polygon],
                )
                for r in scene.rooms
            ],
            wall_items=[
                WallItemDocument(
                    room=i.room,
                    edge=i.edge,
                    cls=i.cls,
                    offset=i.offset,
                    width=i.width,
                    bottom_z=i.bottom_z,
                    top_z=i.top_z,
                )
                for i in scene.wall_items
            ],
        )


def _schema_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def parse_scene(text: Union[str, bytes]) -> Scene:
    """Parsea un documento de escena UTF-8

    Raises:
        SceneSyntaxError: JSON mal formado (con línea y columna)
        SceneSchemaError: campo faltante, extra o de tipo incorrecto
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SceneSyntaxError(f"invalid UTF-8 at byte {e.start}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneSyntaxError(e.msg, e.lineno, e.colno) from e

    try:
        document = SceneDocument.model_validate(data)
    except ValidationError as e:
        raise SceneSchemaError(_schema_message(e)) from e
    return document.to_scene()


def serialize_scene(scene: Scene) -> str:
    """Serialización canónica (orden de campos fijo, floats en repr exacto)"""
    document = SceneDocument.from_scene(scene)
    return json.dumps(document.model_dump(by_alias=True), indent=2) + "\n"


def scene_hash(scene: Scene) -> str:
    """sha256 de la serialización canónica"""
    return hashlib.sha256(serialize_scene(scene).encode("utf-8")).hexdigest()


class JsonSceneRepository(SceneRepository):
    """Adapter - Escenas como ficheros JSON"""

    def load(self, path: Path) -> Scene:
        path = Path(path)
        scene = parse_scene(path.read_bytes())
        logger.info(f"✅ Escena cargada: {path} ({len(scene.rooms)} habitaciones, {len(scene.wall_items)} items)")
        return scene

    def save(self, scene: Scene, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(serialize_scene(scene), encoding="utf-8")
        logger.info(f"💾 Escena guardada: {path}")
        return path

    def scene_hash(self, scene: Scene) -> str:
        return scene_hash(scene)
