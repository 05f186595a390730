"""
Integration Tests - Scene Adapter
Parseo estricto, serialización canónica y repositorio JSON
"""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pano_localizer.adapters.storage.scene_adapter import (
    JsonSceneRepository,
    parse_scene,
    scene_hash,
    serialize_scene,
)
from pano_localizer.domain.errors import SceneSchemaError, SceneSyntaxError
from pano_localizer.domain.scene_model import generate_synthetic_scene

pytestmark = pytest.mark.integration

MINIMAL = {
    "version": 1,
    "rooms": [{"id": 0, "floor_z": 0.0, "ceiling_z": 3, "polygon": [[0, 0], [4, 0], [4, 4], [0, 4]]}],
    "wall_items": [
        {"room": 0, "edge": 1, "class": "door", "offset": 1.0, "width": 0.9, "bottom_z": 0.0, "top_z": 2.1}
    ],
}


class TestParse:
    def test_minimal_document(self):
        scene = parse_scene(json.dumps(MINIMAL))
        assert scene.version == 1
        assert scene.rooms[0].polygon[2] == (4.0, 4.0)
        assert scene.rooms[0].ceiling_z == 3.0
        assert scene.wall_items[0].cls == "door"

    def test_wall_items_optional(self):
        doc = dict(MINIMAL)
        del doc["wall_items"]
        assert parse_scene(json.dumps(doc)).wall_items == ()

    def test_syntax_error_has_position(self):
        with pytest.raises(SceneSyntaxError) as exc:
            parse_scene('{\n  "version": 1,\n  "rooms": [\n}')
        assert exc.value.line == 4
        assert exc.value.column is not None

    def test_invalid_utf8(self):
        with pytest.raises(SceneSyntaxError):
            parse_scene(b'{"version": 1, "rooms": ["\xff"]}')

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("rooms"),
            lambda d: d.update(version=2),
            lambda d: d.update(extra=True),
            lambda d: d["rooms"][0].update(floor_z="0"),
            lambda d: d["rooms"][0].update(polygon=[[0, 0, 0], [1, 0, 0], [1, 1, 0]]),
            lambda d: d["wall_items"][0].update({"class": "stairs"}),
            lambda d: d["wall_items"][0].pop("top_z"),
        ],
    )
    def test_schema_errors(self, mutate):
        doc = json.loads(json.dumps(MINIMAL))
        mutate(doc)
        with pytest.raises(SceneSchemaError):
            parse_scene(json.dumps(doc))

    def test_semantic_errors_are_not_schema_errors(self):
        doc = json.loads(json.dumps(MINIMAL))
        doc["wall_items"][0]["offset"] = 10.0
        scene = parse_scene(json.dumps(doc))
        assert scene.wall_items[0].offset == 10.0


class TestSerialize:
    def test_uses_class_key(self):
        data = json.loads(serialize_scene(parse_scene(json.dumps(MINIMAL))))
        assert data["wall_items"][0]["class"] == "door"
        assert "cls" not in data["wall_items"][0]

    @settings(max_examples=15, deadline=None)
    @given(st.integers(min_value=0, max_value=100_000))
    def test_round_trip_generated_scenes(self, seed):
        scene = generate_synthetic_scene(seed)
        text = serialize_scene(scene)
        assert parse_scene(text) == scene
        assert serialize_scene(parse_scene(text)) == text

    def test_hash_is_content_addressed(self):
        a = generate_synthetic_scene(1)
        assert scene_hash(a) == scene_hash(parse_scene(serialize_scene(a)))
        assert scene_hash(a) != scene_hash(generate_synthetic_scene(2))
        assert len(scene_hash(a)) == 64


class TestRepository:
    def test_save_and_load(self, tmp_path, two_room_scene):
        repo = JsonSceneRepository()
        path = repo.save(two_room_scene, tmp_path / "nested" / "scene.json")
        assert path.exists()
        assert repo.load(path) == two_room_scene
        assert repo.scene_hash(two_room_scene) == scene_hash(two_room_scene)
