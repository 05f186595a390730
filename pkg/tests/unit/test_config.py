"""
Unit Tests - Configuration
Resolución de RunConfig: defaults <- documento <- flags
"""

import json

import pytest
from pydantic import ValidationError

from pano_localizer.config import (
    Config,
    GridSettings,
    QuerySettings,
    RunConfig,
    deep_merge,
    resolve_run_config,
)
from pano_localizer.domain.entities import GridConfig, HypothesisConfig, QueryParams, RefineConfig, SceneGenParams

pytestmark = pytest.mark.unit


class TestSettings:
    def test_defaults_match_domain(self):
        rc = RunConfig()
        assert rc.grid.to_domain() == GridConfig()
        assert rc.hypotheses.to_domain() == HypothesisConfig()
        assert rc.refine.to_domain() == RefineConfig()
        assert rc.query.to_domain() == QueryParams()
        assert rc.scene_gen.to_domain() == SceneGenParams()

    def test_panorama_must_be_two_to_one(self):
        with pytest.raises(ValidationError):
            GridSettings(pano_width=100, pano_height=64)

    def test_empty_height_range(self):
        with pytest.raises(ValidationError):
            QuerySettings(min_height=2.0, max_height=1.0)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"grid": {"spacing": 1.0, "bogus": 1}})

    def test_hfov_in_radians(self):
        assert RunConfig().hfov == pytest.approx(1.5707963267948966)


class TestResolution:
    def test_deep_merge_skips_none(self):
        merged = deep_merge({"a": 1, "b": {"c": 2, "d": 3}}, {"a": None, "b": {"c": 5}})
        assert merged == {"a": 1, "b": {"c": 5, "d": 3}}

    def test_precedence(self, tmp_path):
        doc = tmp_path / "cfg.json"
        doc.write_text(json.dumps({"seed": 4, "grid": {"spacing": 2.0, "h_pano": 1.4}}))
        env = Config(cache_dir="/tmp/c", output_dir="/tmp/o")
        rc = resolve_run_config(doc, {"grid": {"spacing": 3.0}, "top_n": None}, env)
        assert rc.seed == 4
        assert rc.grid.spacing == 3.0
        assert rc.grid.h_pano == 1.4
        assert rc.top_n == 3
        assert rc.cache_dir == "/tmp/c"

    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setenv("PANO_LOCALIZER_CACHE_DIR", "/var/cache/pano")
        rc = resolve_run_config()
        assert rc.cache_dir == "/var/cache/pano"

    def test_invalid_override(self):
        with pytest.raises(ValidationError):
            resolve_run_config(overrides={"top_n": 0}, env=Config())

    def test_scene_must_exist(self, tmp_path):
        with pytest.raises(ValidationError, match="escena inexistente"):
            resolve_run_config(overrides={"scene": str(tmp_path / "missing.json")}, env=Config())

    def test_existing_scene_accepted(self, tmp_path):
        scene = tmp_path / "scene.json"
        scene.write_text("{}")
        assert resolve_run_config(overrides={"scene": str(scene)}, env=Config()).scene == str(scene)

    def test_write_is_stable(self, tmp_path):
        rc = RunConfig(seed=3)
        path = rc.write(tmp_path / "out")
        assert path.name == "run_config.json"
        data = json.loads(path.read_text())
        assert data["seed"] == 3
        assert RunConfig.model_validate(data) == rc
        first = path.read_text()
        rc.write(tmp_path / "out")
        assert path.read_text() == first
