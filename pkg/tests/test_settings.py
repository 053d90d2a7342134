#!/usr/bin/env python
# -*- coding: utf-8 -*-

from pathlib import Path

import pytest
import yaml

from parsimony.exceptions import ConfigError
from parsimony.settings import (
    DEFAULT_KNOBS,
    RunConfig,
    available_presets,
    read_document,
    recursive_update,
    validate_run_document,
)


def write(path: Path, document) -> Path:
    path.write_text(yaml.safe_dump(document))
    return path


class TestRecursiveUpdate:
    """settings.recursive_update"""

    def test_nested_keys_are_merged(self):
        original = {"nk": {"beta": 0.99, "kappa": 0.172}, "format": "csv"}
        updated = recursive_update(original, {"nk": {"kappa": 0.2}, "seed": 3})
        assert updated == {"nk": {"beta": 0.99, "kappa": 0.2}, "format": "csv", "seed": 3}

    def test_inputs_are_left_untouched(self):
        original = {"nk": {"beta": 0.99}, "knobs": {"max-lag": 40}}
        new = {"nk": {"kappa": 0.2}, "ge_pe": {"alphas": [0.5, 0.5]}}
        updated = recursive_update(original, new)
        updated["nk"]["beta"] = 0.5
        updated["ge_pe"]["alphas"].append(0.0)
        assert original == {"nk": {"beta": 0.99}, "knobs": {"max-lag": 40}}
        assert new == {"nk": {"kappa": 0.2}, "ge_pe": {"alphas": [0.5, 0.5]}}

    def test_mapping_replaces_a_scalar(self):
        assert recursive_update({"nk": None}, {"nk": {"beta": 0.99}}) == {"nk": {"beta": 0.99}}


class TestDocuments:
    """settings.read_document, settings.validate_run_document"""

    def test_presets_ship_with_the_package(self):
        presets = available_presets()
        for name in ("ar1", "example-1", "nk-paper", "rbc-paper", "dmp-paper", "ge-pe-demo"):
            assert name in presets

    def test_every_preset_is_valid(self):
        for name in available_presets():
            RunConfig.load(preset=name)

    def test_empty_document(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.touch()
        assert read_document(path) == {}

    def test_list_document(self, tmp_path):
        with pytest.raises(ConfigError):
            read_document(write(tmp_path / "list.yaml", [1, 2]))

    def test_json_document(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"process": {"F": [[0.5]]}}')
        assert read_document(path) == {"process": {"F": [[0.5]]}}

    def test_unparsable_document(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("process: [unclosed")
        with pytest.raises(ConfigError):
            read_document(path)

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_run_document({"solow": {"s": 0.2}})
        assert "solow" in str(excinfo.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            validate_run_document({"nk": {"beta": 0.99, "omega": 1.0}})
        assert "omega" in str(excinfo.value)

    @pytest.mark.parametrize("value", [0, -1.0, "many", True])
    def test_invalid_knob(self, value):
        with pytest.raises(ConfigError):
            validate_run_document({"knobs": {"grid-a": value}})


class TestRunConfig:
    """settings.RunConfig"""

    def test_defaults(self):
        run = RunConfig()
        assert run.format == "csv"
        assert run.seed == 20240101
        assert run.tolerance == 1e-10
        assert run.output_dir == Path("results")

    def test_preset(self):
        run = RunConfig.load(preset="nk-paper")
        assert run.section("nk")["kappa"] == 0.172

    def test_unknown_preset(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.load(preset="nk-latest")
        assert "ar1" in str(excinfo.value)

    def test_user_document_wins_over_preset(self, tmp_path):
        path = write(tmp_path / "run.yaml", {"nk": {"kappa": 0.2}})
        run = RunConfig.load(config_path=path, preset="nk-paper")
        assert run.section("nk")["kappa"] == 0.2
        assert run.section("nk")["beta"] == 0.99

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(config_path=tmp_path / "missing.yaml")

    def test_missing_section(self):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.load(preset="ar1").section("nk")
        assert "--preset" in str(excinfo.value)

    def test_knobs(self, tmp_path):
        path = write(tmp_path / "run.yaml", {"knobs": {"grid-a": 51}})
        run = RunConfig.load(config_path=path)
        assert run.knob("grid-a") == 51
        assert run.knob("grid-eta") == DEFAULT_KNOBS["grid-eta"] == 101

    def test_cli_options_override_defaults(self):
        run = RunConfig.load(preset="ar1", format="json", seed=5, tolerance=None)
        assert run.format == "json"
        assert run.seed == 5
        assert run.tolerance == 1e-10

    @pytest.mark.parametrize("changes", [{"format": "xlsx"}, {"tolerance": 0.0}])
    def test_invalid_options(self, changes):
        with pytest.raises(ConfigError):
            RunConfig(**changes)
