"""Configuration loading, round-tripping, and packaged-defaults sync."""

import pytest

from medallion.config import (
    config_from_doc,
    config_to_doc,
    default_config,
    load_config,
    load_packaged_config,
    save_config,
)
from medallion.errors import ValidationError
from medallion.settings import PipelineSettings
from medallion.sources import identity_entries
from medallion.store.types import MetricType, SourceSystem


def test_round_trip_through_yaml(tmp_path):
    config = default_config()
    path = tmp_path / "pipeline.yaml"
    save_config(config, path)
    loaded = load_config(path)
    assert config_to_doc(loaded) == config_to_doc(config)


def test_packaged_defaults_match_generated_defaults():
    """The shipped YAML is the serialized default configuration; regenerating
    it must be a no-op. Catches drift when defaults change in code."""
    assert config_to_doc(load_packaged_config()) == config_to_doc(default_config())


def test_missing_sections_rejected():
    with pytest.raises(ValidationError):
        config_from_doc({"settings": {"teams": ["t"]}})
    with pytest.raises(ValidationError):
        config_from_doc("not a mapping")


def test_settings_doc_round_trip():
    settings = default_config().settings
    assert PipelineSettings.from_doc(settings.to_doc()) == settings


def test_identity_map_covers_simulated_rosters():
    config = load_packaged_config()
    expected = identity_entries(config.settings.teams)
    assert config.settings.identity.to_doc() == dict(expected)


def test_default_shape():
    config = default_config()
    assert config.dag.dag_id == "dora_daily"
    assert set(config.sources) == {SourceSystem.JIRA, SourceSystem.GITHUB, SourceSystem.JENKINS}
    (rule,) = config.alert_rules
    assert rule.metric_type is MetricType.CHANGE_FAILURE_RATE
    assert rule.threshold == 0.15
    assert config.settings.sensors_enabled


def test_custom_file_overrides(tmp_path):
    doc = config_to_doc(default_config())
    doc["settings"]["sensors_enabled"] = False
    doc["settings"]["teams"] = ["team-a"]
    doc["sources"] = {
        name: {**body, "teams": ["team-a"]} for name, body in doc["sources"].items()
    }
    import yaml

    path = tmp_path / "legacy.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    loaded = load_config(path)
    assert loaded.settings.sensors_enabled is False
    assert loaded.settings.teams == ("team-a",)
    assert loaded.sources[SourceSystem.GITHUB].teams == ("team-a",)
