"""YAML configuration: one file describes the whole deployment.

The packaged defaults (``medallion/defaults/pipeline.yaml``) are the shipped
configuration; `load_config` reads an override file of the same shape. The
doc produced by `config_to_doc` round-trips exactly, which is what keeps the
packaged file honest (a test regenerates it and compares).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dag.spec import DagSpec, default_dag_spec
from .errors import ValidationError
from .monitor.rules import AlertRule, default_rules
from .settings import PipelineSettings
from .sources.simulator import SourceConfig, default_source_configs, identity_entries
from .store.types import SourceSystem, fmt_instant, parse_instant
from .transforms import IdentityMap

DEFAULT_TEAMS = ("team-a", "team-b", "team-c")
DEFAULT_SIM_START = datetime(2024, 3, 1, 6, 0, tzinfo=timezone.utc)
DEFAULTS_PACKAGE = "medallion.defaults"
DEFAULTS_NAME = "pipeline.yaml"


@dataclass(frozen=True)
class AppConfig:
    """Everything needed to assemble a running system against a data dir."""

    settings: PipelineSettings
    dag: DagSpec
    sources: dict[SourceSystem, SourceConfig]
    alert_rules: tuple[AlertRule, ...]
    sim_start: datetime = DEFAULT_SIM_START

    def with_settings(self, settings: PipelineSettings) -> "AppConfig":
        return replace(self, settings=settings)


def default_config(seed: int = 42, teams: tuple[str, ...] = DEFAULT_TEAMS) -> AppConfig:
    return AppConfig(
        settings=PipelineSettings(teams=teams, identity=IdentityMap(identity_entries(teams))),
        dag=default_dag_spec(),
        sources=default_source_configs(seed=seed, teams=teams),
        alert_rules=default_rules(),
    )


def config_to_doc(config: AppConfig) -> dict:
    return {
        "sim_start": fmt_instant(config.sim_start),
        "settings": config.settings.to_doc(),
        "dag": config.dag.to_doc(),
        "sources": {
            source.value: cfg.to_doc() for source, cfg in sorted(
                config.sources.items(), key=lambda kv: kv[0].value
            )
        },
        "alert_rules": [rule.to_doc() for rule in config.alert_rules],
    }


def config_from_doc(doc: Mapping[str, Any]) -> AppConfig:
    if not isinstance(doc, Mapping):
        raise ValidationError("config root must be a mapping")
    missing = [k for k in ("settings", "dag", "sources") if k not in doc]
    if missing:
        raise ValidationError(f"config is missing sections: {', '.join(missing)}")
    return AppConfig(
        settings=PipelineSettings.from_doc(doc["settings"]),
        dag=DagSpec.from_doc(doc["dag"]),
        sources={
            SourceSystem(name): SourceConfig.from_doc(body)
            for name, body in doc["sources"].items()
        },
        alert_rules=tuple(AlertRule.from_doc(r) for r in doc.get("alert_rules", [])),
        sim_start=parse_instant(doc["sim_start"]) if doc.get("sim_start") else DEFAULT_SIM_START,
    )


def save_config(config: AppConfig, path: Path | str) -> None:
    text = yaml.safe_dump(config_to_doc(config), sort_keys=True, default_flow_style=False)
    Path(path).write_text(text, encoding="utf-8")


def load_config(path: Path | str) -> AppConfig:
    raw = Path(path).read_text(encoding="utf-8")
    return config_from_doc(yaml.safe_load(raw))


def load_packaged_config() -> AppConfig:
    raw = resources.files(DEFAULTS_PACKAGE).joinpath(DEFAULTS_NAME).read_text(encoding="utf-8")
    return config_from_doc(yaml.safe_load(raw))
