"""TOML config files: ``[preprocess]``, ``[scenario]`` and ``[agent]`` tables."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .core import LLError
from .preprocess import PreprocessConfig
from .scenario import ScenarioSpec
from .simulate import SyntheticAgentParams


class ConfigError(LLError):
    pass


def load_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("E_CONFIG_IO", f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("E_BAD_CONFIG", f"{path}: {exc}") from None


def preprocess_config(doc: Mapping[str, Any]) -> PreprocessConfig:
    table = doc.get("preprocess", {})
    try:
        return PreprocessConfig.from_mapping(table)
    except TypeError as exc:
        raise ConfigError("E_BAD_CONFIG", f"preprocess: {exc}") from None


def scenario_spec(doc: Mapping[str, Any]) -> ScenarioSpec:
    if "scenario" not in doc:
        raise ConfigError("E_BAD_SPEC", "config has no [scenario] table")
    return ScenarioSpec.from_mapping(doc["scenario"])


def agent_params(doc: Mapping[str, Any], spec: ScenarioSpec) -> SyntheticAgentParams:
    try:
        return SyntheticAgentParams.from_mapping(doc.get("agent", {}), spec.task_variants())
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError("E_BAD_PARAMS", f"agent: {exc}") from None


def scenario_to_toml(spec: ScenarioSpec) -> str:
    return tomli_w.dumps({"scenario": spec.to_mapping()})
