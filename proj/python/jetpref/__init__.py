"""Preference-based reward trees for a fast-jet simulator."""

from ._jetpref import (
    ConfigError,
    Error,
    InputError,
    PreferenceGraph,
    RewardTree,
    config_keys,
    config_text,
    feature_names,
    feature_schema_hash,
    induce,
    run_cli,
    run_online,
)

__all__ = [
    "ConfigError",
    "Error",
    "InputError",
    "PreferenceGraph",
    "RewardTree",
    "config_keys",
    "config_text",
    "feature_names",
    "feature_schema_hash",
    "induce",
    "run_cli",
    "run_online",
]
