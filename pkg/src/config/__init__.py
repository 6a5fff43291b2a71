"""Configuration module initialization."""

from .settings import (
    DataSettings,
    ModelSettings,
    PathSettings,
    Settings,
    TrainingSettings,
    get_settings,
    load_settings,
)

__all__ = [
    "Settings",
    "ModelSettings",
    "TrainingSettings",
    "DataSettings",
    "PathSettings",
    "get_settings",
    "load_settings",
]
