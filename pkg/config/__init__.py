"""
Configuration module for FMT Desk.

Provides centralized access to project paths and the bundled config files.
"""

from pathlib import Path

# Project root
PROJECT_ROOT = Path(__file__).resolve().parent.parent

# Directory paths
CONFIG_DIR = PROJECT_ROOT / "config"
DATA_DIR = PROJECT_ROOT / "data"
CHECKPOINTS_DIR = PROJECT_ROOT / "checkpoints"
REPORTS_DIR = PROJECT_ROOT / "reports"
LOGS_DIR = PROJECT_ROOT / "logs"

# Bundled configuration files
MODEL_CONFIG = CONFIG_DIR / "models" / "fmt_config.yaml"
SMALL_MODEL_CONFIG = CONFIG_DIR / "models" / "fmt_small.yaml"
TRAIN_CONFIG = CONFIG_DIR / "training" / "train_config.yaml"

__all__ = [
    "PROJECT_ROOT",
    "CONFIG_DIR",
    "DATA_DIR",
    "CHECKPOINTS_DIR",
    "REPORTS_DIR",
    "LOGS_DIR",
    "MODEL_CONFIG",
    "SMALL_MODEL_CONFIG",
    "TRAIN_CONFIG",
]
