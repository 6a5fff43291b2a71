"""
Configuration management for FMT Desk.

Centralized settings using Pydantic for type safety and validation.
Loads configuration from environment variables and YAML files.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.utils.exceptions import ConfigError

ENV_FILE = str(Path(__file__).parent.parent.parent / ".env")

Variant = Literal["full", "image_only", "text_only", "fusion_no_stack"]
Activation = Literal["gelu", "identity"]


class ModelSettings(BaseSettings):
    """FMT architecture hyperparameters; serialized into every checkpoint."""

    d_model: int = Field(default=768, ge=1, description="Token embedding width")
    n_heads: int = Field(default=4, ge=1, description="Attention heads per encoder layer")
    n_layers: int = Field(default=2, ge=1, description="Encoder layers")
    d_ff: Optional[int] = Field(default=None, ge=1, description="Feed-forward width (4*d_model)")
    vocab_size: int = Field(default=64, ge=2, description="Text vocabulary size")
    max_len: int = Field(default=64, ge=3, description="Position table length (composite sequence)")
    image_size: int = Field(default=16, ge=2, description="Side of the square grayscale grid")
    use_conv_backbone: bool = Field(default=True, description="Conv + pool before the MLP")
    conv_channels: int = Field(default=4, ge=1, description="Backbone convolution filters")
    conv_kernel: int = Field(default=3, ge=1, description="Backbone kernel side")
    pool_size: int = Field(default=2, ge=1, description="Backbone average-pool side")
    fusion_widths: List[int] = Field(
        default=[512, 256, 128],
        description="Fusion MLP widths; the last one is the expert width",
    )
    n_experts: int = Field(default=4, ge=1, description="Experts per stacked layer")
    expert_activation: Activation = Field(default="gelu", description="Expert MLP activation")
    gru_hidden: int = Field(default=128, ge=1, description="Hidden units per GRU cell")
    num_classes: int = Field(default=2, ge=2, description="Output classes")
    variant: Variant = Field(default="full", description="Head variant used by the ablation")
    init_seed: int = Field(default=0, ge=0, description="Parameter initialization seed")

    model_config = SettingsConfigDict(env_prefix="FMT_MODEL_", extra="ignore")

    @field_validator("fusion_widths")
    @classmethod
    def validate_fusion_widths(cls, v: List[int]) -> List[int]:
        """Fusion is always a three-layer perceptron."""
        if len(v) != 3 or any(w < 1 for w in v):
            raise ValueError(f"fusion_widths must be three positive widths, got {v}")
        return v

    @model_validator(mode="after")
    def validate_heads(self) -> "ModelSettings":
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.use_conv_backbone and self.conv_kernel > self.image_size:
            raise ValueError("conv_kernel cannot exceed image_size")
        return self

    @property
    def ff_width(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model

    @property
    def image_dim(self) -> int:
        return self.image_size * self.image_size

    @property
    def expert_width(self) -> int:
        return self.fusion_widths[-1]


class TrainingSettings(BaseSettings):
    """Optimization and modality-dropout settings."""

    epochs: int = Field(default=30, ge=1, description="Passes over the training split")
    batch_size: int = Field(default=8, ge=1, description="Samples per Adam step")
    lr: float = Field(default=1e-3, ge=0.0, description="Adam learning rate")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    p_drop: float = Field(default=0.3, ge=0.0, le=1.0, description="Modality dropout rate")
    seed: int = Field(default=0, ge=0, description="Shuffle and dropout seed")
    aux_loss_weight: float = Field(default=0.0, ge=0.0, description="Per-task auxiliary loss")
    max_workers: int = Field(default=1, ge=1, description="Threads for evaluation")
    show_progress: bool = Field(default=True, description="Show tqdm progress bars")

    model_config = SettingsConfigDict(env_prefix="FMT_TRAIN_", extra="ignore")


class DataSettings(BaseSettings):
    """Synthetic dataset generation and split settings."""

    n: int = Field(default=200, ge=1, description="Record count")
    seed: int = Field(default=0, ge=0, description="Generation seed")
    noise: float = Field(default=0.3, ge=0.0, description="Gaussian image noise scale")
    missing_rate: float = Field(default=0.0, ge=0.0, lt=1.0, description="Single-modality loss")
    text_dropout: float = Field(default=0.0, ge=0.0, lt=1.0, description="Per-token corruption")
    vocab: int = Field(default=64, ge=4, description="Vocabulary size")
    text_len: int = Field(default=12, ge=1, description="Tokens per record")
    num_classes: int = Field(default=2, ge=2, description="Classes")
    image_size: int = Field(default=16, ge=4, description="Grid side")
    train_fraction: float = Field(default=0.75, gt=0.0, lt=1.0, description="Train share")

    model_config = SettingsConfigDict(env_prefix="FMT_DATA_", extra="ignore")


class PathSettings(BaseSettings):
    """Project path configuration."""

    project_root: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent)

    model_config = SettingsConfigDict(env_prefix="FMT_PATH_", extra="ignore")

    @property
    def config_dir(self) -> Path:
        return self.project_root / "config"

    @property
    def data_dir(self) -> Path:
        return self.project_root / "data"

    @property
    def checkpoints_dir(self) -> Path:
        return self.project_root / "checkpoints"

    @property
    def reports_dir(self) -> Path:
        return self.project_root / "reports"

    @property
    def logs_dir(self) -> Path:
        return self.project_root / "logs"


class Settings(BaseSettings):
    """Main application settings."""

    model: ModelSettings = Field(default_factory=ModelSettings)
    training: TrainingSettings = Field(default_factory=TrainingSettings)
    data: DataSettings = Field(default_factory=DataSettings)
    paths: PathSettings = Field(default_factory=PathSettings)

    log_level: str = Field(default="INFO", description="Logging level")

    model_config = SettingsConfigDict(
        env_prefix="FMT_",
        env_file=ENV_FILE,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        protected_namespaces=(),
    )


SECTIONS = {"model": ModelSettings, "training": TrainingSettings, "data": DataSettings}


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a YAML (or JSON) configuration file into a section mapping.

    Args:
        path: Config file path

    Returns:
        Mapping of section name to field overrides
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            content = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e

    if not isinstance(content, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    unknown = set(content) - set(SECTIONS) - {"log_level"}
    if unknown:
        raise ConfigError(f"Unknown config sections in {path}: {sorted(unknown)}")
    return content


def load_settings(
    *config_files: Union[str, Path],
    overrides: Optional[Dict[str, Dict[str, Any]]] = None,
) -> Settings:
    """
    Build settings from defaults, environment, config files and overrides.

    Later files win over earlier ones; overrides (CLI flags) win over files.

    Args:
        config_files: YAML/JSON files with `model`, `training`, `data` sections
        overrides: Per-section field overrides

    Returns:
        Validated Settings instance
    """
    merged: Dict[str, Any] = {name: {} for name in SECTIONS}
    top_level: Dict[str, Any] = {}
    for path in config_files:
        for key, value in read_config_file(path).items():
            if key in SECTIONS:
                merged[key].update(value or {})
            else:
                top_level[key] = value
    for section, values in (overrides or {}).items():
        merged.setdefault(section, {}).update(
            {k: v for k, v in values.items() if v is not None}
        )

    try:
        sections = {name: cls(**merged[name]) for name, cls in SECTIONS.items()}
        return Settings(**sections, **top_level)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get the global settings instance."""
    return settings
