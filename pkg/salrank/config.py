"""Application configuration using pydantic-settings."""

from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from salrank.utils.exceptions import SpecError


class Settings(BaseSettings):
    """Runtime settings loaded from ``SALRANK_*`` environment variables."""

    # Logging
    log_level: str = "INFO"

    # Remote services
    mllm_url: Optional[str] = None
    ground_url: Optional[str] = None
    http_timeout: float = 30.0  # seconds
    max_in_flight: int = 4  # concurrent remote clip requests

    # Stub server
    stub_host: str = "127.0.0.1"
    stub_port: int = 8765
    stub_dataset: Optional[str] = None  # serve oracle answers for this dataset

    # Curation / prompting
    placeholder_caption: str = "A video clip."
    prompt_mode: Literal["cot", "direct"] = "cot"

    model_config = SettingsConfigDict(
        env_prefix="SALRANK_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


class TrainConfig(BaseModel):
    """Diffusion training hyper-parameters (key-value config file)."""

    model_config = ConfigDict(extra="ignore")

    steps: int = Field(default=2000, ge=1)
    timesteps: int = Field(default=100, ge=1)
    beta_start: float = Field(default=1e-4, gt=0, lt=1)
    beta_end: float = Field(default=0.07, gt=0, lt=1)
    learning_rate: float = Field(default=2e-3, gt=0)
    batch_size: int = Field(default=8, ge=1)
    ratio: float = Field(default=0.5, ge=0, le=1)  # share of samples that see a ranking map
    seed: int = 0
    channels: Tuple[int, int, int] = (8, 16, 32)
    feature_channels: int = Field(default=16, ge=1)
    time_channels: int = Field(default=4, ge=2)
    temporal_window: int = Field(default=0, ge=0)  # 0 = mean over every frame of the clip
    rank_map_source: Literal["rstar", "gt"] = "rstar"
    log_every: int = Field(default=100, ge=1)

    @field_validator("channels", mode="before")
    @classmethod
    def _parse_channels(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(int(part) for part in value.replace(",", " ").split())
        return value

    @field_validator("time_channels")
    @classmethod
    def _even_time_channels(cls, value: int) -> int:
        if value % 2:
            raise ValueError("time_channels must be even (sine/cosine pairs)")
        return value


def load_kv_file(path: Path) -> Dict[str, str]:
    """
    Read a ``key = value`` text file.

    Blank lines and ``#`` comments are skipped; keys are lower-cased.

    Raises:
        SpecError: If the file is missing or a line is malformed
    """
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"Config file not found: {path}")
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SpecError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip().lower()] = value.strip()
    return values


def load_train_config(path: Optional[Path], **overrides: Any) -> TrainConfig:
    """Build a TrainConfig from an optional key-value file plus overrides."""
    values: Dict[str, Any] = dict(load_kv_file(path)) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise SpecError(f"Invalid training config: {e}") from e


def load_settings(path: Optional[Path] = None) -> Settings:
    """Settings from the environment, with keys from ``path`` taking precedence."""
    if path is None:
        return Settings()
    known = set(Settings.model_fields)
    overrides = {k: v for k, v in load_kv_file(path).items() if k in known}
    try:
        return Settings(**overrides)
    except ValidationError as e:
        raise SpecError(f"Invalid settings in {path}: {e}") from e


# Global settings instance
settings = Settings()
