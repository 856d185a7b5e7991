from functools import lru_cache

import torch
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Konfiguracja silnika wczytywana ze zmiennych środowiskowych (prefiks PHOTOBA_)."""

    model_config = SettingsConfigDict(env_prefix="PHOTOBA_", env_file=".env", env_file_encoding="utf-8")

    app_name: str = "Photometric Bundle Adjustment"
    environment: str = Field(default="local", description="Runtime environment name.")
    threads: int | None = Field(
        default=None,
        ge=1,
        description="Upper bound on intra-op threads used by the engine.",
    )
    log_level: str = Field(default="INFO", description="Root logger level used by the CLI.")
    gradcheck_step: float = Field(default=1e-6, gt=0.0)
    gradcheck_tolerance: float = Field(default=1e-5, gt=0.0)
    gradcheck_samples: int = Field(default=160, ge=1, le=512)
    gradcheck_snippets: int = Field(default=5, ge=1)
    gradcheck_size: int = Field(default=16, ge=8)
    gradcheck_frames: int = Field(default=3, ge=2)
    api_cors_origins: list[str] = Field(default_factory=lambda: ["*"], description="Origins allowed by CORS.")
    max_api_pixels: int = Field(
        default=128 * 128,
        ge=1,
        description="Largest image area accepted by HTTP solve and upsample requests.",
    )

    def apply_thread_limit(self) -> None:
        """Ogranicza liczbę wątków obliczeniowych, jeśli ustawiono limit."""
        if self.threads is not None:
            torch.set_num_threads(self.threads)


@lru_cache
def get_settings() -> Settings:
    """Return Settings singleton."""
    return Settings()
