from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_ignore_empty=True,
        extra="ignore",
    )
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["console", "json"] = "console"

    ENVIRONMENT: Literal["local", "testing", "production"] = "local"

    PROJECT_NAME: str = "Speaker-Adaptive ERC"

    # Concurrent training runs for ablation / sweep when --jobs is not given
    DEFAULT_JOBS: int = 1

    @field_validator("DEFAULT_JOBS")
    @classmethod
    def _jobs_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("DEFAULT_JOBS must be at least 1")
        return value


settings = Settings()
