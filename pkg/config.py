"""
Runtime configuration loaded from environment variables and an optional .env file.
"""
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """
    Process-wide settings.

    Every field can be set through a QCM_SYSID_* environment variable,
    e.g. QCM_SYSID_THREADS=8. Command-line flags take precedence.
    """
    model_config = SettingsConfigDict(env_prefix="QCM_SYSID_", extra="ignore")

    threads: int = Field(1, ge=1, description="Worker processes for dataset generation")
    log_level: str = Field("INFO", description="Root logging level")
    data_dir: str = Field("data", description="Default dataset directory")

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v):
        """Normalize and validate the logging level name."""
        level = v.strip().upper()
        if level not in ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]:
            raise ValueError(f'Unknown log level: {v}')
        return level


@lru_cache
def get_settings() -> Settings:
    """Return the cached settings instance."""
    return Settings()
