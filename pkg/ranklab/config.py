"""
ranklab Configuration

Process-wide settings loaded with Pydantic Settings. Experiment files are
handled separately by ``ranklab.models.experiment``.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laboratory settings loaded from environment variables (RANKLAB_*) or .env."""

    model_config = SettingsConfigDict(env_file=".env", env_prefix="RANKLAB_", extra="ignore")

    # Output
    out: str = "./ranklab_out"

    # Execution
    threads: int = 1
    seed: int = 0

    # Logging
    log_level: str = "INFO"
