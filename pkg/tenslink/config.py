import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


load_dotenv()


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        return default


@dataclass(frozen=True)
class Settings:
    app_env: str = os.getenv("APP_ENV", "dev")

    # parallelism cap for per-block / per-cube work
    threads: int = max(1, _int_env("TENSLINK_THREADS", 1))
    log_level: str = os.getenv("TENSLINK_LOG_LEVEL", "WARNING")
    default_seed: int = _int_env("TENSLINK_SEED", 0)

    # optional run ledger; unset means reports are not persisted
    database_url: Optional[str] = os.getenv("DATABASE_URL")


settings = Settings()
