"""Runtime settings read from the environment."""
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

DEFAULT_DB_ROOT = "databases"
DEFAULT_EXACT_COUNT_LIMIT = 10 ** 7


@dataclass(frozen=True)
class Settings:
    db_root: Path
    workers: int
    exact_count_limit: int
    sentry_dsn: Optional[str] = None


def load_settings(environ: Optional[Mapping[str, str]] = None) -> Settings:
    """Build Settings from environment variables.

    Recognised variables: SETROGRADE_DB_ROOT, SETROGRADE_WORKERS,
    SETROGRADE_EXACT_COUNT_LIMIT and SENTRY_DSN.

    Raises:
        ValueError: If a numeric variable is not a positive integer
    """
    env = os.environ if environ is None else environ
    workers = int(env.get("SETROGRADE_WORKERS", os.cpu_count() or 1))
    limit = int(env.get("SETROGRADE_EXACT_COUNT_LIMIT", DEFAULT_EXACT_COUNT_LIMIT))
    if workers < 1 or limit < 1:
        raise ValueError(f"workers and exact count limit must be positive, got {workers} and {limit}")
    return Settings(
        db_root=Path(env.get("SETROGRADE_DB_ROOT", DEFAULT_DB_ROOT)),
        workers=workers,
        exact_count_limit=limit,
        sentry_dsn=env.get("SENTRY_DSN") or None,
    )
