"""Environment configuration for ConvBound

Values come from the process environment, optionally seeded from a ``.env``
file. They are read on every call so a changed environment takes effect
without reloading the module.
"""

import os

from dotenv import load_dotenv

from lib.errors import DomainError

load_dotenv()

DEFAULT_ORACLE_CAP = 2048
DEFAULT_DATABASE_PATH = os.path.join('data', 'convbound.db')
# Railway mounts the persistent volume here (see railway.toml)
RAILWAY_DATABASE_PATH = '/data/convbound.db'
DEFAULT_SEED = 0


def _int_setting(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw.strip())
    except ValueError as e:
        raise DomainError(f"{name} must be an integer, got '{raw}'") from e
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def oracle_cap() -> int:
    """Largest min(rows, cols) the dense oracle accepts (CONVBOUND_ORACLE_CAP)"""
    return _int_setting('CONVBOUND_ORACLE_CAP', DEFAULT_ORACLE_CAP, 1)


def database_path() -> str:
    """SQLite file for the report store (CONVBOUND_DATABASE_PATH)

    Defaults to the mounted volume when running on Railway.
    """
    default = RAILWAY_DATABASE_PATH if os.getenv('RAILWAY_ENVIRONMENT') else DEFAULT_DATABASE_PATH
    return os.getenv('CONVBOUND_DATABASE_PATH', default)


def default_seed() -> int:
    """Seed used by ``gen`` and ``verify`` when none is given (CONVBOUND_SEED)"""
    return _int_setting('CONVBOUND_SEED', DEFAULT_SEED, 0)
