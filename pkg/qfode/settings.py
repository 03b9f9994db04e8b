import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from logger import setup_logger
from qfode.errors import ConfigurationError

logger = setup_logger(__name__)


class Settings(BaseModel):
    max_qubits: int = Field(default=24, description="Statevector qubit cap")
    max_dense_dim: int = Field(default=4096, description="Largest dense operator dimension")
    max_nesting: int = Field(default=12, description="Cap on the nesting exponent k")
    output_dir: Optional[str] = Field(default=None, description="Output directory override")


def _read_int(var: str, default: int) -> int:
    raw = os.getenv(var)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"{var} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigurationError(f"{var} must be positive, got {value}")
    return value


@lru_cache(maxsize=None)
def get_settings() -> Settings:
    """Read process-level caps from the environment (and .env if present).

    Read once per process; call get_settings.cache_clear() after changing QFODE_* variables.
    """
    load_dotenv()

    settings = Settings(
        max_qubits=_read_int("QFODE_MAX_QUBITS", 24),
        max_dense_dim=_read_int("QFODE_MAX_DENSE_DIM", 4096),
        max_nesting=_read_int("QFODE_MAX_NESTING", 12),
        output_dir=os.getenv("QFODE_OUTPUT_DIR") or None,
    )
    logger.debug(f"Settings loaded: {settings.model_dump()}")
    return settings
