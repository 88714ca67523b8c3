"""
Configuration handling for the engine.

Defaults come from the environment (optionally a .env file); the JSON config
and CLI flags override them per run.
"""

import os
from typing import Tuple

from dotenv import load_dotenv

from .models import EngineSettings

# Load environment variables
load_dotenv()


def _parse_box(raw_value: str) -> Tuple[float, float]:
    """Parse a "lo,hi" pair into the default per-variable sampling box."""
    parts = [part.strip() for part in raw_value.split(",") if part.strip()]
    if len(parts) != 2:
        raise ValueError(f"MAGEOM_BOX must look like 'lo,hi', got '{raw_value}'")
    return float(parts[0]), float(parts[1])


def get_engine_settings() -> EngineSettings:
    """
    Get engine defaults from environment variables.

    Returns:
        EngineSettings with values from environment variables
    """
    return EngineSettings(
        zero_tol=float(os.getenv("MAGEOM_ZERO_TOL", "1e-9")),
        matrix_tol=float(os.getenv("MAGEOM_MATRIX_TOL", "1e-10")),
        family_tol=float(os.getenv("MAGEOM_FAMILY_TOL", "1e-9")),
        pfaffian_floor=float(os.getenv("MAGEOM_PFAFFIAN_FLOOR", "1e-6")),
        points=int(os.getenv("MAGEOM_POINTS", "32")),
        seed=int(os.getenv("MAGEOM_SEED", "0")),
        box=_parse_box(os.getenv("MAGEOM_BOX", "-2,2")),
        retry_cap=int(os.getenv("MAGEOM_RETRY_CAP", "1000000")),
    )


# Load all configuration on module import
ENGINE_SETTINGS = get_engine_settings()


# Configure logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
LOG_FORMAT = os.getenv("LOG_FORMAT", "simple")
