"""
Utilities for the engine.
"""

from .logging_utils import setup_logging
from .linalg import max_norm, IDENTITY4, OMEGA, OMEGA_INV

__all__ = [
    'setup_logging',
    'max_norm',
    'IDENTITY4',
    'OMEGA',
    'OMEGA_INV',
]
