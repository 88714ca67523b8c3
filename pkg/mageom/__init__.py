"""
Monge-Ampere structures and generalized almost geometries on 4D phase space.
"""

__version__ = "0.1.0"

from .expr import parse, simplify, differentiate, evaluate, is_zero
from .ma import MAStructure, SignedRegion, classify, normalize, pfaffian
from .gen import GenEndo, GenType, classify_gen
from .courant import lr_integrability, nijenhuis_probe
from .models import RunConfig, SamplePlan

__all__ = [
    '__version__',
    'parse',
    'simplify',
    'differentiate',
    'evaluate',
    'is_zero',
    'MAStructure',
    'SignedRegion',
    'classify',
    'normalize',
    'pfaffian',
    'GenEndo',
    'GenType',
    'classify_gen',
    'lr_integrability',
    'nijenhuis_probe',
    'RunConfig',
    'SamplePlan',
]
