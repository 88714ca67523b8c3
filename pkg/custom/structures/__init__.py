"""
Named Monge-Ampere structure presets.

This module provides an abstract base class for structure presets that a run
config can reference by name instead of spelling out the coefficients A..E.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class PresetResult:
    """Normalized response returned by structure presets."""

    coefficients: Dict[str, str]
    stated_equation: Optional[str] = None
    notes: List[str] = field(default_factory=list)


class StructurePreset(ABC):
    """
    Abstract base class for structure presets.

    Implement this class to add a named structure that configs can use as
    {"preset": {"name": ..., "input": {...}}}.
    """

    @abstractmethod
    def build(self, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
        """
        Build the structure.

        Args:
            input_data: Optional parameters provided by the run config

        Returns:
            PresetResult with coefficient strings in the expression language
        """
        pass


def import_preset(name: str) -> Any:
    """
    Import a preset module dynamically.

    Args:
        name: Module name relative to custom/structures

    Returns:
        The imported module
    """
    import importlib.util
    import sys
    from pathlib import Path

    base_dir = Path(__file__).parent
    module_file = base_dir / f"{name}.py"

    if not module_file.exists():
        raise FileNotFoundError(f"Structure preset not found: {module_file}")

    module_name = f"custom.structures.{name}"
    spec = importlib.util.spec_from_file_location(module_name, module_file)
    if spec is None or spec.loader is None:
        raise ImportError(f"Could not load module spec for {module_file}")

    module = importlib.util.module_from_spec(spec)
    sys.modules[module_name] = module
    spec.loader.exec_module(module)

    return module


def load_preset(name: str, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
    """
    Import a preset and call its build_structure function.

    Raises:
        FileNotFoundError: no module of that name
        AttributeError: the module has no build_structure function
        TypeError: build_structure did not return a PresetResult
    """
    module = import_preset(name)
    if not hasattr(module, "build_structure"):
        raise AttributeError(f"Preset module '{name}' has no build_structure function")
    result = module.build_structure(input_data or {})
    if not isinstance(result, PresetResult):
        raise TypeError(f"Preset '{name}' must return a PresetResult")
    return result
