"""
Wave structure: A = 1, C = -1, Pf = -1.
"""

from typing import Any, Dict, Optional

from . import PresetResult, StructurePreset


class WavePreset(StructurePreset):

    def build(self, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
        return PresetResult(
            coefficients={"A": "1", "B": "0", "C": "-1", "D": "0", "E": "0"},
            stated_equation="f_xx - f_yy = 0",
            notes=["Pf = -1 everywhere; rho is an almost product structure"],
        )


preset = WavePreset()


def build_structure(input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
    return preset.build(input_data)
