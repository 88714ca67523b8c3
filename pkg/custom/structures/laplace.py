"""
Laplace structure alpha = -dx^dq + dy^dp.
"""

from typing import Any, Dict, Optional

from . import PresetResult, StructurePreset


class LaplacePreset(StructurePreset):
    """Elliptic, Pf = 1, closed; the model integrable elliptic structure."""

    def build(self, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
        return PresetResult(
            coefficients={"A": "-1", "B": "0", "C": "-1", "D": "0", "E": "0"},
            stated_equation="f_xx + f_yy = 0",
            notes=["Pf = 1 everywhere", "pullback along a graph gives (-f_xx - f_yy) dx^dy"],
        )


preset = LaplacePreset()


def build_structure(input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
    return preset.build(input_data)
