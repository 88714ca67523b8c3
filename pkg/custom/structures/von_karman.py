"""
Von Karman structure alpha = p dp^dy + dx^dq.
"""

from typing import Any, Dict, Optional

from . import PresetResult, StructurePreset


class VonKarmanPreset(StructurePreset):
    """
    Pf = p, so the type changes across p = 0.

    The equation is usually written f_x f_xx - f_yy = 0, while pulling alpha
    back along a graph gives f_x f_xx + f_yy. The coefficients are kept as
    stated; the run report shows both equations side by side.
    """

    def build(self, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
        return PresetResult(
            coefficients={"A": "p", "B": "0", "C": "1", "D": "0", "E": "0"},
            stated_equation="f_x*f_xx - f_yy = 0",
            notes=[
                "Pf = p: elliptic for p > 0, hyperbolic for p < 0",
                "restrict the p bounds to one side of 0 before normalizing",
            ],
        )


preset = VonKarmanPreset()


def build_structure(input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
    return preset.build(input_data)
