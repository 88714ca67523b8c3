"""
Constant structures (a, b, -a, 0, 0) with a^2 + b^2 = 1.

Their Pfaffian is -a^2 - b^2 = -1, so J_rho, J_alpha and J_Omega pairwise
anticommute for eps1 = -1 and eps2 * eps3 = -1.
"""

import logging
import math
from typing import Any, Dict, Optional

from . import PresetResult, StructurePreset


def _number(value: float) -> str:
    return repr(float(value))


class AnticommutingFamilyPreset(StructurePreset):
    """
    Inputs:
        a: coefficient A (default 0.6)
        b: coefficient B; defaults to sqrt(1 - a^2)
    """

    def build(self, input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
        logger = logging.getLogger(__name__)
        input_data = input_data or {}

        a = float(input_data.get("a", 0.6))
        if "b" in input_data:
            b = float(input_data["b"])
        else:
            if abs(a) > 1.0:
                raise ValueError(f"Need |a| <= 1 to derive b = sqrt(1 - a^2), got a = {a}")
            b = math.sqrt(1.0 - a * a)

        notes = [f"Pf = {-(a * a + b * b):.12g}"]
        if abs(a * a + b * b - 1.0) > 1e-12:
            logger.warning(f"a^2 + b^2 = {a * a + b * b:.12g}; Pf is not -1 and the summands will not anticommute")
            notes.append("a^2 + b^2 != 1: anticommutativity with eps2 * eps3 = -1 fails")

        # written with 2(1 - A^2) in the middle, which is not 2B unless B = 1 - A^2
        stated = f"{a:g}*f_xx + {2.0 * (1.0 - a * a):g}*f_xy - {a:g}*f_yy = 0"
        return PresetResult(
            coefficients={"A": _number(a), "B": _number(b), "C": _number(-a), "D": "0", "E": "0"},
            stated_equation=stated,
            notes=notes,
        )


preset = AnticommutingFamilyPreset()


def build_structure(input_data: Optional[Dict[str, Any]] = None) -> PresetResult:
    return preset.build(input_data)
