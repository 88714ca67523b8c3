"""
Exception hierarchy for the Monge-Ampere geometry engine.

Every error carries the structured data the report needs (offsets, witness
points, gate names), so the pipeline can turn it into a step error instead of
a crash.
"""

from typing import Any, FrozenSet, Iterable, List, Optional, Sequence


class MageomError(Exception):
    """Base class for all engine errors."""

    kind = "error"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "message": str(self)}


class ExprError(MageomError):
    kind = "expression_error"


class ParseError(ExprError):
    """Syntax error at a byte offset of the source text."""

    kind = "parse_error"

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()) -> None:
        self.offset = offset
        self.expected: FrozenSet[str] = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["offset"] = self.offset
        data["expected"] = sorted(self.expected)
        return data


class UnknownIdentifierError(ParseError):
    kind = "unknown_identifier"

    def __init__(self, name: str, offset: int) -> None:
        self.name = name
        super().__init__(f"Unknown identifier '{name}'", offset)


class NonIntegerExponentError(ParseError):
    kind = "non_integer_exponent"

    def __init__(self, offset: int) -> None:
        super().__init__("Exponent must be an integer constant", offset)


class DomainError(ExprError):
    """Evaluation left the domain of a function (ln, sqrt, division, overflow)."""

    kind = "domain_error"

    def __init__(self, subexpression: Any, point: Optional[Sequence[float]] = None, reason: str = "") -> None:
        self.subexpression = subexpression
        self.point = tuple(point) if point is not None else None
        super().__init__(f"Domain error in '{subexpression}' at {self.point}{': ' + reason if reason else ''}")


class NonDifferentiableError(ExprError):
    kind = "non_differentiable"

    def __init__(self, node: Any) -> None:
        self.node = node
        super().__init__(
            f"Cannot differentiate through non-smooth node '{node}'; "
            "restrict to a sign-definite region and rewrite |.| as +/-(.)"
        )


class InconclusiveError(ExprError):
    """Every sample point of a zero test hit a domain error."""

    kind = "inconclusive"

    def __init__(self, skipped: List[Sequence[float]]) -> None:
        self.skipped = [tuple(pt) for pt in skipped]
        super().__init__(f"Zero test inconclusive: all {len(self.skipped)} sample points were outside the domain")


class SamplingError(MageomError):
    kind = "sampling_error"

    def __init__(self, message: str, draws: int) -> None:
        self.draws = draws
        super().__init__(message)


class WitnessError(MageomError):
    """Base for errors that point at a concrete phase-space point."""

    def __init__(self, message: str, witness: Optional[Sequence[float]] = None) -> None:
        self.witness = tuple(witness) if witness is not None else None
        super().__init__(message)

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["witness"] = list(self.witness) if self.witness is not None else None
        return data


class NotEffectiveError(WitnessError):
    kind = "not_effective"


class SignValidationError(WitnessError):
    kind = "sign_validation"


class DegeneratePointError(WitnessError):
    kind = "degenerate_point"

    def __init__(self, point: Sequence[float], pfaffian: float, floor: float) -> None:
        self.pfaffian = pfaffian
        self.floor = floor
        super().__init__(f"|Pf| = {abs(pfaffian):.3e} below floor {floor:.1e} at {tuple(point)}", point)


class RescaleError(WitnessError):
    kind = "rescale_error"


class ResidualInputError(MageomError):
    kind = "residual_input"


class SingularMatrixError(MageomError):
    kind = "singular_matrix"


class UnclassifiableError(MageomError):
    kind = "unclassifiable"


class NotIsotropicError(MageomError):
    kind = "not_isotropic"


class FamilyGateError(MageomError):
    """A precondition of the quadric family builder failed."""

    kind = "family_gate"

    def __init__(self, gate: str, message: str) -> None:
        self.gate = gate
        super().__init__(f"{gate}: {message}")

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["gate"] = self.gate
        return data


class ConfigError(MageomError):
    """Config file could not be read as a valid engine configuration."""

    kind = "config_error"

    def __init__(self, message: str, location: str = "", offset: Optional[int] = None) -> None:
        self.location = location
        self.offset = offset
        super().__init__(f"{location}: {message}" if location else message)

    def to_dict(self) -> dict:
        data = super().to_dict()
        data["location"] = self.location
        if self.offset is not None:
            data["offset"] = self.offset
        return data
