from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SelectionResult(BaseModel):
    """Locked single-prompt choice and the criteria that produced it."""
    model_config = ConfigDict(frozen=True)

    selected_prompt_id: int
    criteria_trail: List[Tuple[str, List[int]]]

    @model_validator(mode='after')
    def validate_trail(self):
        if not self.criteria_trail or self.criteria_trail[-1][1] != [self.selected_prompt_id]:
            raise ValueError("criteria trail must end with the selected prompt as sole survivor")
        return self


class CalibratorKind(str, Enum):
    TEMPERATURE = 'temperature'
    PLATT = 'platt'
    ISOTONIC = 'isotonic'


class Calibrator(BaseModel):
    """
    A fitted monotone score map.

    temperature: sigmoid(logit(p) / T)
    platt:       sigmoid(a * logit(p) + b)
    isotonic:    left-continuous step function over ascending knots
    """
    model_config = ConfigDict(frozen=True)

    kind: CalibratorKind
    temperature: Optional[float] = Field(default=None, gt=0)
    a: Optional[float] = None
    b: Optional[float] = None
    knots: Optional[Tuple[float, ...]] = None
    values: Optional[Tuple[float, ...]] = None
    iterations: Optional[int] = None

    @model_validator(mode='after')
    def validate_parameters(self):
        if self.kind is CalibratorKind.TEMPERATURE and self.temperature is None:
            raise ValueError("temperature calibrator needs T")
        if self.kind is CalibratorKind.PLATT and (self.a is None or self.b is None):
            raise ValueError("platt calibrator needs a and b")
        if self.kind is CalibratorKind.ISOTONIC:
            if not self.knots or self.values is None or len(self.knots) != len(self.values):
                raise ValueError("isotonic calibrator needs matching knots and values")
            if any(k1 >= k2 for k1, k2 in zip(self.knots, self.knots[1:])):
                raise ValueError("isotonic knots must be strictly ascending")
            if any(v1 > v2 for v1, v2 in zip(self.values, self.values[1:])):
                raise ValueError("isotonic values must be nondecreasing")
            if any(not 0.0 <= v <= 1.0 for v in self.values):
                raise ValueError("isotonic values must lie in [0, 1]")
        return self

    @property
    def inverted(self) -> bool:
        """A Platt fit with negative slope reverses the score order"""
        return self.kind is CalibratorKind.PLATT and self.a < 0

    def to_json(self) -> Dict[str, Any]:
        if self.kind is CalibratorKind.TEMPERATURE:
            return {"kind": self.kind.value, "T": self.temperature}
        if self.kind is CalibratorKind.PLATT:
            return {"kind": self.kind.value, "a": self.a, "b": self.b}
        return {"kind": self.kind.value, "knots": list(self.knots), "values": list(self.values)}
