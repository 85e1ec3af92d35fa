from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator


class WinCountTable(BaseModel):
    """
    Per-method win counts and average ranks over evaluation pairs.
    A win is the best metric value on a pair; exact ties share the win.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    metric: str
    methods: List[str]
    wins: Dict[str, int]
    avg_rank: Dict[str, float]
    n_pairs: int
    excluded: List[str] = []
    values: Optional[pd.DataFrame] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "method": self.methods,
            "metric": self.metric,
            "wins": [self.wins[m] for m in self.methods],
            "n_pairs": self.n_pairs,
            "avg_rank": [self.avg_rank[m] for m in self.methods],
        })


class SignalKind(str, Enum):
    STD_PU = 'std_pu'
    ENTROPY_MEAN = 'entropy_mean'
    MARGIN_SINGLE = 'margin_single'


class UncertaintySignal(BaseModel):
    """Per-sample uncertainty; higher means less certain."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: SignalKind
    values: np.ndarray


RISK_METRICS = ("error", "nll", "ece")


class CoverageCurve(BaseModel):
    """Retained-set risk at every evaluated coverage, grid in descending order."""
    model_config = ConfigDict(frozen=True)

    grid: Tuple[float, ...]
    sizes: Tuple[int, ...]
    risks: Dict[str, Tuple[float, ...]]
    signal: Optional[SignalKind] = None

    @model_validator(mode='after')
    def validate_lengths(self):
        if len(self.sizes) != len(self.grid):
            raise ValueError("one retained size per grid point")
        for name, values in self.risks.items():
            if len(values) != len(self.grid):
                raise ValueError(f"risk '{name}' needs one value per grid point")
            if not all(np.isfinite(values)):
                raise ValueError(f"risk '{name}' is not finite everywhere")
        return self

    def risk_at(self, metric: str, coverage: float) -> float:
        position = next(i for i, c in enumerate(self.grid) if abs(c - coverage) < 1e-12)
        return self.risks[metric][position]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"coverage": self.grid, "retained": self.sizes})
        for name, values in self.risks.items():
            frame[name] = values
        return frame


class BootstrapResult(BaseModel):
    """
    Paired per-sample bootstrap of a metric difference.
    Delta is baseline minus candidate, so positive means the candidate is better.
    """
    model_config = ConfigDict(frozen=True)

    metric: str
    point_delta: float
    ci_low: float
    ci_high: float
    p_two_sided: float = Field(ge=0.0, le=1.0)
    B: int = Field(ge=1)
    seed: int
    generator: str
    delta_convention: str = "baseline_minus_candidate"
    target_prevalence: Optional[Union[str, float]] = None
    weights_refit: bool = False

    @model_validator(mode='after')
    def validate_interval(self):
        if self.ci_low > self.ci_high:
            raise ValueError("ci_low must not exceed ci_high")
        return self

    def as_row(self) -> Dict:
        row = {"metric": self.metric}
        if self.target_prevalence is not None:
            target = self.target_prevalence
            row["target_prevalence"] = target if isinstance(target, str) else f"{target:g}"
            row["weights_refit"] = self.weights_refit
        return {
            **row,
            "point_delta": self.point_delta,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_two_sided": self.p_two_sided,
            "B": self.B,
            "seed": self.seed,
        }


class PrevalenceSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    target_pi: Union[str, float]
    weights: np.ndarray

    @property
    def is_native(self) -> bool:
        return self.target_pi == "native"
