from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from scores.models import ProtocolConfig


class BinScheme(str, Enum):
    EQUAL_WIDTH = 'equal_width'
    EQUAL_MASS = 'equal_mass'


class EceSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    bins: int = Field(default=15, ge=2)
    scheme: BinScheme = BinScheme.EQUAL_WIDTH

    @property
    def metric_id(self) -> str:
        """ece_w15, ece_m15, ..."""
        tag = 'w' if self.scheme is BinScheme.EQUAL_WIDTH else 'm'
        return f"ece_{tag}{self.bins}"

    @classmethod
    def from_id(cls, metric_id: str) -> "EceSpec":
        if not metric_id.startswith("ece_") or metric_id[4:5] not in ("w", "m"):
            raise ValueError(f"not an ECE metric id: {metric_id!r}")
        scheme = BinScheme.EQUAL_WIDTH if metric_id[4] == "w" else BinScheme.EQUAL_MASS
        return cls(bins=int(metric_id[5:]), scheme=scheme)


ECE_W15 = EceSpec(bins=15, scheme=BinScheme.EQUAL_WIDTH)

# Binning variants reported by the robustness table
ECE_VARIANTS = (
    EceSpec(bins=10, scheme=BinScheme.EQUAL_WIDTH),
    ECE_W15,
    EceSpec(bins=20, scheme=BinScheme.EQUAL_WIDTH),
    EceSpec(bins=15, scheme=BinScheme.EQUAL_MASS),
)


def primary_ece(config: Optional[ProtocolConfig] = None) -> EceSpec:
    """Equal-width ECE at the configured bin count (selection, bootstrap, selective risk)"""
    config = config or ProtocolConfig()
    return EceSpec(bins=config.ece_bins_default, scheme=BinScheme.EQUAL_WIDTH)


def report_ece_specs(config: Optional[ProtocolConfig] = None) -> Tuple[EceSpec, ...]:
    """The robustness variants plus the configured ECE when it is not one of them"""
    primary = primary_ece(config)
    return ECE_VARIANTS if primary in ECE_VARIANTS else (primary, *ECE_VARIANTS)


class StatKind(str, Enum):
    MISTAKE = 'mistake'
    DISAGREEMENT = 'disagreement'


class EvalReport(BaseModel):
    """Metric bundle for one score vector. Undefined ranking metrics are None and listed in `undefined`."""
    model_config = ConfigDict(frozen=True)

    nll: float = Field(ge=0.0)
    ece: Dict[str, float]
    auroc: Optional[float] = None
    auprc: Optional[float] = None
    error_at_threshold: float
    n: int = Field(ge=1)
    weighted: bool = False
    undefined: List[str] = []

    def as_row(self) -> Dict[str, Optional[float]]:
        """Flat mapping keyed by report metric ids"""
        row = {"nll": self.nll}
        row.update(self.ece)
        row.update({"auroc": self.auroc, "auprc": self.auprc, "err05": self.error_at_threshold})
        return row


class DecileGap(BaseModel):
    model_config = ConfigDict(frozen=True)

    stat: StatKind
    d1: float
    d10: float
    gap: float


class FragilityProfile(BaseModel):
    """Per-sample cross-prompt diagnostics."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mu: np.ndarray
    sigma: np.ndarray
    mistake_rate: np.ndarray
    disagreement_rate: np.ndarray
    decile_summary: Optional[pd.DataFrame] = None

    @model_validator(mode='after')
    def validate_shapes(self):
        n = len(self.mu)
        for name in ("sigma", "mistake_rate", "disagreement_rate"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from mu")
        if (np.asarray(self.sigma) < 0).any():
            raise ValueError("sigma must be nonnegative")
        return self

    @property
    def n_samples(self) -> int:
        return len(self.mu)

    def stat(self, kind) -> np.ndarray:
        kind = StatKind(kind)
        return self.mistake_rate if kind is StatKind.MISTAKE else self.disagreement_rate
