from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class RuleKind(str, Enum):
    MEAN_PROB = 'mean_prob'
    TRIMMED_MEAN = 'trimmed_mean'
    MEDIAN_PROB = 'median_prob'
    ENTROPY_WEIGHTED_MEAN = 'entropy_weighted_mean'
    MEAN_LOGIT = 'mean_logit'
    MEAN_LOGIT_UNIFORM = 'mean_logit_uniform'
    TRIMMED_LOGIT_MEAN = 'trimmed_logit_mean'
    MEDIAN_LOGIT = 'median_logit'
    BIAS_CORRECTED_LOGIT_MEAN = 'bias_corrected_logit_mean'
    BIAS_SCALE_LOGIT_MEAN = 'bias_scale_logit_mean'
    BIAS_SCALE_SHRINK = 'bias_scale_shrink'

    @property
    def needs_stats(self) -> bool:
        """Rules that use per-prompt logit statistics"""
        return self in (RuleKind.BIAS_CORRECTED_LOGIT_MEAN, RuleKind.BIAS_SCALE_LOGIT_MEAN,
                        RuleKind.BIAS_SCALE_SHRINK)


class AggregationRule(BaseModel):
    """One training-free rule mapping a row of K prompt scores to a single score."""
    model_config = ConfigDict(frozen=True)

    kind: RuleKind
    trim_fraction: float = Field(default=0.1, ge=0.0, lt=0.5)
    alpha: Optional[float] = Field(default=None, ge=0.0, le=1.0)

    @model_validator(mode='after')
    def validate_alpha(self):
        if self.kind is RuleKind.BIAS_SCALE_SHRINK and self.alpha is None:
            raise ValueError("bias_scale_shrink requires alpha")
        if self.kind is not RuleKind.BIAS_SCALE_SHRINK and self.alpha is not None:
            raise ValueError(f"alpha is only valid for bias_scale_shrink, not {self.kind.value}")
        return self

    @property
    def rule_id(self) -> str:
        """Stable snake_case identifier used in reports and on the command line"""
        if self.kind is RuleKind.BIAS_SCALE_SHRINK:
            return f"{self.kind.value}_{self.alpha:g}"
        return self.kind.value

    def __str__(self):
        return self.rule_id


class LogitCorrectionStats(BaseModel):
    """
    Per-prompt logit mean and population std, plus the pooled targets
    (mu_star = mean of mu_hat, sigma_star = mean of sigma_hat).
    """
    model_config = ConfigDict(frozen=True)

    prompt_ids: Tuple[int, ...]
    mu_hat: Tuple[float, ...]
    sigma_hat: Tuple[float, ...]
    mu_star: float
    sigma_star: float

    @model_validator(mode='after')
    def validate_lengths(self):
        k = len(self.prompt_ids)
        if len(self.mu_hat) != k or len(self.sigma_hat) != k:
            raise ValueError("mu_hat and sigma_hat must have one entry per prompt")
        if any(s < 0 for s in self.sigma_hat):
            raise ValueError("sigma_hat must be nonnegative")
        return self

    @property
    def mu_array(self) -> np.ndarray:
        return np.asarray(self.mu_hat, dtype=float)

    @property
    def sigma_array(self) -> np.ndarray:
        return np.asarray(self.sigma_hat, dtype=float)
