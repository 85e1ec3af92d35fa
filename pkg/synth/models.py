from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.settings import DEFAULT_SEED


class SynthConfig(BaseModel):
    """
    Synthetic prompt-score generator settings.

    Latent logit z ~ N(0, latent_logit_std^2), label y ~ Bernoulli(sigmoid(z)),
    prompt k sees a_k + b_k * z + noise with a_k ~ N(0, bias_std^2) and
    b_k ~ U(scale_range).
    """
    model_config = ConfigDict(frozen=True)

    n_samples: int = Field(default=1000, ge=1)
    k_prompts: int = Field(default=15, ge=1)
    latent_logit_std: float = Field(default=2.0, gt=0)
    per_prompt_bias_std: float = Field(default=1.0, ge=0)
    per_prompt_scale_range: Tuple[float, float] = (0.5, 2.0)
    noise_std: float = Field(default=0.5, ge=0)
    seed: int = DEFAULT_SEED
    train_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    dataset: str = "synth"
    model: str = "synthetic"
    families: Tuple[str, ...] = ("A", "B", "C")

    @field_validator('per_prompt_scale_range')
    @classmethod
    def validate_scale_range(cls, value):
        lo, hi = value
        if not 0 < lo <= hi:
            raise ValueError("scale range needs 0 < lo <= hi")
        return value

    @field_validator('families')
    @classmethod
    def validate_families(cls, value):
        if not value or len(set(value)) != len(value):
            raise ValueError("families must be non-empty and unique")
        return value


class SynthTruth(BaseModel):
    """Ground truth behind a generated matrix."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    latent: np.ndarray
    bias: np.ndarray
    scale: np.ndarray
    prompt_logits: np.ndarray
