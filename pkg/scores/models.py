from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from core.settings import DEFAULT_BOOTSTRAP_B, DEFAULT_SEED
from core.utils.error_handling_standerizer import (
    DuplicateSampleError,
    InconsistentPromptSetError,
    ProbabilityRangeError,
    ValidationError,
)


class LabelValue(str, Enum):
    UNSAFE = 'U'
    SAFE = 'S'

    @property
    def indicator(self) -> int:
        """U is the positive class"""
        return 1 if self is LabelValue.UNSAFE else 0

    @classmethod
    def parse(cls, raw) -> "LabelValue":
        """Accept "U"/"S" or the integers 1/0."""
        if isinstance(raw, bool):
            raise ValueError(f"Invalid label {raw!r}")
        if raw in (1, '1'):
            return cls.UNSAFE
        if raw in (0, '0'):
            return cls.SAFE
        return cls(raw)


class Split(str, Enum):
    TRAIN = 'train'
    TEST = 'test'
    EXTERNAL = 'external'


class PromptMeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    prompt_id: int = Field(ge=1)
    family: str = Field(min_length=1)


class RawLogitRecord(BaseModel):
    """Label-token logits for one sample under one prompt."""
    model_config = ConfigDict(frozen=True)

    logit_u: float
    logit_s: float
    sample_id: Optional[str] = None
    prompt_id: Optional[int] = None


class ProtocolConfig(BaseModel):
    """Protocol constants. Defaults are the published protocol values."""
    model_config = ConfigDict(frozen=True)

    epsilon: float = 1e-12
    ece_bins_default: int = 15
    threshold: float = 0.5
    trim_fraction: float = 0.1
    shrink_alphas: Tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 0.9)
    coverage_grid: Tuple[float, ...] = (1.00, 0.95, 0.90, 0.85, 0.80, 0.70, 0.60, 0.50)
    bootstrap_B: int = Field(default=DEFAULT_BOOTSTRAP_B, ge=1)
    bootstrap_seed: int = DEFAULT_SEED
    prevalence_targets: Tuple[Union[str, float], ...] = ("native", 0.25, 0.10, 0.05)

    @field_validator('epsilon')
    @classmethod
    def validate_epsilon(cls, value):
        if not 0 < value < 0.5:
            raise ValueError("epsilon must be in (0, 0.5)")
        return value

    @field_validator('ece_bins_default')
    @classmethod
    def validate_bins(cls, value):
        if value < 2:
            raise ValueError("ece_bins_default must be at least 2")
        return value

    @field_validator('threshold')
    @classmethod
    def validate_threshold(cls, value):
        if not 0 < value < 1:
            raise ValueError("threshold must be in (0, 1)")
        return value

    @field_validator('trim_fraction')
    @classmethod
    def validate_trim(cls, value):
        if not 0 <= value < 0.5:
            raise ValueError("trim_fraction must be in [0, 0.5)")
        return value

    @field_validator('shrink_alphas')
    @classmethod
    def validate_alphas(cls, value):
        if any(not 0 <= a <= 1 for a in value):
            raise ValueError("shrink alphas must be in [0, 1]")
        return value

    @field_validator('coverage_grid')
    @classmethod
    def validate_grid(cls, value):
        if not value or any(not 0 < c <= 1 for c in value):
            raise ValueError("coverage grid must lie within (0, 1]")
        if any(a <= b for a, b in zip(value, value[1:])):
            raise ValueError("coverage grid must be sorted strictly descending")
        if 1.0 not in value:
            raise ValueError("coverage grid must contain 1.0")
        return value

    @field_validator('prevalence_targets')
    @classmethod
    def validate_targets(cls, value):
        for target in value:
            if target == "native":
                continue
            if isinstance(target, str) or not 0 < float(target) < 1:
                raise ValueError(f"prevalence target {target!r} must be 'native' or in (0, 1)")
        return value


class PromptScoreMatrix:
    """
    Dense N x K matrix of unsafe probabilities with per-sample labels and split tags.

    Rows are samples in input order, columns are prompts ordered by prompt_id.
    Instances are immutable: arrays are flagged read-only and every operation
    returns a new matrix.
    """

    def __init__(
        self,
        sample_ids: Sequence[str],
        labels: Sequence[LabelValue],
        splits: Sequence[Split],
        prompts: Sequence[PromptMeta],
        p_unsafe,
        datasets: Optional[Sequence[str]] = None,
        models: Optional[Sequence[str]] = None,
    ):
        self.sample_ids: Tuple[str, ...] = tuple(sample_ids)
        self.labels: Tuple[LabelValue, ...] = tuple(LabelValue.parse(v) for v in labels)
        self.splits: Tuple[Split, ...] = tuple(Split(s) for s in splits)
        self.prompts: Tuple[PromptMeta, ...] = tuple(prompts)
        n = len(self.sample_ids)
        self.datasets: Tuple[str, ...] = tuple(datasets) if datasets is not None else ("default",) * n
        self.models: Tuple[str, ...] = tuple(models) if models is not None else ("default",) * n
        p = np.array(p_unsafe, dtype=float).reshape(n, len(self.prompts))
        p.flags.writeable = False
        self.p_unsafe = p
        self.clean()

    def clean(self):
        """Validate the matrix invariants."""
        n, k = self.p_unsafe.shape
        for name, values in (("labels", self.labels), ("splits", self.splits),
                             ("datasets", self.datasets), ("models", self.models)):
            if len(values) != n:
                raise ValidationError(f"{name} has length {len(values)}, expected {n}")
        if k != len(self.prompts):
            raise InconsistentPromptSetError(f"matrix has {k} columns but {len(self.prompts)} prompts")
        seen = set()
        for sample_id in self.sample_ids:
            if sample_id in seen:
                raise DuplicateSampleError(sample_id)
            seen.add(sample_id)
        prompt_ids = [meta.prompt_id for meta in self.prompts]
        if len(set(prompt_ids)) != len(prompt_ids):
            raise InconsistentPromptSetError(f"duplicate prompt ids {prompt_ids}")
        bad = ~((self.p_unsafe >= 0.0) & (self.p_unsafe <= 1.0))
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            raise ProbabilityRangeError(self.sample_ids[i], self.prompts[j].prompt_id,
                                        float(self.p_unsafe[i, j]))

    def __repr__(self):
        return f"PromptScoreMatrix(N={self.n_samples}, K={self.n_prompts})"

    def __eq__(self, other):
        if not isinstance(other, PromptScoreMatrix):
            return NotImplemented
        return (
            self.sample_ids == other.sample_ids
            and self.labels == other.labels
            and self.splits == other.splits
            and self.prompts == other.prompts
            and self.datasets == other.datasets
            and self.models == other.models
            and np.array_equal(self.p_unsafe, other.p_unsafe)
        )

    @property
    def n_samples(self) -> int:
        return self.p_unsafe.shape[0]

    @property
    def n_prompts(self) -> int:
        return self.p_unsafe.shape[1]

    @property
    def prompt_ids(self) -> List[int]:
        return [meta.prompt_id for meta in self.prompts]

    @property
    def families(self) -> List[str]:
        """Families in order of first appearance"""
        return list(dict.fromkeys(meta.family for meta in self.prompts))

    @property
    def y(self) -> np.ndarray:
        """Unsafe indicator per sample"""
        return np.array([label.indicator for label in self.labels], dtype=np.int64)

    def column(self, prompt_id: int) -> np.ndarray:
        """Single-prompt score vector"""
        return self.p_unsafe[:, self.prompt_ids.index(prompt_id)]

    def take_rows(self, index) -> "PromptScoreMatrix":
        index = np.asarray(index, dtype=np.int64)
        pick = lambda values: [values[i] for i in index]
        return PromptScoreMatrix(
            sample_ids=pick(self.sample_ids),
            labels=pick(self.labels),
            splits=pick(self.splits),
            prompts=self.prompts,
            p_unsafe=self.p_unsafe[index, :],
            datasets=pick(self.datasets),
            models=pick(self.models),
        )

    def take_columns(self, positions) -> "PromptScoreMatrix":
        positions = list(positions)
        return PromptScoreMatrix(
            sample_ids=self.sample_ids,
            labels=self.labels,
            splits=self.splits,
            prompts=[self.prompts[j] for j in positions],
            p_unsafe=self.p_unsafe[:, positions],
            datasets=self.datasets,
            models=self.models,
        )


def validate_prompt_ids(prompts: Sequence[PromptMeta]) -> None:
    """Prompt ids must be unique and contiguous from 1"""
    ids = sorted(meta.prompt_id for meta in prompts)
    if ids != list(range(1, len(ids) + 1)):
        raise InconsistentPromptSetError(f"prompt ids must be contiguous from 1, got {ids}")
