from typing import Iterable, Iterator, List, Optional, Union

import orjson
import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.utils.error_handling_standerizer import (
    DuplicateSampleError,
    InconsistentPromptSetError,
    MalformedRecordError,
    MissingLabelError,
    ProbabilityRangeError,
)
from core.utils.utility_files import get_logger
from .models import LabelValue, PromptMeta, PromptScoreMatrix, RawLogitRecord, Split, validate_prompt_ids
from .utils import subset_normalize

logger = get_logger(__name__)


class ScoreEntrySerializer(BaseModel):
    """One prompt's score for a sample: a probability or a pair of label logits"""
    model_config = ConfigDict(extra='forbid')

    prompt_id: int = Field(ge=1)
    family: str = Field(min_length=1)
    p_unsafe: Optional[float] = None
    logit_u: Optional[float] = None
    logit_s: Optional[float] = None

    @model_validator(mode='after')
    def validate_score_source(self):
        has_logits = self.logit_u is not None or self.logit_s is not None
        if has_logits and (self.logit_u is None or self.logit_s is None):
            raise ValueError("logit_u and logit_s must be given together")
        if not has_logits and self.p_unsafe is None:
            raise ValueError("either p_unsafe or logit_u/logit_s is required")
        return self

    @property
    def has_logits(self) -> bool:
        return self.logit_u is not None


class ScoreRecordSerializer(BaseModel):
    """One JSONL line: a sample with its label, split and per-prompt scores"""
    model_config = ConfigDict(extra='forbid')

    sample_id: str = Field(min_length=1)
    dataset: str = "default"
    model: str = "default"
    split: Split
    label: Union[str, int]
    scores: List[ScoreEntrySerializer] = Field(min_length=1)

    @field_validator('label')
    @classmethod
    def validate_label(cls, value):
        """Labels are "U"/"S"; 1/0 accepted for interoperability"""
        try:
            return LabelValue.parse(value)
        except ValueError:
            raise ValueError(f"label must be 'U' or 'S' (or 1/0), got {value!r}")

    @field_validator('scores')
    @classmethod
    def validate_unique_prompts(cls, value):
        ids = [entry.prompt_id for entry in value]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate prompt ids in scores: {ids}")
        return value


def _first_error(exc: pydantic.ValidationError) -> str:
    err = exc.errors()[0]
    location = ".".join(str(part) for part in err.get("loc", ()))
    return f"{location}: {err.get('msg')}" if location else err.get("msg", str(exc))


def parse_scores_jsonl(lines: Iterable[str]) -> PromptScoreMatrix:
    """
    Parse a stream of JSONL score records into a validated dense matrix.

    Records may carry p_unsafe directly or label logits; when both are present the
    logits are re-normalized and the saved probability is ignored. Every record must
    cover the same prompt set (same ids and families) as the first one.
    """
    sample_ids, labels, splits, datasets, models, rows = [], [], [], [], [], []
    prompts: Optional[List[PromptMeta]] = None
    seen = set()
    renormalized = 0

    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = orjson.loads(line)
        except orjson.JSONDecodeError as e:
            raise MalformedRecordError(f"invalid JSON ({e})", line_number)
        if not isinstance(raw, dict):
            raise MalformedRecordError("record must be a JSON object", line_number)
        if raw.get("label") is None:
            raise MissingLabelError(f"line {line_number}: sample '{raw.get('sample_id')}' has no label",
                                    line_number=line_number, sample_id=raw.get('sample_id'))
        try:
            record = ScoreRecordSerializer.model_validate(raw)
        except pydantic.ValidationError as e:
            raise MalformedRecordError(_first_error(e), line_number)

        if record.sample_id in seen:
            raise DuplicateSampleError(record.sample_id, line_number)
        seen.add(record.sample_id)

        entries = sorted(record.scores, key=lambda entry: entry.prompt_id)
        record_prompts = [PromptMeta(prompt_id=e.prompt_id, family=e.family) for e in entries]
        if prompts is None:
            validate_prompt_ids(record_prompts)
            prompts = record_prompts
        elif record_prompts != prompts:
            raise InconsistentPromptSetError(
                f"line {line_number}: sample '{record.sample_id}' has prompts "
                f"{[(m.prompt_id, m.family) for m in record_prompts]}, expected "
                f"{[(m.prompt_id, m.family) for m in prompts]}",
                line_number=line_number, sample_id=record.sample_id,
            )

        row = []
        for entry in entries:
            if entry.has_logits:
                value = subset_normalize(RawLogitRecord(
                    logit_u=entry.logit_u, logit_s=entry.logit_s,
                    sample_id=record.sample_id, prompt_id=entry.prompt_id,
                ))
                renormalized += entry.p_unsafe is not None
            else:
                value = entry.p_unsafe
                if not 0.0 <= value <= 1.0:
                    raise ProbabilityRangeError(record.sample_id, entry.prompt_id, value)
            row.append(value)

        sample_ids.append(record.sample_id)
        labels.append(record.label)
        splits.append(record.split)
        datasets.append(record.dataset)
        models.append(record.model)
        rows.append(row)

    if prompts is None:
        prompts = []
    if renormalized:
        logger.info(f"[PARSE] {renormalized} scores carried both forms; logits were used")
    logger.debug(f"[PARSE] {len(rows)} samples x {len(prompts)} prompts")
    return PromptScoreMatrix(
        sample_ids=sample_ids,
        labels=labels,
        splits=splits,
        prompts=prompts,
        p_unsafe=rows,
        datasets=datasets,
        models=models,
    )


def serialize_scores_jsonl(matrix: PromptScoreMatrix) -> Iterator[str]:
    """Canonical JSONL lines for a matrix: fixed field order, string labels, probabilities only."""
    for i, sample_id in enumerate(matrix.sample_ids):
        record = {
            "sample_id": sample_id,
            "dataset": matrix.datasets[i],
            "model": matrix.models[i],
            "split": matrix.splits[i].value,
            "label": matrix.labels[i].value,
            "scores": [
                {"prompt_id": meta.prompt_id, "family": meta.family,
                 "p_unsafe": float(matrix.p_unsafe[i, j])}
                for j, meta in enumerate(matrix.prompts)
            ],
        }
        yield orjson.dumps(record).decode("utf-8")
