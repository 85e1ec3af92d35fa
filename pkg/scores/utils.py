import math
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core.settings import PROMPT_TEMPLATES_PATH
from core.utils.utility_files import read_json
from core.utils.error_handling_standerizer import (
    EmptySplitError,
    InconsistentPromptSetError,
    InvalidLogitError,
    UnknownFamilyError,
)
from .models import PromptMeta, PromptScoreMatrix, RawLogitRecord, Split


# --- Probability extraction from label logits ---
def subset_normalize(rec: RawLogitRecord) -> float:
    """
    Unsafe probability from the two label-token logits: softmax over {U, S} only.
    The larger logit is subtracted first so neither exponential can overflow.
    """
    if not (math.isfinite(rec.logit_u) and math.isfinite(rec.logit_s)):
        raise InvalidLogitError(
            f"non-finite logits (logit_u={rec.logit_u}, logit_s={rec.logit_s})",
            sample_id=rec.sample_id, prompt_id=rec.prompt_id,
        )
    top = max(rec.logit_u, rec.logit_s)
    e_u = math.exp(rec.logit_u - top)
    e_s = math.exp(rec.logit_s - top)
    return e_u / (e_u + e_s)


# --- Matrix views ---
def restrict_family(matrix: PromptScoreMatrix, family: str) -> PromptScoreMatrix:
    """Columns of one prompt family; rows, labels and sample order unchanged."""
    positions = [j for j, meta in enumerate(matrix.prompts) if meta.family == family]
    if not positions:
        raise UnknownFamilyError(f"family '{family}' not in {matrix.families}", family=family)
    return matrix.take_columns(positions)


def split_view(matrix: PromptScoreMatrix, split) -> PromptScoreMatrix:
    """Rows tagged with `split`, in input order."""
    split = Split(split)
    rows = [i for i, tag in enumerate(matrix.splits) if tag is split]
    if not rows:
        raise EmptySplitError(f"no samples in split '{split.value}'", split=split.value)
    return matrix.take_rows(rows)


def select_columns(matrix: PromptScoreMatrix, prompt_ids: Sequence[int]) -> PromptScoreMatrix:
    """Columns for the given prompt ids, in the given order."""
    ids = matrix.prompt_ids
    missing = [pid for pid in prompt_ids if pid not in ids]
    if missing:
        raise InconsistentPromptSetError(f"prompt ids {missing} not in matrix")
    return matrix.take_columns([ids.index(pid) for pid in prompt_ids])


def is_train_view(matrix: PromptScoreMatrix) -> bool:
    return matrix.n_samples > 0 and all(tag is Split.TRAIN for tag in matrix.splits)


def evaluation_pairs(matrix: PromptScoreMatrix) -> Dict[Tuple[str, str], PromptScoreMatrix]:
    """
    Group the non-train rows by (dataset, model).
    Keys are ordered by first appearance so downstream tables are deterministic.
    """
    groups: "OrderedDict[Tuple[str, str], List[int]]" = OrderedDict()
    for i, tag in enumerate(matrix.splits):
        if tag is Split.TRAIN:
            continue
        groups.setdefault((matrix.datasets[i], matrix.models[i]), []).append(i)
    return OrderedDict((key, matrix.take_rows(rows)) for key, rows in groups.items())


def train_view_for_model(matrix: PromptScoreMatrix, model: str) -> PromptScoreMatrix:
    """Train rows of one model, across every dataset it was scored on."""
    rows = [i for i, tag in enumerate(matrix.splits)
            if tag is Split.TRAIN and matrix.models[i] == model]
    if not rows:
        raise EmptySplitError(f"no train samples for model '{model}'", split="train", model=model)
    return matrix.take_rows(rows)


# --- Load prompt_templates.json and provide accessors ---
def load_prompt_templates() -> Dict:
    """Load the prompt template metadata shipped with the toolkit"""
    return read_json(PROMPT_TEMPLATES_PATH)


def default_prompts() -> List[PromptMeta]:
    """The 15 reference prompts as PromptMeta, ids 1..15 in family order"""
    templates = load_prompt_templates()
    return [PromptMeta(prompt_id=t["prompt_id"], family=t["family"]) for t in templates["prompts"]]
