from typing import List, Optional, Tuple

from core.utils.error_handling_standerizer import EmptySplitError, ValidationError
from core.utils.rng import make_rng
from core.utils.utility_files import get_logger
from metrics.models import primary_ece
from metrics.utils import ece, error_at_threshold, nll
from scores.models import ProtocolConfig, PromptScoreMatrix
from scores.utils import is_train_view
from .models import SelectionResult

logger = get_logger(__name__)


def selection_criteria(config: ProtocolConfig) -> Tuple[str, str, str]:
    return "nll", primary_ece(config).metric_id, "err05"


def _criteria_table(train_matrix: PromptScoreMatrix, config: ProtocolConfig):
    """Per prompt id: (nll, ece, err05) on the train rows"""
    if train_matrix.n_samples == 0:
        raise EmptySplitError("selection needs labeled train rows", split="train")
    if not is_train_view(train_matrix):
        raise ValidationError("prompt selection only accepts a train-split view", split="train")
    y = train_matrix.y
    spec = primary_ece(config)
    table = {}
    for j, pid in enumerate(train_matrix.prompt_ids):
        p = train_matrix.p_unsafe[:, j]
        table[pid] = (
            nll(p, y, eps=config.epsilon),
            ece(p, y, spec),
            error_at_threshold(p, y, config.threshold),
        )
    return table


def select_prompt(train_matrix: PromptScoreMatrix, config: Optional[ProtocolConfig] = None) -> SelectionResult:
    """
    Lock the single prompt with minimum train NLL.
    Exact ties fall through to the configured ECE, then error@threshold, then the smallest prompt id.
    """
    config = config or ProtocolConfig()
    table = _criteria_table(train_matrix, config)
    survivors = sorted(table)
    trail = []
    for position, name in enumerate(selection_criteria(config)):
        best = min(table[pid][position] for pid in survivors)
        survivors = [pid for pid in survivors if table[pid][position] == best]
        trail.append((name, survivors))
        if len(survivors) == 1:
            break
    if len(survivors) > 1:
        survivors = [min(survivors)]
        trail.append(("prompt_id", survivors))

    result = SelectionResult(selected_prompt_id=survivors[0], criteria_trail=trail)
    logger.info(f"[SELECT] prompt {result.selected_prompt_id} after {[name for name, _ in trail]}")
    return result


def rank_prompts(train_matrix: PromptScoreMatrix, config: Optional[ProtocolConfig] = None) -> List[int]:
    """All prompt ids ordered by the selection criteria; the first is the selected prompt."""
    config = config or ProtocolConfig()
    table = _criteria_table(train_matrix, config)
    return sorted(table, key=lambda pid: (*table[pid], pid))


def locked_random_prompt(seed: int, k: int) -> int:
    """Uniform draw from 1..K, fixed by seed."""
    if k < 1:
        raise ValidationError(f"need at least one prompt, got K={k}")
    return int(make_rng(seed).integers(1, k + 1))
