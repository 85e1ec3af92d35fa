from typing import Dict, Hashable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from aggregation.models import AggregationRule, LogitCorrectionStats
from aggregation.utils import aggregate_rules
from core.utils.error_handling_standerizer import PromptCalError, ValidationError
from core.utils.utility_files import get_logger
from metrics.utils import metric_value
from scores.models import ProtocolConfig, PromptScoreMatrix
from .models import WinCountTable

logger = get_logger(__name__)


def pair_label(key: Hashable) -> str:
    """'dataset/model' for tuple keys"""
    if isinstance(key, tuple):
        return "/".join(str(part) for part in key)
    return str(key)


def win_counts(table: pd.DataFrame, lower_is_better: bool = True, metric: str = "nll") -> WinCountTable:
    """
    Rows are evaluation pairs, columns are methods.
    Rows with a missing value are excluded. Ranks use the average-rank convention.
    """
    methods = [str(m) for m in table.columns]
    complete = table.dropna(axis=0, how='any')
    excluded = [str(label) for label in table.index.difference(complete.index, sort=False)]
    for label in excluded:
        logger.warning(f"[SWEEP] pair '{label}' has missing {metric} values; excluded")

    wins = {m: 0 for m in methods}
    for _, row in complete.iterrows():
        best = row.min() if lower_is_better else row.max()
        for method, value in row.items():
            if value == best:
                wins[str(method)] += 1
    if len(complete):
        ranks = complete.rank(axis=1, method='average', ascending=lower_is_better).mean(axis=0)
        avg_rank = {str(m): float(ranks[m]) for m in complete.columns}
    else:
        avg_rank = {m: float('nan') for m in methods}
    return WinCountTable(
        metric=metric,
        methods=methods,
        wins=wins,
        avg_rank=avg_rank,
        n_pairs=len(complete),
        excluded=excluded,
        values=table,
    )


def sweep_rules(
    matrices: Mapping[Hashable, PromptScoreMatrix],
    rules: Sequence[AggregationRule],
    stats: Optional[Mapping[Hashable, LogitCorrectionStats]] = None,
    config: Optional[ProtocolConfig] = None,
    metric: str = "nll",
) -> WinCountTable:
    """
    Score every rule on every labeled evaluation pair and count NLL wins.
    Correction stats are taken from `stats[pair]` when given, otherwise fitted on the pair.
    """
    config = config or ProtocolConfig()
    if len(matrices) < 1:
        raise ValidationError("rule sweep needs at least one evaluation pair")
    if len(rules) < 2:
        raise ValidationError("rule sweep needs at least two rules")

    rows: Dict[str, Dict[str, float]] = {}
    for key, matrix in matrices.items():
        label = pair_label(key)
        try:
            scores = aggregate_rules(matrix, rules, (stats or {}).get(key), config.epsilon)
            rows[label] = {rid: metric_value(metric, s, matrix.y, config=config) for rid, s in scores.items()}
        except PromptCalError as e:
            logger.warning(f"[SWEEP] pair '{label}' excluded: {e.message}")
            rows[label] = {rule.rule_id: np.nan for rule in rules}

    table = pd.DataFrame.from_dict(rows, orient='index', columns=[rule.rule_id for rule in rules])
    result = win_counts(table, lower_is_better=True, metric=metric)
    logger.info(f"[SWEEP] {len(rules)} rules over {result.n_pairs} pairs")
    return result
