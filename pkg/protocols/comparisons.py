from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from aggregation.models import AggregationRule, RuleKind
from aggregation.utils import aggregate, top_k_mean
from calibration.selection import rank_prompts, select_prompt
from core.utils.error_handling_standerizer import InsufficientDataError
from metrics.fragility import decile_gaps, fragility_profile
from metrics.models import ECE_VARIANTS, StatKind, primary_ece
from metrics.utils import ece, lower_is_better, metric_value
from scores.models import ProtocolConfig, PromptScoreMatrix
from scores.utils import restrict_family

MEAN_PROB = AggregationRule(kind=RuleKind.MEAN_PROB)


def _improvement(reference: float, method: float, lower: bool) -> float:
    """Positive when `method` beats `reference`"""
    return reference - method if lower else method - reference


def head_to_head(values: pd.DataFrame, reference: str, methods: Sequence[str], metric: str = "nll") -> pd.DataFrame:
    """
    `values` has one row per evaluation pair and one column per method.
    Per method: wins W (strictly better than the reference), pairs N and the average improvement.
    """
    lower = lower_is_better(metric)
    rows = []
    for method in methods:
        both = values[[reference, method]].dropna()
        gain = np.array([_improvement(r, m, lower) for r, m in both.itertuples(index=False)])
        rows.append({
            "method": method,
            "reference": reference,
            "metric": metric,
            "wins": int((gain > 0).sum()),
            "n_pairs": len(both),
            "avg_delta": float(gain.mean()) if len(gain) else float('nan'),
        })
    return pd.DataFrame(rows)


def single_prompt_distribution(matrix: PromptScoreMatrix, metric: str = "nll",
                               config: Optional[ProtocolConfig] = None) -> Dict[str, float]:
    """Min/median/mean/max of a metric over the K single prompts, next to the mean ensemble."""
    config = config or ProtocolConfig()
    y = matrix.y
    singles = np.array([metric_value(metric, matrix.p_unsafe[:, j], y, config=config)
                        for j in range(matrix.n_prompts)])
    ensemble = metric_value(metric, aggregate(matrix, MEAN_PROB), y, config=config)
    beaten = singles > ensemble if lower_is_better(metric) else singles < ensemble
    return {
        "metric": metric,
        "single_min": float(singles.min()),
        "single_median": float(np.median(singles)),
        "single_mean": float(singles.mean()),
        "single_max": float(singles.max()),
        "mean_ensemble": float(ensemble),
        "prompts_beaten": int(beaten.sum()),
        "k": matrix.n_prompts,
    }


def top_k_frontier(train_matrix: PromptScoreMatrix, eval_matrix: PromptScoreMatrix,
                   metric: str = "nll", config: Optional[ProtocolConfig] = None) -> pd.DataFrame:
    """Metric of the top-k mean ensemble for k = 1..K, prompts ranked on train."""
    config = config or ProtocolConfig()
    ranking = rank_prompts(train_matrix, config)
    rows = []
    for k in range(1, len(ranking) + 1):
        scores = top_k_mean(eval_matrix, ranking, k)
        rows.append({
            "k": k,
            "added_prompt": ranking[k - 1],
            metric: metric_value(metric, scores, eval_matrix.y, config=config),
        })
    return pd.DataFrame(rows)


def ece_robustness(baseline, candidate, labels) -> List[Dict[str, float]]:
    """Baseline minus candidate ECE under every binning variant."""
    rows = []
    for spec in ECE_VARIANTS:
        a = ece(baseline, labels, spec)
        b = ece(candidate, labels, spec)
        rows.append({"ece_variant": spec.metric_id, "baseline": a, "candidate": b, "delta": a - b})
    return rows


def family_ablation(train_matrix: PromptScoreMatrix, eval_matrix: PromptScoreMatrix,
                    config: Optional[ProtocolConfig] = None) -> pd.DataFrame:
    """
    For each prompt family, and for all prompts together: the within-family selected
    prompt, mean-vs-selected NLL/ECE improvements and the D10-D1 fragility gaps.
    """
    config = config or ProtocolConfig()
    groups = [(family, lambda m, f=family: restrict_family(m, f)) for family in eval_matrix.families]
    groups.append(("all", lambda m: m))
    ece_id = primary_ece(config).metric_id
    rows = []
    for family, view in groups:
        train, evaluation = view(train_matrix), view(eval_matrix)
        selected = select_prompt(train, config).selected_prompt_id
        y = evaluation.y
        single = evaluation.column(selected)
        mean = aggregate(evaluation, MEAN_PROB)
        row = {
            "family": family,
            "k": evaluation.n_prompts,
            "selected_prompt": selected,
            "delta_nll": metric_value("nll", single, y, config=config) - metric_value("nll", mean, y, config=config),
            f"delta_{ece_id}": metric_value(ece_id, single, y, config=config) - metric_value(ece_id, mean, y, config=config),
        }
        profile = fragility_profile(evaluation, config.threshold)
        for stat in StatKind:
            try:
                row[f"{stat.value}_gap"] = decile_gaps(profile, stat).gap
            except InsufficientDataError:
                row[f"{stat.value}_gap"] = float('nan')
        rows.append(row)
    return pd.DataFrame(rows)
