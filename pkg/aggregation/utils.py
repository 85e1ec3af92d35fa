import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.utils.error_handling_standerizer import InsufficientDataError, RuleError
from core.utils.utility_files import get_logger
from scores.models import ProtocolConfig, PromptScoreMatrix
from scores.utils import select_columns
from .models import AggregationRule, LogitCorrectionStats, RuleKind

logger = get_logger(__name__)

EPSILON = ProtocolConfig().epsilon
ENTROPY_BASE = 2
SIGMA_FLOOR = 1e-8


# ============================================================================
# LOGIT TRANSFORMS
# ============================================================================

def to_logit(p, eps: float = EPSILON):
    """log(p'/(1-p')) with p' clipped to [eps, 1-eps]."""
    clipped = np.clip(np.asarray(p, dtype=float), eps, 1.0 - eps)
    z = np.log(clipped) - np.log1p(-clipped)
    return float(z) if z.ndim == 0 else z


def sigmoid(z):
    """Logistic function, evaluated without overflow for large |z|."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def binary_entropy(p: np.ndarray, base: float = ENTROPY_BASE) -> np.ndarray:
    """H(p) with 0 log 0 := 0."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    h = -(p * np.log(np.where(p > 0, p, 1.0)) + q * np.log(np.where(q > 0, q, 1.0)))
    return h / math.log(base)


def fit_logit_correction(matrix: PromptScoreMatrix, eps: float = EPSILON) -> LogitCorrectionStats:
    """Column-wise logit mean and population std, and their pooled averages."""
    if matrix.n_samples < 2:
        raise InsufficientDataError(
            f"logit correction needs at least 2 samples, got {matrix.n_samples}",
            n_samples=matrix.n_samples,
        )
    z = to_logit(matrix.p_unsafe, eps)
    mu_hat = z.mean(axis=0)
    sigma_hat = z.std(axis=0)
    return LogitCorrectionStats(
        prompt_ids=tuple(matrix.prompt_ids),
        mu_hat=tuple(float(v) for v in mu_hat),
        sigma_hat=tuple(float(v) for v in sigma_hat),
        mu_star=float(mu_hat.mean()),
        sigma_star=float(sigma_hat.mean()),
    )


# ============================================================================
# RULES
# ============================================================================

def trim_count(trim_fraction: float, k: int) -> int:
    """Values dropped from each end: floor(trim_fraction * K)."""
    t = int(math.floor(trim_fraction * k + 1e-9))
    if 2 * t >= k:
        raise RuleError(f"trim fraction {trim_fraction} removes all {k} prompts",
                        trim_fraction=trim_fraction, k=k)
    return t


def _trimmed_row_mean(values: np.ndarray, trim_fraction: float) -> np.ndarray:
    k = values.shape[1]
    t = trim_count(trim_fraction, k)
    ordered = np.sort(values, axis=1, kind='stable')
    return ordered[:, t:k - t].mean(axis=1)


def _entropy_weighted(p: np.ndarray) -> np.ndarray:
    weights = np.maximum(0.0, 1.0 - binary_entropy(p))
    totals = weights.sum(axis=1)
    degenerate = totals <= 0
    if degenerate.any():
        logger.warning(f"[AGGREGATE] {int(degenerate.sum())} rows have all-zero entropy weights; using uniform weights")
        weights[degenerate] = 1.0
        totals = weights.sum(axis=1)
    return (weights * p).sum(axis=1) / totals


def _check_stats(matrix: PromptScoreMatrix, rule: AggregationRule,
                 stats: Optional[LogitCorrectionStats]) -> LogitCorrectionStats:
    if stats is None:
        raise RuleError(f"rule '{rule.rule_id}' requires logit correction stats", rule=rule.rule_id)
    if list(stats.prompt_ids) != matrix.prompt_ids:
        raise RuleError(
            f"stats were fitted on prompts {list(stats.prompt_ids)}, matrix has {matrix.prompt_ids}",
            rule=rule.rule_id,
        )
    return stats


def bias_scale_logits(z: np.ndarray, stats: LogitCorrectionStats) -> np.ndarray:
    """Standardize each prompt's logit column to the pooled mean and spread."""
    sigma = np.maximum(stats.sigma_array, SIGMA_FLOOR)
    return (z - stats.mu_array) / sigma * stats.sigma_star + stats.mu_star


def corrected_logits(matrix: PromptScoreMatrix, rule: AggregationRule,
                     stats: LogitCorrectionStats, eps: float = EPSILON) -> np.ndarray:
    """Per-prompt logits after the rule's bias or bias+scale correction"""
    stats = _check_stats(matrix, rule, stats)
    z = to_logit(matrix.p_unsafe, eps)
    if rule.kind is RuleKind.BIAS_CORRECTED_LOGIT_MEAN:
        return z - stats.mu_array + stats.mu_star
    z_bs = bias_scale_logits(z, stats)
    if rule.kind is RuleKind.BIAS_SCALE_LOGIT_MEAN:
        return z_bs
    if rule.kind is RuleKind.BIAS_SCALE_SHRINK:
        return z + rule.alpha * (z_bs - z)
    raise RuleError(f"rule '{rule.rule_id}' has no logit correction", rule=rule.rule_id)


def aggregate(matrix: PromptScoreMatrix, rule: AggregationRule,
              stats: Optional[LogitCorrectionStats] = None, eps: float = EPSILON) -> np.ndarray:
    """
    Collapse the N x K matrix to one unsafe score per sample.
    Logit-space rules map back through the sigmoid. Correction rules need `stats`
    fitted on a matrix with the same prompt set.
    """
    p = matrix.p_unsafe
    kind = rule.kind

    if kind is RuleKind.MEAN_PROB:
        return p.mean(axis=1)
    if kind is RuleKind.TRIMMED_MEAN:
        return _trimmed_row_mean(p, rule.trim_fraction)
    if kind is RuleKind.MEDIAN_PROB:
        return np.median(p, axis=1)
    if kind is RuleKind.ENTROPY_WEIGHTED_MEAN:
        return _entropy_weighted(p)

    if kind.needs_stats:
        return sigmoid(corrected_logits(matrix, rule, stats, eps).mean(axis=1))

    z = to_logit(p, eps)
    if kind in (RuleKind.MEAN_LOGIT, RuleKind.MEAN_LOGIT_UNIFORM):
        return sigmoid(z.mean(axis=1))
    if kind is RuleKind.TRIMMED_LOGIT_MEAN:
        return sigmoid(_trimmed_row_mean(z, rule.trim_fraction))
    if kind is RuleKind.MEDIAN_LOGIT:
        return sigmoid(np.median(z, axis=1))
    raise RuleError(f"unknown rule kind {kind!r}")


def aggregate_rules(matrix: PromptScoreMatrix, rules: Sequence[AggregationRule],
                    stats: Optional[LogitCorrectionStats] = None,
                    eps: float = EPSILON) -> Dict[str, np.ndarray]:
    """
    Scores for several rules keyed by rule id.
    Without `stats`, correction rules fit them on `matrix` itself (label-free).
    """
    if stats is None and any(rule.kind.needs_stats for rule in rules):
        stats = fit_logit_correction(matrix, eps)
    return {rule.rule_id: aggregate(matrix, rule, stats, eps) for rule in rules}


def top_k_mean(matrix: PromptScoreMatrix, prompt_ranking: Sequence[int], k: int) -> np.ndarray:
    """Mean probability over the first k prompts of a ranking."""
    ranking = list(prompt_ranking)
    if sorted(ranking) != sorted(matrix.prompt_ids):
        raise RuleError(f"ranking {ranking} is not a permutation of {matrix.prompt_ids}")
    if not 1 <= k <= len(ranking):
        raise RuleError(f"k={k} outside 1..{len(ranking)}", k=k)
    return select_columns(matrix, ranking[:k]).p_unsafe.mean(axis=1)


# ============================================================================
# RULE CATALOGUE
# ============================================================================

def default_sweep_rules(config: Optional[ProtocolConfig] = None) -> List[AggregationRule]:
    """The 15 sweep rules in report order"""
    config = config or ProtocolConfig()
    rules = [
        AggregationRule(kind=kind, trim_fraction=config.trim_fraction)
        for kind in RuleKind if kind is not RuleKind.BIAS_SCALE_SHRINK
    ]
    rules += [
        AggregationRule(kind=RuleKind.BIAS_SCALE_SHRINK, trim_fraction=config.trim_fraction, alpha=alpha)
        for alpha in config.shrink_alphas
    ]
    return rules


def rule_from_id(rule_id: str, trim_fraction: float = 0.1) -> AggregationRule:
    """Parse a rule identifier such as 'median_logit' or 'bias_scale_shrink_0.25'."""
    prefix = RuleKind.BIAS_SCALE_SHRINK.value + "_"
    try:
        if rule_id.startswith(prefix):
            alpha = float(rule_id[len(prefix):])
            return AggregationRule(kind=RuleKind.BIAS_SCALE_SHRINK, alpha=alpha, trim_fraction=trim_fraction)
        return AggregationRule(kind=RuleKind(rule_id), trim_fraction=trim_fraction)
    except ValueError as e:
        raise RuleError(f"unknown aggregation rule '{rule_id}' ({e})", rule=rule_id)
