from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.utils.error_handling_standerizer import UndefinedMetricError, ValidationError
from scores.models import LabelValue, ProtocolConfig
from .models import ECE_VARIANTS, BinScheme, EceSpec, EvalReport, report_ece_specs

EPSILON = ProtocolConfig().epsilon


# ============================================================================
# INPUT HANDLING
# ============================================================================

def as_indicator(labels) -> np.ndarray:
    """Labels as a 0/1 int array; accepts LabelValue, "U"/"S" or 1/0."""
    arr = np.asarray(labels)
    if arr.dtype.kind in "iub":
        out = arr.astype(np.int64)
    else:
        out = np.array([LabelValue.parse(v).indicator for v in arr], dtype=np.int64)
    if ((out != 0) & (out != 1)).any():
        raise ValidationError("labels must be binary")
    return out


def prepare(scores, labels, weights=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validate aligned inputs; missing weights become all ones."""
    p = np.asarray(scores, dtype=float).ravel()
    y = as_indicator(labels).ravel()
    if len(p) != len(y):
        raise ValidationError(f"scores ({len(p)}) and labels ({len(y)}) differ in length")
    if weights is None:
        w = np.ones_like(p)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if len(w) != len(p):
            raise ValidationError(f"weights ({len(w)}) and scores ({len(p)}) differ in length")
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValidationError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise ValidationError("weights are all zero")
    return p, y, w


# ============================================================================
# CALIBRATION METRICS
# ============================================================================

def per_sample_nll(scores, labels, eps: float = EPSILON) -> np.ndarray:
    p = np.clip(np.asarray(scores, dtype=float), eps, 1.0 - eps)
    y = as_indicator(labels)
    return -np.where(y == 1, np.log(p), np.log1p(-p))


def nll(scores, labels, weights=None, eps: float = EPSILON) -> float:
    """Weighted mean Bernoulli negative log-likelihood (natural log, clipped)."""
    p, y, w = prepare(scores, labels, weights)
    return float(w @ per_sample_nll(p, y, eps) / w.sum())


def bin_index(scores, spec: EceSpec) -> np.ndarray:
    """
    Bin of every sample. Equal-width uses min(floor(p*B), B-1); equal-mass splits the
    score-sorted order (ties by sample index) into B contiguous groups.
    """
    p = np.asarray(scores, dtype=float)
    if spec.scheme is BinScheme.EQUAL_WIDTH:
        return np.minimum(np.floor(p * spec.bins).astype(np.int64), spec.bins - 1)
    order = np.argsort(p, kind='stable')
    idx = np.empty(len(p), dtype=np.int64)
    for b, group in enumerate(np.array_split(order, spec.bins)):
        idx[group] = b
    return idx


def ece_from_bins(p: np.ndarray, y: np.ndarray, w: np.ndarray, idx: np.ndarray, bins: int) -> float:
    """sum_b |sum_{i in b} w_i (y_i - p_i)| / sum w, i.e. sum_b mass_b |freq_b - conf_b|"""
    gaps = np.bincount(idx, weights=w * (y - p), minlength=bins)
    return float(np.abs(gaps).sum() / w.sum())


def ece(scores, labels, spec: EceSpec = EceSpec(), weights=None) -> float:
    p, y, w = prepare(scores, labels, weights)
    return ece_from_bins(p, y, w, bin_index(p, spec), spec.bins)


def reliability_bins(scores, labels, spec: EceSpec = EceSpec(), weights=None) -> pd.DataFrame:
    """Per occupied bin: bounds, count, mass fraction, mean confidence and observed frequency."""
    p, y, w = prepare(scores, labels, weights)
    idx = bin_index(p, spec)
    rows = []
    total = w.sum()
    for b in range(spec.bins):
        members = idx == b
        if not members.any():
            continue
        wb = w[members]
        mass = wb.sum()
        if spec.scheme is BinScheme.EQUAL_WIDTH:
            lower, upper = b / spec.bins, (b + 1) / spec.bins
        else:
            lower, upper = float(p[members].min()), float(p[members].max())
        rows.append({
            "bin": b,
            "lower": lower,
            "upper": upper,
            "count": int(members.sum()),
            "mass": float(mass / total),
            "conf": float(wb @ p[members] / mass) if mass > 0 else float(p[members].mean()),
            "freq": float(wb @ y[members] / mass) if mass > 0 else float(y[members].mean()),
        })
    return pd.DataFrame(rows, columns=["bin", "lower", "upper", "count", "mass", "conf", "freq"])


# ============================================================================
# RANKING METRICS
# ============================================================================

def _score_groups(p: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Positive and negative weight mass per distinct score, ascending."""
    distinct, inverse = np.unique(p, return_inverse=True)
    pos = np.bincount(inverse, weights=w * y, minlength=len(distinct))
    neg = np.bincount(inverse, weights=w * (1 - y), minlength=len(distinct))
    return distinct, pos, neg


def auroc(scores, labels, weights=None) -> float:
    """Weighted Mann-Whitney statistic; tied scores get half credit."""
    p, y, w = prepare(scores, labels, weights)
    _, pos, neg = _score_groups(p, y, w)
    pos_total, neg_total = pos.sum(), neg.sum()
    if pos_total <= 0 or neg_total <= 0:
        raise UndefinedMetricError("AUROC needs both classes", metric="auroc")
    neg_below = np.cumsum(neg) - neg
    return float(pos @ (neg_below + 0.5 * neg) / (pos_total * neg_total))


def auprc(scores, labels, weights=None) -> float:
    """Average precision: sum over descending distinct thresholds of delta-recall times precision."""
    p, y, w = prepare(scores, labels, weights)
    _, pos, neg = _score_groups(p, y, w)
    pos, neg = pos[::-1], neg[::-1]
    pos_total = pos.sum()
    if pos_total <= 0:
        raise UndefinedMetricError("AUPRC needs at least one positive", metric="auprc")
    tp = np.cumsum(pos)
    predicted = tp + np.cumsum(neg)
    step = pos > 0
    return float(np.sum(pos[step] / pos_total * (tp[step] / predicted[step])))


def error_at_threshold(scores, labels, threshold: float = 0.5, weights=None) -> float:
    """Weighted misclassification rate with unsafe predicted iff score >= threshold."""
    p, y, w = prepare(scores, labels, weights)
    wrong = (p >= threshold).astype(np.int64) != y
    return float(w @ wrong / w.sum())


# ============================================================================
# BUNDLE
# ============================================================================

def evaluate(scores, labels, weights=None, config: Optional[ProtocolConfig] = None,
             ece_specs: Optional[Iterable[EceSpec]] = None) -> EvalReport:
    """All report metrics for one score vector"""
    config = config or ProtocolConfig()
    ece_specs = report_ece_specs(config) if ece_specs is None else ece_specs
    p, y, w = prepare(scores, labels, weights)
    undefined = []
    ranking = {}
    for name, fn in (("auroc", auroc), ("auprc", auprc)):
        try:
            ranking[name] = fn(p, y, w)
        except UndefinedMetricError:
            ranking[name] = None
            undefined.append(name)
    return EvalReport(
        nll=nll(p, y, w, config.epsilon),
        ece={spec.metric_id: ece(p, y, spec, w) for spec in ece_specs},
        auroc=ranking["auroc"],
        auprc=ranking["auprc"],
        error_at_threshold=error_at_threshold(p, y, config.threshold, w),
        n=len(p),
        weighted=weights is not None,
        undefined=undefined,
    )


def metric_value(metric_id: str, scores, labels, weights=None, config: Optional[ProtocolConfig] = None) -> float:
    """One metric by report id (nll, ece_w15, auroc, auprc, err05, ...)."""
    config = config or ProtocolConfig()
    if metric_id == "nll":
        return nll(scores, labels, weights, config.epsilon)
    if metric_id == "auroc":
        return auroc(scores, labels, weights)
    if metric_id == "auprc":
        return auprc(scores, labels, weights)
    if metric_id == "err05":
        return error_at_threshold(scores, labels, config.threshold, weights)
    try:
        spec = EceSpec.from_id(metric_id)
    except ValueError:
        raise ValidationError(f"unknown metric '{metric_id}'", metric=metric_id)
    return ece(scores, labels, spec, weights)


LOWER_IS_BETTER = {"nll": True, "auroc": False, "auprc": False, "err05": True}


def lower_is_better(metric_id: str) -> bool:
    return LOWER_IS_BETTER.get(metric_id, True)


def metric_ids(specs: Sequence[EceSpec] = ECE_VARIANTS):
    return ["nll", *[s.metric_id for s in specs], "auroc", "auprc", "err05"]
