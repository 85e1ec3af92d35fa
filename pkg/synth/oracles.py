"""
Brute-force reference implementations used to check the fast metric and
calibrator code. They favour obviousness over speed and refuse large inputs.
"""
import itertools

import numpy as np

from core.utils.error_handling_standerizer import OracleLimitError, UndefinedMetricError
from metrics.utils import prepare

MAX_PAIRWISE_N = 1000
MAX_ISOTONIC_N = 8


def _check_size(n: int, limit: int, name: str):
    if n > limit:
        raise OracleLimitError(f"{name} oracle accepts at most {limit} samples, got {n}", n_samples=n)


def oracle_auroc(scores, labels) -> float:
    p, y, _ = prepare(scores, labels)
    _check_size(len(p), MAX_PAIRWISE_N, "AUROC")
    positives = [s for s, t in zip(p, y) if t == 1]
    negatives = [s for s, t in zip(p, y) if t == 0]
    if not positives or not negatives:
        raise UndefinedMetricError("AUROC needs both classes", metric="auroc")
    credit = 0.0
    for sp in positives:
        for sn in negatives:
            if sp > sn:
                credit += 1.0
            elif sp == sn:
                credit += 0.5
    return credit / (len(positives) * len(negatives))


def oracle_auprc(scores, labels) -> float:
    """Average precision by enumerating every distinct threshold from the top."""
    p, y, _ = prepare(scores, labels)
    _check_size(len(p), MAX_PAIRWISE_N, "AUPRC")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive", metric="auprc")
    ap = 0.0
    previous_recall = 0.0
    for threshold in sorted(set(p.tolist()), reverse=True):
        predicted = p >= threshold
        tp = int((predicted & (y == 1)).sum())
        recall = tp / n_pos
        precision = tp / int(predicted.sum())
        ap += (recall - previous_recall) * precision
        previous_recall = recall
    return ap


def oracle_isotonic(scores, labels) -> np.ndarray:
    """
    Monotone least-squares fit by trying every split of the score-sorted tie groups
    into contiguous blocks. Returns fitted values in input order.
    """
    p, y, _ = prepare(scores, labels)
    _check_size(len(p), MAX_ISOTONIC_N, "isotonic")
    distinct, group = np.unique(p, return_inverse=True)
    g = len(distinct)
    sums = np.bincount(group, weights=y.astype(float), minlength=g)
    counts = np.bincount(group, minlength=g).astype(float)

    best_sse, best_values = np.inf, None
    for cuts in itertools.product((False, True), repeat=g - 1):
        starts = [0] + [i + 1 for i, cut in enumerate(cuts) if cut]
        ends = starts[1:] + [g]
        means = [sums[s:e].sum() / counts[s:e].sum() for s, e in zip(starts, ends)]
        if any(m1 > m2 for m1, m2 in zip(means, means[1:])):
            continue
        group_values = np.repeat(means, [e - s for s, e in zip(starts, ends)])
        fitted = group_values[group]
        sse = float(((fitted - y) ** 2).sum())
        if sse < best_sse - 1e-15:
            best_sse, best_values = sse, fitted
    return best_values
