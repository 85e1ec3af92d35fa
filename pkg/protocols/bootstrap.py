"""
Paired per-sample bootstrap for metric differences.

Each resample draws N indices with replacement from its own child generator
(spawned from the master seed by resample index), so the delta distribution does
not depend on how resamples are split across worker threads. A resample is
represented by its multiplicity vector; weighted metrics then reduce to dot
products with count-scaled weights.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Tuple

import numpy as np

from core.settings import N_JOBS
from core.utils.error_handling_standerizer import ConfigError, ValidationError
from core.utils.rng import GENERATOR_ID, make_rng, spawn_seeds
from core.utils.utility_files import get_logger
from metrics.models import BinScheme, EceSpec, primary_ece
from metrics.utils import bin_index, per_sample_nll, prepare
from scores.models import ProtocolConfig
from .models import BootstrapResult

logger = get_logger(__name__)

CI_PERCENTILES = (2.5, 97.5)


def bootstrap_metrics(config: Optional[ProtocolConfig] = None) -> Tuple[str, str]:
    """NLL and the configured equal-width ECE"""
    return "nll", primary_ece(config).metric_id


class PairedMetric:
    """Precomputed per-sample terms of one metric for baseline and candidate."""

    def __init__(self, metric: str, pa: np.ndarray, pb: np.ndarray, y: np.ndarray, eps: float):
        self.metric = metric
        if metric == "nll":
            self.terms = (per_sample_nll(pa, y, eps), per_sample_nll(pb, y, eps))
            return
        try:
            self.spec = EceSpec.from_id(metric)
        except ValueError:
            raise ConfigError(f"bootstrap supports nll and equal-width ECE, not '{metric}'", metric=metric)
        if self.spec.scheme is not BinScheme.EQUAL_WIDTH:
            raise ConfigError(f"bootstrap supports nll and equal-width ECE, not '{metric}'", metric=metric)
        self.terms = (y - pa, y - pb)
        self.bins = (bin_index(pa, self.spec), bin_index(pb, self.spec))

    def value(self, side: int, cw: np.ndarray, total: float) -> float:
        if self.metric == "nll":
            return float(cw @ self.terms[side] / total)
        gaps = np.bincount(self.bins[side], weights=cw * self.terms[side], minlength=self.spec.bins)
        return float(np.abs(gaps).sum() / total)

    def delta(self, cw: np.ndarray) -> float:
        """baseline - candidate"""
        total = cw.sum()
        return self.value(0, cw, total) - self.value(1, cw, total)


WeightFn = Callable[[np.ndarray], np.ndarray]


def paired_deltas(paired: PairedMetric, n: int, base_weights: np.ndarray, B: int, seed: int,
                  n_jobs: int = 1, weight_fn: Optional[WeightFn] = None) -> Tuple[float, np.ndarray]:
    """Point delta and the B resampled deltas."""
    point = paired.delta(base_weights)
    seeds = spawn_seeds(seed, B)
    deltas = np.empty(B)

    def run(chunk: range):
        for r in chunk:
            idx = make_rng(seeds[r]).integers(0, n, n)
            counts = np.bincount(idx, minlength=n)
            w = base_weights if weight_fn is None else weight_fn(counts)
            deltas[r] = paired.delta(counts * w)

    n_jobs = max(1, min(n_jobs, B))
    if n_jobs == 1:
        run(range(B))
    else:
        bounds = np.linspace(0, B, n_jobs + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run, [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]))
    return point, deltas


def summarize(point: float, deltas: np.ndarray) -> Tuple[float, float, float]:
    """Percentile CI (linear interpolation) and two-sided p = 2 min(P(d <= 0), P(d >= 0)), clamped."""
    ci_low, ci_high = np.percentile(deltas, CI_PERCENTILES)
    p = 2.0 * min(float(np.mean(deltas <= 0)), float(np.mean(deltas >= 0)))
    return float(ci_low), float(ci_high), min(1.0, p)


def bootstrap_delta(
    scores_a,
    scores_b,
    labels,
    metric: str = "nll",
    B: Optional[int] = None,
    seed: Optional[int] = None,
    weights=None,
    n_jobs: int = N_JOBS,
    config: Optional[ProtocolConfig] = None,
) -> BootstrapResult:
    """
    Bootstrap the difference metric(baseline) - metric(candidate).
    `scores_a` is the baseline, `scores_b` the candidate; positive deltas favour the candidate.
    """
    config = config or ProtocolConfig()
    B = config.bootstrap_B if B is None else B
    seed = config.bootstrap_seed if seed is None else seed
    if B < 1:
        raise ValidationError(f"bootstrap needs B >= 1, got {B}")
    pa, y, w = prepare(scores_a, labels, weights)
    pb, _, _ = prepare(scores_b, labels)
    paired = PairedMetric(metric, pa, pb, y, config.epsilon)
    point, deltas = paired_deltas(paired, len(y), w, B, seed, n_jobs)
    ci_low, ci_high, p = summarize(point, deltas)
    logger.debug(f"[BOOTSTRAP] {metric}: delta={point:.6f} CI=[{ci_low:.6f}, {ci_high:.6f}] p={p:.4f}")
    return BootstrapResult(
        metric=metric, point_delta=point, ci_low=ci_low, ci_high=ci_high, p_two_sided=p,
        B=B, seed=seed, generator=GENERATOR_ID,
    )
