from typing import List, Optional, Sequence, Union

import numpy as np

from core.settings import N_JOBS
from core.utils.error_handling_standerizer import InsufficientDataError, ValidationError
from core.utils.rng import GENERATOR_ID
from core.utils.utility_files import get_logger
from metrics.utils import as_indicator, prepare
from scores.models import ProtocolConfig
from .bootstrap import PairedMetric, bootstrap_metrics, paired_deltas, summarize
from .models import BootstrapResult, PrevalenceSpec

logger = get_logger(__name__)

Target = Union[str, float]


def _validate_target(target: Target) -> Target:
    if target == "native":
        return target
    if isinstance(target, str) or not 0.0 < float(target) < 1.0:
        raise ValidationError(f"prevalence target {target!r} must be 'native' or in (0, 1)")
    return float(target)


def importance_weights(y: np.ndarray, target: float, counts: Optional[np.ndarray] = None) -> np.ndarray:
    """
    t / pi for unsafe samples and (1 - t) / (1 - pi) for safe ones, with pi the
    (count-weighted) empirical unsafe rate.
    """
    counts = np.ones_like(y, dtype=float) if counts is None else counts
    pi_hat = float(counts @ y / counts.sum())
    return np.where(y == 1, target / pi_hat, (1.0 - target) / (1.0 - pi_hat))


def prevalence_weights(labels, target: Target) -> PrevalenceSpec:
    """Per-sample weights that move the weighted unsafe fraction to `target`."""
    target = _validate_target(target)
    y = as_indicator(labels)
    n_unsafe = int(y.sum())
    if n_unsafe == 0 or n_unsafe == len(y):
        raise InsufficientDataError("prevalence reweighting needs both classes",
                                    n_samples=len(y), n_unsafe=n_unsafe)
    if target == "native":
        return PrevalenceSpec(target_pi=target, weights=np.ones(len(y)))
    return PrevalenceSpec(target_pi=target, weights=importance_weights(y, target))


def _refit(y: np.ndarray, target: float):
    """Weights recomputed from each resample's own labels; single-class resamples keep unit weights."""
    def weight_fn(counts: np.ndarray) -> np.ndarray:
        drawn_unsafe = counts @ y
        if drawn_unsafe == 0 or drawn_unsafe == counts.sum():
            return np.ones_like(y, dtype=float)
        return importance_weights(y, target, counts)
    return weight_fn


def prevalence_stress(
    scores_a,
    scores_b,
    labels,
    targets: Optional[Sequence[Target]] = None,
    B: Optional[int] = None,
    seed: Optional[int] = None,
    metrics: Optional[Sequence[str]] = None,
    refit_weights: bool = False,
    n_jobs: int = N_JOBS,
    config: Optional[ProtocolConfig] = None,
) -> List[BootstrapResult]:
    """
    Re-run the paired bootstrap under reweighted class prevalence.
    Weights are fixed from the full sample unless `refit_weights` is set. The native
    target is the unweighted bootstrap.
    """
    config = config or ProtocolConfig()
    targets = config.prevalence_targets if targets is None else targets
    B = config.bootstrap_B if B is None else B
    seed = config.bootstrap_seed if seed is None else seed
    metrics = bootstrap_metrics(config) if metrics is None else metrics
    pa, y, _ = prepare(scores_a, labels)
    pb, _, _ = prepare(scores_b, labels)

    results = []
    for target in targets:
        spec = prevalence_weights(y, target)
        refit = refit_weights and not spec.is_native
        for metric in metrics:
            paired = PairedMetric(metric, pa, pb, y, config.epsilon)
            point, deltas = paired_deltas(
                paired, len(y), spec.weights, B, seed, n_jobs,
                weight_fn=_refit(y, spec.target_pi) if refit else None,
            )
            ci_low, ci_high, p = summarize(point, deltas)
            results.append(BootstrapResult(
                metric=metric, point_delta=point, ci_low=ci_low, ci_high=ci_high, p_two_sided=p,
                B=B, seed=seed, generator=GENERATOR_ID, target_prevalence=spec.target_pi,
                weights_refit=refit,
            ))
        logger.debug(f"[PREVALENCE] target {spec.target_pi} done")
    return results
