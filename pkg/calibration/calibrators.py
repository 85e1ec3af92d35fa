"""
Labeled post-hoc calibrators: fit on train scores, then apply to any score vector.

Temperature and Platt both work on the clipped logit of the input probability.
Isotonic regression uses pool-adjacent-violators over tied-score groups.
"""
import math
from typing import Any, Dict, List

import numpy as np

from aggregation.utils import EPSILON, sigmoid, to_logit
from core.utils.error_handling_standerizer import (
    ConfigError,
    ConvergenceError,
    InsufficientDataError,
)
from core.utils.utility_files import get_logger
from metrics.utils import per_sample_nll, prepare
from .models import Calibrator, CalibratorKind

logger = get_logger(__name__)

LOG_T_BOUNDS = (math.log(0.05), math.log(20.0))
LOG_T_TOLERANCE = 1e-6
PLATT_MAX_ITER = 100
PLATT_GRAD_TOLERANCE = 1e-10
PLATT_RIDGE = 1e-8

OPTIMIZER_SETTINGS = {
    "temperature": {"method": "golden_section", "log_t_bounds": [0.05, 20.0], "tolerance": LOG_T_TOLERANCE},
    "platt": {"method": "newton_backtracking", "max_iter": PLATT_MAX_ITER,
              "grad_tolerance": PLATT_GRAD_TOLERANCE, "ridge": PLATT_RIDGE},
    "isotonic": {"method": "pava", "ties": "pooled", "continuity": "left"},
}


def _require_both_classes(y: np.ndarray, what: str):
    positives = int(y.sum())
    if positives == 0 or positives == len(y):
        raise InsufficientDataError(f"{what} needs both classes in the train labels",
                                    n_samples=len(y), n_unsafe=positives)


# ============================================================================
# TEMPERATURE
# ============================================================================

def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2.0


def fit_temperature(train_scores, labels, eps: float = EPSILON) -> Calibrator:
    """T minimizing train NLL of sigmoid(logit(p) / T), never worse than T = 1"""
    p, y, _ = prepare(train_scores, labels)
    _require_both_classes(y, "temperature scaling")
    z = to_logit(p, eps)

    def objective(log_t: float) -> float:
        return float(per_sample_nll(sigmoid(z / math.exp(log_t)), y, eps).mean())

    log_t = _golden_section(objective, *LOG_T_BOUNDS, LOG_T_TOLERANCE)
    if objective(0.0) <= objective(log_t):
        log_t = 0.0
    temperature = math.exp(log_t)
    logger.debug(f"[CALIBRATE] temperature T={temperature:.6f}")
    return Calibrator(kind=CalibratorKind.TEMPERATURE, temperature=temperature)


# ============================================================================
# PLATT
# ============================================================================

def _platt_objective(theta: np.ndarray, zc: np.ndarray, y: np.ndarray) -> float:
    s = theta[0] * zc + theta[1]
    loss = np.logaddexp(0.0, s) - y * s
    return float(loss.mean() + 0.5 * PLATT_RIDGE * theta @ theta)


def fit_platt(train_scores, labels, eps: float = EPSILON) -> Calibrator:
    """
    Ridge-stabilized logistic MLE of sigmoid(a * z + b) on z = logit(p).
    Newton's method runs on centered z; the result is mapped back to (a, b).
    """
    p, y, _ = prepare(train_scores, labels)
    _require_both_classes(y, "Platt scaling")
    z = to_logit(p, eps)
    z_mean = float(z.mean())
    zc = z - z_mean
    yf = y.astype(float)

    theta = np.zeros(2)
    current = _platt_objective(theta, zc, yf)
    for iteration in range(1, PLATT_MAX_ITER + 1):
        q = sigmoid(theta[0] * zc + theta[1])
        r = q - yf
        grad = np.array([np.mean(r * zc), np.mean(r)]) + PLATT_RIDGE * theta
        if np.linalg.norm(grad) < PLATT_GRAD_TOLERANCE:
            break
        h = q * (1.0 - q)
        hess = np.array([
            [np.mean(h * zc * zc) + PLATT_RIDGE, np.mean(h * zc)],
            [np.mean(h * zc), np.mean(h) + PLATT_RIDGE],
        ])
        step = np.linalg.solve(hess, grad)
        # backtracking on the objective
        scale = 1.0
        while scale > 1e-12:
            candidate = theta - scale * step
            value = _platt_objective(candidate, zc, yf)
            if value <= current:
                break
            scale *= 0.5
        else:
            logger.debug(f"[CALIBRATE] platt line search stalled at iteration {iteration}")
            break
        theta, current = candidate, value
    else:
        raise ConvergenceError("Platt scaling did not converge", PLATT_MAX_ITER)

    a = float(theta[0])
    b = float(theta[1] - theta[0] * z_mean)
    if a < 0:
        logger.warning(f"[CALIBRATE] Platt fit is inverted (a={a:.4f})")
    return Calibrator(kind=CalibratorKind.PLATT, a=a, b=b, iterations=iteration)


# ============================================================================
# ISOTONIC
# ============================================================================

class _Block:
    """A run of adjacent tie groups pooled to one value."""

    def __init__(self, total: float, weight: float, start: int):
        self.start = start
        self.end = start + 1
        self.sum = total
        self.weight_sum = weight

    def merge_with_next_block(self, right: "_Block"):
        self.sum += right.sum
        self.weight_sum += right.weight_sum
        self.end = right.end

    def value(self) -> float:
        return self.sum / self.weight_sum


def pool_adjacent_violators(sums: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted least-squares nondecreasing fit to sums/weights."""
    blocks: List[_Block] = []
    for index in range(len(sums)):
        cur = _Block(float(sums[index]), float(weights[index]), index)
        while blocks and blocks[-1].value() > cur.value():
            prev = blocks.pop()
            prev.merge_with_next_block(cur)
            cur = prev
        blocks.append(cur)
    return np.repeat([blk.value() for blk in blocks], [blk.end - blk.start for blk in blocks])


def fit_isotonic(train_scores, labels, weights=None) -> Calibrator:
    p, y, w = prepare(train_scores, labels, weights)
    if len(p) == 0:
        raise InsufficientDataError("isotonic regression needs at least one sample", n_samples=0)
    knots, inverse = np.unique(p, return_inverse=True)
    sums = np.bincount(inverse, weights=w * y, minlength=len(knots))
    masses = np.bincount(inverse, weights=w, minlength=len(knots))
    keep = masses > 0
    values = np.clip(pool_adjacent_violators(sums[keep], masses[keep]), 0.0, 1.0)
    return Calibrator(
        kind=CalibratorKind.ISOTONIC,
        knots=tuple(float(k) for k in knots[keep]),
        values=tuple(float(v) for v in values),
    )


# ============================================================================
# APPLY / DISPATCH
# ============================================================================

def apply_calibrator(cal: Calibrator, scores, eps: float = EPSILON) -> np.ndarray:
    """Map scores through a fitted calibrator; returns a new array."""
    p = np.asarray(scores, dtype=float)
    if cal.kind is CalibratorKind.TEMPERATURE:
        return sigmoid(to_logit(p, eps) / cal.temperature)
    if cal.kind is CalibratorKind.PLATT:
        return sigmoid(cal.a * to_logit(p, eps) + cal.b)
    knots = np.asarray(cal.knots)
    values = np.asarray(cal.values)
    index = np.clip(np.searchsorted(knots, p, side='left'), 0, len(knots) - 1)
    return values[index]


_FITTERS = {
    CalibratorKind.TEMPERATURE: fit_temperature,
    CalibratorKind.PLATT: fit_platt,
    CalibratorKind.ISOTONIC: fit_isotonic,
}


def fit_calibrator(kind, train_scores, labels) -> Calibrator:
    try:
        kind = CalibratorKind(kind)
    except ValueError:
        raise ConfigError(f"unknown calibrator '{kind}'", calibrator=str(kind))
    return _FITTERS[kind](train_scores, labels)


def calibrator_from_json(obj: Dict[str, Any]) -> Calibrator:
    """Inverse of Calibrator.to_json"""
    kind = CalibratorKind(obj["kind"])
    if kind is CalibratorKind.TEMPERATURE:
        return Calibrator(kind=kind, temperature=obj["T"])
    if kind is CalibratorKind.PLATT:
        return Calibrator(kind=kind, a=obj["a"], b=obj["b"])
    return Calibrator(kind=kind, knots=tuple(obj["knots"]), values=tuple(obj["values"]))
