import math
from typing import Dict, Hashable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import pydantic

from aggregation.utils import binary_entropy
from core.utils.error_handling_standerizer import ConfigError, ValidationError
from core.utils.utility_files import get_logger
from metrics.models import primary_ece
from metrics.utils import ece, error_at_threshold, nll, prepare
from scores.models import ProtocolConfig, PromptScoreMatrix
from .models import CoverageCurve, SignalKind, UncertaintySignal, WinCountTable
from .sweep import pair_label, win_counts

logger = get_logger(__name__)

# (target id, risk metric, c_min, c_max) for AURC targets; (target id, risk metric, coverage) for point targets
AURC_TARGETS = (
    ("aurc_err_0.5_1.0", "error", 0.5, 1.0),
    ("aurc_err_0.9_1.0", "error", 0.9, 1.0),
    ("aurc_nll_0.9_1.0", "nll", 0.9, 1.0),
    ("aurc_ece_0.9_1.0", "ece", 0.9, 1.0),
)
POINT_TARGETS = (
    ("err_at_95", "error", 0.95),
    ("nll_at_95", "nll", 0.95),
    ("ece_at_95", "ece", 0.95),
    ("err_at_90", "error", 0.90),
    ("nll_at_90", "nll", 0.90),
    ("ece_at_90", "ece", 0.90),
)


def uncertainty(matrix: PromptScoreMatrix, selected_prompt: Optional[int], kind) -> UncertaintySignal:
    """
    std_pu:        cross-prompt population std of the unsafe score
    entropy_mean:  natural-log binary entropy of the mean score
    margin_single: 1 - |2p - 1| of the selected prompt's score
    """
    try:
        kind = SignalKind(kind)
    except ValueError:
        raise ConfigError(f"unknown uncertainty signal '{kind}'", signal=str(kind))
    p = matrix.p_unsafe
    if kind is SignalKind.STD_PU:
        values = p.std(axis=1)
    elif kind is SignalKind.ENTROPY_MEAN:
        values = binary_entropy(p.mean(axis=1), base=math.e)
    else:
        if selected_prompt is None:
            raise ValidationError("margin_single needs a selected prompt id")
        values = 1.0 - np.abs(2.0 * matrix.column(selected_prompt) - 1.0)
    return UncertaintySignal(kind=kind, values=values)


def validate_grid(grid: Sequence[float]):
    try:
        ProtocolConfig(coverage_grid=tuple(grid))
    except pydantic.ValidationError as e:
        raise ConfigError(f"invalid coverage grid {list(grid)}: {e.errors()[0]['msg']}")


def retained_size(coverage: float, n: int) -> int:
    """round(c * N) with halves rounded up, at least one sample.
    Products stored just below a half (0.145 * 100) still round up."""
    return max(1, int(math.floor(coverage * n + 0.5 + 1e-9)))


def risk_coverage(scores, labels, signal, grid: Optional[Sequence[float]] = None,
                  config: Optional[ProtocolConfig] = None) -> CoverageCurve:
    """
    At every coverage c keep the round(c*N) least uncertain samples (ties by index)
    and compute error@threshold, NLL and the configured ECE on them.
    """
    config = config or ProtocolConfig()
    grid = tuple(config.coverage_grid if grid is None else grid)
    validate_grid(grid)
    kind = signal.kind if isinstance(signal, UncertaintySignal) else None
    u = np.asarray(signal.values if isinstance(signal, UncertaintySignal) else signal, dtype=float)
    p, y, _ = prepare(scores, labels)
    if len(u) != len(p):
        raise ValidationError(f"signal ({len(u)}) and scores ({len(p)}) differ in length")

    spec = primary_ece(config)
    order = np.lexsort((np.arange(len(p)), u))
    sizes, risks = [], {"error": [], "nll": [], "ece": []}
    for c in grid:
        m = retained_size(c, len(p))
        keep = np.sort(order[:m])
        sizes.append(m)
        risks["error"].append(error_at_threshold(p[keep], y[keep], config.threshold))
        risks["nll"].append(nll(p[keep], y[keep], eps=config.epsilon))
        risks["ece"].append(ece(p[keep], y[keep], spec))
    return CoverageCurve(grid=grid, sizes=tuple(sizes), risks={k: tuple(v) for k, v in risks.items()}, signal=kind)


def _on_grid(grid: Sequence[float], c: float) -> bool:
    return any(abs(g - c) < 1e-12 for g in grid)


def aurc(curve: CoverageCurve, c_min: float, c_max: float, metric: str = "error") -> float:
    """Trapezoid over the evaluated points in [c_min, c_max], divided by the range width."""
    if not (_on_grid(curve.grid, c_min) and _on_grid(curve.grid, c_max)):
        raise ValidationError(f"AURC range [{c_min}, {c_max}] endpoints must be grid points",
                              c_min=c_min, c_max=c_max)
    points = sorted(
        (c, r) for c, r in zip(curve.grid, curve.risks[metric])
        if c_min - 1e-12 <= c <= c_max + 1e-12
    )
    if len(points) < 2 or c_max <= c_min:
        raise ValidationError(f"AURC range [{c_min}, {c_max}] needs at least two grid points")
    c, r = np.array(points).T
    return float(np.trapezoid(r, c) / (c_max - c_min))


def selective_targets(curve: CoverageCurve) -> Dict[str, float]:
    """The ten summary numbers reported per (pair, signal)."""
    out = {name: aurc(curve, lo, hi, metric) for name, metric, lo, hi in AURC_TARGETS}
    out.update({name: curve.risk_at(metric, c) for name, metric, c in POINT_TARGETS})
    return out


def selective_summary(curves: Mapping[Hashable, Mapping[str, CoverageCurve]]) -> Dict[str, WinCountTable]:
    """
    Win counts of the uncertainty signals for every selective target.
    `curves` maps each evaluation pair to its per-signal coverage curves.
    """
    per_target: Dict[str, Dict[str, Dict[str, float]]] = {}
    for key, by_signal in curves.items():
        label = pair_label(key)
        for signal, curve in by_signal.items():
            for target, value in selective_targets(curve).items():
                per_target.setdefault(target, {}).setdefault(label, {})[str(SignalKind(signal).value)] = value
    return {
        target: win_counts(pd.DataFrame.from_dict(rows, orient='index'), lower_is_better=True, metric=target)
        for target, rows in per_target.items()
    }
