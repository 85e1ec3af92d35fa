"""
Cross-prompt fragility diagnostics: per-sample spread of the prompt scores and how
often the prompts disagree or are wrong, summarized by deciles of the spread.
"""
import numpy as np
import pandas as pd

from core.utils.error_handling_standerizer import InsufficientDataError
from scores.models import PromptScoreMatrix
from .models import DecileGap, FragilityProfile, StatKind

N_DECILES = 10


def fragility_profile(matrix: PromptScoreMatrix, threshold: float = 0.5) -> FragilityProfile:
    p = matrix.p_unsafe
    k = matrix.n_prompts
    y = matrix.y
    votes = p >= threshold
    n_unsafe = votes.sum(axis=1)
    profile = FragilityProfile(
        mu=p.mean(axis=1),
        sigma=p.std(axis=1),
        mistake_rate=(votes != y[:, None].astype(bool)).mean(axis=1),
        disagreement_rate=1.0 - np.maximum(n_unsafe, k - n_unsafe) / k,
    )
    if profile.n_samples >= N_DECILES:
        profile = profile.model_copy(update={"decile_summary": decile_table(profile)})
    return profile


def decile_slices(n: int):
    """Rank ranges [floor((d-1)N/10), floor(dN/10)) for d = 1..10"""
    return [((d - 1) * n // N_DECILES, d * n // N_DECILES) for d in range(1, N_DECILES + 1)]


def sigma_order(profile: FragilityProfile) -> np.ndarray:
    """Sample indices sorted by sigma ascending, ties by index"""
    return np.lexsort((np.arange(profile.n_samples), profile.sigma))


def _require_deciles(profile: FragilityProfile):
    if profile.n_samples < N_DECILES:
        raise InsufficientDataError(
            f"decile analysis needs at least {N_DECILES} samples, got {profile.n_samples}",
            n_samples=profile.n_samples,
        )


def decile_gaps(profile: FragilityProfile, stat) -> DecileGap:
    """Mean of `stat` in the lowest and highest sigma deciles and their difference (D10 - D1)"""
    _require_deciles(profile)
    values = profile.stat(stat)[sigma_order(profile)]
    bounds = decile_slices(profile.n_samples)
    d1 = float(values[bounds[0][0]:bounds[0][1]].mean())
    d10 = float(values[bounds[-1][0]:bounds[-1][1]].mean())
    return DecileGap(stat=StatKind(stat), d1=d1, d10=d10, gap=d10 - d1)


def decile_table(profile: FragilityProfile) -> pd.DataFrame:
    """All ten deciles: size, mean sigma, mean mistake and disagreement rates."""
    _require_deciles(profile)
    order = sigma_order(profile)
    rows = []
    for d, (lo, hi) in enumerate(decile_slices(profile.n_samples), start=1):
        members = order[lo:hi]
        rows.append({
            "decile": d,
            "n": len(members),
            "sigma_mean": float(profile.sigma[members].mean()),
            "mistake": float(profile.mistake_rate[members].mean()),
            "disagreement": float(profile.disagreement_rate[members].mean()),
        })
    return pd.DataFrame(rows)
