import math
from typing import Tuple

from aggregation.utils import sigmoid
from core.utils.rng import make_rng
from core.utils.utility_files import get_logger
from scores.models import LabelValue, PromptMeta, PromptScoreMatrix, Split
from .models import SynthConfig, SynthTruth

logger = get_logger(__name__)


def family_of(j: int, k: int, families) -> str:
    """Prompts are split into contiguous, near-equal family blocks"""
    return families[j * len(families) // k]


def generate_with_truth(config: SynthConfig) -> Tuple[PromptScoreMatrix, SynthTruth]:
    rng = make_rng(config.seed)
    n, k = config.n_samples, config.k_prompts

    latent = rng.normal(0.0, config.latent_logit_std, n)
    y = rng.random(n) < sigmoid(latent)
    bias = rng.normal(0.0, config.per_prompt_bias_std, k)
    scale = rng.uniform(*config.per_prompt_scale_range, k)
    noise = rng.normal(0.0, config.noise_std, (n, k))
    prompt_logits = bias + scale * latent[:, None] + noise

    n_train = int(math.floor(config.train_fraction * n + 0.5))
    matrix = PromptScoreMatrix(
        sample_ids=[f"{config.dataset}-{config.model}-{i:06d}" for i in range(n)],
        labels=[LabelValue.UNSAFE if v else LabelValue.SAFE for v in y],
        splits=[Split.TRAIN if i < n_train else Split.TEST for i in range(n)],
        prompts=[PromptMeta(prompt_id=j + 1, family=family_of(j, k, config.families)) for j in range(k)],
        p_unsafe=sigmoid(prompt_logits),
        datasets=[config.dataset] * n,
        models=[config.model] * n,
    )
    truth = SynthTruth(latent=latent, bias=bias, scale=scale, prompt_logits=prompt_logits)
    logger.debug(f"[SYNTH] N={n} K={k} seed={config.seed} train={n_train}")
    return matrix, truth


def generate(config: SynthConfig) -> PromptScoreMatrix:
    """Synthetic score matrix fully determined by `config` (including its seed)."""
    return generate_with_truth(config)[0]
