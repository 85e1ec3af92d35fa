from pathlib import Path

import factory
import numpy as np
import orjson
import pytest
from faker import Faker

from reports.models import RunConfig
from scores.models import LabelValue, PromptMeta, PromptScoreMatrix, ProtocolConfig, Split
from scores.serializers import serialize_scores_jsonl
from synth.models import SynthConfig
from synth.utils import generate

fake = Faker()
Faker.seed(1234)


# ============================================================================
# FACTORIES - Test Data Generators
# ============================================================================

class SynthConfigFactory(factory.Factory):
    """Small synthetic matrices; seeds are fixed so fixtures are reproducible"""
    class Meta:
        model = SynthConfig

    n_samples = 400
    k_prompts = 6
    seed = 7
    train_fraction = 0.5


def _three_prompt_scores():
    return [
        {"prompt_id": 1, "family": "A", "p_unsafe": 0.8},
        {"prompt_id": 2, "family": "A", "p_unsafe": 0.6},
        {"prompt_id": 3, "family": "B", "p_unsafe": 0.7},
    ]


class ScoreRecordFactory(factory.DictFactory):
    """One JSONL score record as a plain dict"""
    sample_id = factory.Faker("uuid4")
    dataset = "unit"
    model = "default"
    split = "test"
    label = "U"
    scores = factory.LazyFunction(_three_prompt_scores)


def to_jsonl(records):
    return [orjson.dumps(record).decode("utf-8") for record in records]


def make_matrix(p, labels, splits=None, families=None, datasets=None, models=None) -> PromptScoreMatrix:
    """Matrix from a plain N x K list; labels as 1/0"""
    p = np.asarray(p, dtype=float)
    n, k = p.shape
    families = families or ["A"] * k
    return PromptScoreMatrix(
        sample_ids=[f"s{i}" for i in range(n)],
        labels=[LabelValue.UNSAFE if v else LabelValue.SAFE for v in labels],
        splits=splits or [Split.TEST] * n,
        prompts=[PromptMeta(prompt_id=j + 1, family=families[j]) for j in range(k)],
        p_unsafe=p,
        datasets=datasets,
        models=models,
    )


# ============================================================================
# FIXTURES - Test Setup
# ============================================================================

@pytest.fixture
def protocol():
    """Protocol constants with a small bootstrap for fast tests"""
    return ProtocolConfig(bootstrap_B=200, bootstrap_seed=11)


@pytest.fixture
def run_config(protocol):
    """Run configuration without plots"""
    return RunConfig(protocol=protocol, svg=False)


@pytest.fixture
def synth_matrix():
    """400 x 6 synthetic matrix, first half train"""
    return generate(SynthConfigFactory())


@pytest.fixture
def test_view(synth_matrix):
    """Test rows of the synthetic matrix"""
    return synth_matrix.take_rows([i for i, s in enumerate(synth_matrix.splits) if s is Split.TEST])


@pytest.fixture
def train_view(synth_matrix):
    """Train rows of the synthetic matrix"""
    return synth_matrix.take_rows([i for i, s in enumerate(synth_matrix.splits) if s is Split.TRAIN])


@pytest.fixture
def tiny_matrix():
    """Four samples, three prompts in two families"""
    return make_matrix(
        [[0.9, 0.8, 0.7],
         [0.2, 0.4, 0.1],
         [0.6, 0.3, 0.5],
         [0.1, 0.2, 0.3]],
        labels=[1, 0, 1, 0],
        families=["A", "A", "B"],
    )


@pytest.fixture
def write_jsonl(tmp_path):
    """Write records or lines to a JSONL file and return its path"""
    def _write(lines, name="scores.jsonl") -> Path:
        path = tmp_path / name
        if lines and isinstance(lines[0], dict):
            lines = to_jsonl(lines)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path
    return _write


@pytest.fixture
def synth_jsonl(write_jsonl, synth_matrix):
    """The synthetic matrix as a JSONL artifact"""
    return write_jsonl(list(serialize_scores_jsonl(synth_matrix)), name="synth.jsonl")
