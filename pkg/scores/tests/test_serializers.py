"""JSONL score artifact parsing tests"""
import numpy as np
import pytest

from core.utils.error_handling_standerizer import (
    DuplicateSampleError,
    InconsistentPromptSetError,
    InvalidLogitError,
    MalformedRecordError,
    MissingLabelError,
    ProbabilityRangeError,
)
from scores.models import LabelValue, Split
from scores.serializers import parse_scores_jsonl, serialize_scores_jsonl
from tests.conftest import ScoreRecordFactory, to_jsonl


@pytest.mark.unit
@pytest.mark.scores
class TestParseScoresJsonl:
    """Unit tests for parse_scores_jsonl"""

    def test_two_valid_lines(self):
        """Two records with three prompts give a 2 x 3 matrix"""
        records = [ScoreRecordFactory(label="U"), ScoreRecordFactory(label="S", split="train")]
        matrix = parse_scores_jsonl(to_jsonl(records))
        assert matrix.n_samples == 2
        assert matrix.n_prompts == 3
        assert matrix.labels == (LabelValue.UNSAFE, LabelValue.SAFE)
        assert matrix.splits == (Split.TEST, Split.TRAIN)
        assert matrix.sample_ids == (records[0]["sample_id"], records[1]["sample_id"])

    def test_columns_ordered_by_prompt_id(self):
        """Score entries may arrive in any order"""
        record = ScoreRecordFactory(scores=[
            {"prompt_id": 2, "family": "A", "p_unsafe": 0.2},
            {"prompt_id": 1, "family": "A", "p_unsafe": 0.1},
        ])
        matrix = parse_scores_jsonl(to_jsonl([record]))
        assert matrix.prompt_ids == [1, 2]
        np.testing.assert_array_equal(matrix.p_unsafe[0], [0.1, 0.2])

    def test_probability_out_of_range(self):
        """p_unsafe=1.3 names the sample and the prompt"""
        record = ScoreRecordFactory(sample_id="bad-one", scores=[{"prompt_id": 1, "family": "A", "p_unsafe": 1.3}])
        with pytest.raises(ProbabilityRangeError) as exc:
            parse_scores_jsonl(to_jsonl([record]))
        assert "bad-one" in exc.value.message
        assert exc.value.context["prompt_id"] == 1

    def test_inconsistent_prompt_sets(self):
        """A record with a different prompt set is rejected"""
        first = ScoreRecordFactory(scores=[
            {"prompt_id": 1, "family": "A", "p_unsafe": 0.1},
            {"prompt_id": 2, "family": "A", "p_unsafe": 0.2},
        ])
        second = ScoreRecordFactory()
        with pytest.raises(InconsistentPromptSetError):
            parse_scores_jsonl(to_jsonl([first, second]))

    def test_family_mismatch_is_inconsistent(self):
        """Same ids under different families are a different prompt set"""
        first = ScoreRecordFactory()
        second = ScoreRecordFactory(scores=[
            {"prompt_id": 1, "family": "A", "p_unsafe": 0.8},
            {"prompt_id": 2, "family": "B", "p_unsafe": 0.6},
            {"prompt_id": 3, "family": "B", "p_unsafe": 0.7},
        ])
        with pytest.raises(InconsistentPromptSetError):
            parse_scores_jsonl(to_jsonl([first, second]))

    def test_duplicate_sample_id(self):
        """Sample ids must be unique"""
        records = [ScoreRecordFactory(sample_id="dup"), ScoreRecordFactory(sample_id="dup")]
        with pytest.raises(DuplicateSampleError) as exc:
            parse_scores_jsonl(to_jsonl(records))
        assert exc.value.context["line_number"] == 2

    def test_missing_label(self):
        """A record without a label is rejected"""
        record = ScoreRecordFactory()
        del record["label"]
        with pytest.raises(MissingLabelError):
            parse_scores_jsonl(to_jsonl([record]))

    def test_invalid_json_reports_line(self):
        """Malformed JSON is reported with its line number"""
        lines = to_jsonl([ScoreRecordFactory()]) + ["{not json"]
        with pytest.raises(MalformedRecordError) as exc:
            parse_scores_jsonl(lines)
        assert exc.value.context["line_number"] == 2

    def test_unknown_split(self):
        """Split must be train, test or external"""
        with pytest.raises(MalformedRecordError):
            parse_scores_jsonl(to_jsonl([ScoreRecordFactory(split="validation")]))

    def test_integer_labels(self):
        """1/0 labels map to U/S"""
        matrix = parse_scores_jsonl(to_jsonl([ScoreRecordFactory(label=1), ScoreRecordFactory(label=0)]))
        assert list(matrix.y) == [1, 0]

    def test_logits_override_saved_probability(self):
        """When both forms are present the logits are re-normalized"""
        record = ScoreRecordFactory(scores=[
            {"prompt_id": 1, "family": "A", "p_unsafe": 0.3, "logit_u": 0.0, "logit_s": 0.0},
        ])
        matrix = parse_scores_jsonl(to_jsonl([record]))
        assert matrix.p_unsafe[0, 0] == 0.5

    def test_non_finite_logit(self):
        """A non-finite logit identifies the sample"""
        line = '{"sample_id": "x1", "split": "test", "label": "U", ' \
               '"scores": [{"prompt_id": 1, "family": "A", "logit_u": Infinity, "logit_s": 0.0}]}'
        with pytest.raises((InvalidLogitError, MalformedRecordError)):
            parse_scores_jsonl([line])

    def test_half_logit_pair_rejected(self):
        """logit_u without logit_s is malformed"""
        record = ScoreRecordFactory(scores=[{"prompt_id": 1, "family": "A", "logit_u": 1.0}])
        with pytest.raises(MalformedRecordError):
            parse_scores_jsonl(to_jsonl([record]))

    def test_prompt_ids_must_start_at_one(self):
        """Prompt ids are contiguous from 1"""
        record = ScoreRecordFactory(scores=[{"prompt_id": 2, "family": "A", "p_unsafe": 0.5}])
        with pytest.raises(InconsistentPromptSetError):
            parse_scores_jsonl(to_jsonl([record]))

    def test_blank_lines_skipped(self):
        """Empty lines between records are ignored"""
        lines = to_jsonl([ScoreRecordFactory()]) + ["", "   "] + to_jsonl([ScoreRecordFactory()])
        assert parse_scores_jsonl(lines).n_samples == 2


@pytest.mark.unit
@pytest.mark.scores
class TestSerializeScoresJsonl:
    """Unit tests for serialize_scores_jsonl"""

    def test_round_trip(self, synth_matrix):
        """Serialized lines parse back to an equal matrix"""
        assert parse_scores_jsonl(serialize_scores_jsonl(synth_matrix)) == synth_matrix

    def test_labels_written_as_letters(self, tiny_matrix):
        """Labels are always emitted as U/S"""
        lines = list(serialize_scores_jsonl(tiny_matrix))
        assert '"label":"U"' in lines[0]
        assert '"label":"S"' in lines[1]
