"""Aggregation rule tests"""
import math

import numpy as np
import pydantic
import pytest

from aggregation.models import AggregationRule, LogitCorrectionStats, RuleKind
from aggregation.utils import (
    aggregate,
    aggregate_rules,
    binary_entropy,
    corrected_logits,
    fit_logit_correction,
    default_sweep_rules,
    rule_from_id,
    sigmoid,
    to_logit,
    top_k_mean,
    trim_count,
)
from core.utils.error_handling_standerizer import InsufficientDataError, RuleError
from synth.models import SynthConfig
from synth.utils import generate_with_truth
from tests.conftest import make_matrix


def rule(kind, **kwargs) -> AggregationRule:
    return AggregationRule(kind=RuleKind(kind), **kwargs)


@pytest.mark.unit
@pytest.mark.aggregation
class TestLogitTransforms:
    """Unit tests for to_logit and sigmoid"""

    def test_half(self):
        """logit(0.5) = 0"""
        assert to_logit(0.5) == 0.0

    def test_inverse_of_normalization(self):
        """logit(1 / (1 + e^-2)) = 2"""
        assert to_logit(0.8807970779778823) == pytest.approx(2.0, abs=1e-9)

    def test_clipped_at_one(self):
        """p = 1 maps to logit(1 - eps)"""
        assert to_logit(1.0) == pytest.approx(27.631, abs=1e-3)
        assert to_logit(0.0) == pytest.approx(-27.631, abs=1e-3)

    def test_sigmoid_no_overflow(self):
        """Large |z| saturates without warnings"""
        values = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
        np.testing.assert_array_equal(values, [0.0, 0.5, 1.0])

    def test_round_trip(self):
        """sigmoid inverts to_logit away from the clip"""
        p = np.linspace(0.01, 0.99, 25)
        np.testing.assert_allclose(sigmoid(to_logit(p)), p, atol=1e-12)

    def test_entropy_base_two(self):
        """H2(0.5) = 1 and H2(0) = 0"""
        np.testing.assert_allclose(binary_entropy(np.array([0.5, 0.0, 1.0])), [1.0, 0.0, 0.0])
        assert binary_entropy(np.array([0.9]))[0] == pytest.approx(0.4690, abs=1e-4)


@pytest.mark.unit
@pytest.mark.aggregation
class TestAggregate:
    """Unit tests for aggregate"""

    def test_mean_prob(self):
        """(0.2, 0.4, 0.9) averages to 0.5"""
        matrix = make_matrix([[0.2, 0.4, 0.9]], labels=[1])
        assert aggregate(matrix, rule("mean_prob"))[0] == pytest.approx(0.5, abs=1e-15)

    def test_median_prob(self):
        """(0.1, 0.2, 0.9) has median 0.2"""
        matrix = make_matrix([[0.1, 0.2, 0.9]], labels=[1])
        assert aggregate(matrix, rule("median_prob"))[0] == 0.2

    def test_trimmed_mean_symmetric(self):
        """K=15 with one extreme on each side trims to 0.5"""
        matrix = make_matrix([[0.0] + [0.5] * 13 + [1.0]], labels=[1])
        assert aggregate(matrix, rule("trimmed_mean", trim_fraction=0.1))[0] == 0.5

    def test_entropy_weighted(self):
        """The 0.5 prompt gets zero weight"""
        matrix = make_matrix([[0.5, 0.9, 0.9]], labels=[1])
        assert aggregate(matrix, rule("entropy_weighted_mean"))[0] == pytest.approx(0.9, abs=1e-12)

    def test_entropy_weighted_all_uninformative(self):
        """Rows where every prompt says 0.5 fall back to uniform weights"""
        matrix = make_matrix([[0.5, 0.5]], labels=[1])
        assert aggregate(matrix, rule("entropy_weighted_mean"))[0] == 0.5

    def test_mean_logit_antisymmetric(self):
        """(0.1, 0.9) pools to 0.5 in logit space"""
        matrix = make_matrix([[0.1, 0.9]], labels=[1])
        assert aggregate(matrix, rule("mean_logit"))[0] == pytest.approx(0.5, abs=1e-12)

    def test_uniform_alias(self):
        """mean_logit_uniform equals mean_logit"""
        matrix = make_matrix([[0.1, 0.7, 0.8]], labels=[1])
        assert aggregate(matrix, rule("mean_logit_uniform"))[0] == aggregate(matrix, rule("mean_logit"))[0]

    def test_bias_corrected_zero_offsets(self, synth_matrix):
        """Identical column means make the bias correction a no-op"""
        column = synth_matrix.p_unsafe[:, :1]
        matrix = make_matrix(np.hstack([column, column]), labels=list(synth_matrix.y))
        stats = fit_logit_correction(matrix)
        corrected = aggregate(matrix, rule("bias_corrected_logit_mean"), stats)
        np.testing.assert_allclose(corrected, aggregate(matrix, rule("mean_logit")), atol=1e-12)

    def test_scores_stay_probabilities(self, synth_matrix):
        """Every sweep rule maps into [0, 1]"""
        for values in aggregate_rules(synth_matrix, default_sweep_rules()).values():
            assert values.shape == (synth_matrix.n_samples,)
            assert ((values >= 0) & (values <= 1)).all()

    def test_identical_columns_collapse(self, synth_matrix):
        """When all prompts agree every rule returns that score"""
        column = synth_matrix.p_unsafe[:, [0]]
        matrix = make_matrix(np.repeat(column, 4, axis=1), labels=list(synth_matrix.y))
        for rule_id, values in aggregate_rules(matrix, default_sweep_rules()).items():
            np.testing.assert_allclose(values, column[:, 0], atol=1e-9, err_msg=rule_id)

    def test_column_permutation_invariance(self, synth_matrix):
        """Reordering prompt columns leaves every rule unchanged"""
        expected = aggregate_rules(synth_matrix, default_sweep_rules())
        for perm in ([5, 4, 3, 2, 1, 0], [2, 0, 5, 1, 4, 3]):
            permuted = aggregate_rules(synth_matrix.take_columns(perm), default_sweep_rules())
            for rule_id, values in expected.items():
                np.testing.assert_allclose(permuted[rule_id], values, atol=1e-12, err_msg=rule_id)

    def test_bias_corrected_ignores_zero_mean_offsets(self):
        """Per-prompt logit offsets summing to zero do not move the bias-corrected score"""
        rng = np.random.default_rng(31)
        z = rng.normal(0.0, 1.5, (300, 5))
        offsets = np.array([1.0, -0.5, 0.25, -1.5, 0.75])
        labels = (rng.uniform(0.0, 1.0, 300) < sigmoid(z.mean(axis=1))).astype(int)
        base = make_matrix(sigmoid(z), labels)
        shifted = make_matrix(sigmoid(z + offsets), labels)
        corrected = rule("bias_corrected_logit_mean")
        np.testing.assert_allclose(
            aggregate(shifted, corrected, fit_logit_correction(shifted)),
            aggregate(base, corrected, fit_logit_correction(base)),
            atol=1e-9,
        )

    def test_bias_scale_standardizes_columns(self, synth_matrix):
        """Each corrected column has the pooled mean and population std"""
        stats = fit_logit_correction(synth_matrix)
        z = corrected_logits(synth_matrix, rule("bias_scale_logit_mean"), stats)
        np.testing.assert_allclose(z.mean(axis=0), stats.mu_star, atol=1e-9)
        np.testing.assert_allclose(z.std(axis=0), stats.sigma_star, atol=1e-9)

    def test_bias_only_prompts_recover_latent(self):
        """With unit scales and no noise the bias correction returns sigmoid(z + mean bias)"""
        config = SynthConfig(n_samples=500, k_prompts=7, per_prompt_scale_range=(1.0, 1.0), noise_std=0.0, seed=17)
        matrix, truth = generate_with_truth(config)
        scores = aggregate(matrix, rule("bias_corrected_logit_mean"), fit_logit_correction(matrix))
        np.testing.assert_allclose(scores, sigmoid(truth.latent + truth.bias.mean()), atol=1e-9)

    def test_stats_required(self, tiny_matrix):
        """Correction rules without stats raise"""
        with pytest.raises(RuleError):
            aggregate(tiny_matrix, rule("bias_scale_logit_mean"))

    def test_stats_prompt_mismatch(self, tiny_matrix):
        """Stats fitted on another prompt set are rejected"""
        stats = fit_logit_correction(tiny_matrix.take_columns([0, 1]))
        with pytest.raises(RuleError):
            aggregate(tiny_matrix, rule("bias_scale_logit_mean"), stats)


@pytest.mark.unit
@pytest.mark.aggregation
class TestFitLogitCorrection:
    """Unit tests for fit_logit_correction"""

    def test_identical_columns(self):
        """Equal columns give equal means and mu_star equal to either"""
        matrix = make_matrix([[0.2, 0.2], [0.7, 0.7], [0.4, 0.4]], labels=[1, 0, 1])
        stats = fit_logit_correction(matrix)
        assert stats.mu_hat[0] == stats.mu_hat[1]
        assert stats.mu_star == pytest.approx(stats.mu_hat[0], abs=1e-15)

    def test_constant_column(self):
        """A constant column has zero spread"""
        matrix = make_matrix([[0.3, 0.2], [0.3, 0.8]], labels=[1, 0])
        assert fit_logit_correction(matrix).sigma_hat[0] == 0.0

    def test_pooled_mean(self):
        """Column logit means 1 and 3 pool to 2"""
        p = sigmoid(np.array([[0.0, 2.0], [2.0, 4.0]]))
        stats = fit_logit_correction(make_matrix(p, labels=[1, 0]))
        assert stats.mu_hat == pytest.approx((1.0, 3.0), abs=1e-12)
        assert stats.mu_star == pytest.approx(2.0, abs=1e-12)

    def test_population_std(self):
        """Spread uses the divide-by-N convention"""
        p = sigmoid(np.array([[-1.0], [1.0]]))
        assert fit_logit_correction(make_matrix(p, labels=[1, 0])).sigma_hat[0] == pytest.approx(1.0, abs=1e-12)

    def test_single_sample(self):
        """N < 2 raises"""
        with pytest.raises(InsufficientDataError):
            fit_logit_correction(make_matrix([[0.5, 0.5]], labels=[1]))

    def test_affine_equivariance(self):
        """An affine map of every logit maps the bias-scale logits the same way"""
        rng = np.random.default_rng(3)
        z = rng.uniform(-3.0, 3.0, size=(50, 4)) + np.array([0.0, 0.5, -0.5, 1.0])
        a, b = 2.0, 0.5
        base = make_matrix(sigmoid(z), labels=[1, 0] * 25)
        moved = make_matrix(sigmoid(a * z + b), labels=[1, 0] * 25)
        bs = rule("bias_scale_logit_mean")
        z_base = corrected_logits(base, bs, fit_logit_correction(base))
        z_moved = corrected_logits(moved, bs, fit_logit_correction(moved))
        np.testing.assert_allclose(z_moved, a * z_base + b, atol=1e-9)

    def test_shrink_endpoints(self, synth_matrix):
        """alpha 0 is mean_logit and alpha 1 is bias_scale_logit_mean"""
        stats = fit_logit_correction(synth_matrix)
        zero = aggregate(synth_matrix, rule("bias_scale_shrink", alpha=0.0), stats)
        one = aggregate(synth_matrix, rule("bias_scale_shrink", alpha=1.0), stats)
        np.testing.assert_allclose(zero, aggregate(synth_matrix, rule("mean_logit")), atol=1e-12)
        np.testing.assert_allclose(one, aggregate(synth_matrix, rule("bias_scale_logit_mean"), stats), atol=1e-12)


@pytest.mark.unit
@pytest.mark.aggregation
class TestTopKMean:
    """Unit tests for top_k_mean"""

    def test_k_one_is_top_prompt(self, tiny_matrix):
        """k=1 returns the top-ranked column"""
        np.testing.assert_array_equal(top_k_mean(tiny_matrix, [3, 1, 2], 1), tiny_matrix.column(3))

    def test_k_all_is_mean(self, tiny_matrix):
        """k=K equals mean_prob"""
        np.testing.assert_allclose(top_k_mean(tiny_matrix, [2, 3, 1], 3),
                                   aggregate(tiny_matrix, rule("mean_prob")), atol=1e-12)

    def test_two_of_three(self):
        """Ranking (2, 3, 1), k=2 averages prompts 2 and 3"""
        matrix = make_matrix([[0.1, 0.3, 0.5]], labels=[1])
        assert top_k_mean(matrix, [2, 3, 1], 2)[0] == pytest.approx(0.4, abs=1e-15)

    @pytest.mark.parametrize("ranking,k", [([1, 2], 1), ([1, 2, 2], 1), ([1, 2, 3], 0), ([1, 2, 3], 4)])
    def test_invalid(self, tiny_matrix, ranking, k):
        """Rankings must be permutations and 1 <= k <= K"""
        with pytest.raises(RuleError):
            top_k_mean(tiny_matrix, ranking, k)


@pytest.mark.unit
@pytest.mark.aggregation
class TestRuleCatalogue:
    """Unit tests for rule ids and the sweep catalogue"""

    def test_fifteen_rules(self):
        """Ten plain rules and five shrink levels"""
        ids = [r.rule_id for r in default_sweep_rules()]
        assert len(ids) == len(set(ids)) == 15
        assert ids[0] == "mean_prob"
        assert ids[-5:] == [f"bias_scale_shrink_{a}" for a in ("0.1", "0.25", "0.5", "0.75", "0.9")]

    def test_rule_from_id_round_trip(self):
        """Every catalogue id parses back to the same rule"""
        for r in default_sweep_rules():
            assert rule_from_id(r.rule_id) == r

    def test_unknown_rule(self):
        """Unknown ids raise"""
        with pytest.raises(RuleError):
            rule_from_id("geometric_mean")

    def test_alpha_validation(self):
        """Shrink needs alpha in [0, 1], other rules take none"""
        with pytest.raises(pydantic.ValidationError):
            AggregationRule(kind=RuleKind.BIAS_SCALE_SHRINK)
        with pytest.raises(pydantic.ValidationError):
            AggregationRule(kind=RuleKind.MEAN_PROB, alpha=0.5)

    def test_trim_count(self):
        """floor(0.1 * 15) = 1, and trimming everything raises"""
        assert trim_count(0.1, 15) == 1
        assert trim_count(0.1, 5) == 0
        with pytest.raises(RuleError):
            trim_count(0.5, 4)

    def test_stats_length_validation(self):
        """One mean and one std per prompt"""
        with pytest.raises(pydantic.ValidationError):
            LogitCorrectionStats(prompt_ids=(1, 2), mu_hat=(0.0,), sigma_hat=(1.0, 1.0),
                                 mu_star=0.0, sigma_star=1.0)

    def test_log_constant(self):
        """Clip constant matches -ln(eps)"""
        assert to_logit(1.0) == pytest.approx(-math.log(1e-12), abs=1e-3)
