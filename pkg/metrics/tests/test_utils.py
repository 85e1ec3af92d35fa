"""Calibration and ranking metric tests"""
import math

import numpy as np
import pytest

from core.utils.error_handling_standerizer import UndefinedMetricError, ValidationError
from metrics.models import ECE_W15, BinScheme, EceSpec, EvalReport
from metrics.utils import (
    auprc,
    auroc,
    bin_index,
    ece,
    error_at_threshold,
    evaluate,
    metric_ids,
    metric_value,
    nll,
    prepare,
    reliability_bins,
)

EQUAL_MASS_15 = EceSpec(bins=15, scheme=BinScheme.EQUAL_MASS)


@pytest.fixture
def random_scores():
    rng = np.random.default_rng(5)
    p = rng.uniform(0.0, 1.0, 300)
    y = (rng.uniform(0.0, 1.0, 300) < p).astype(int)
    return p, y


@pytest.mark.unit
@pytest.mark.metrics
class TestNll:
    """Unit tests for nll"""

    def test_coin_flip(self):
        """p = 0.5 costs ln 2 per sample"""
        assert nll([0.5, 0.5], ["U", "S"]) == pytest.approx(math.log(2), abs=1e-15)

    def test_clipped_zero(self):
        """p = 0 on an unsafe sample costs -ln(eps)"""
        assert nll([0.0], ["U"]) == pytest.approx(27.6310, abs=1e-4)

    def test_uniform_weights(self, random_scores):
        """Weights all equal to 3 change nothing"""
        p, y = random_scores
        assert nll(p, y, weights=np.full(len(p), 3.0)) == pytest.approx(nll(p, y), abs=1e-12)

    def test_length_mismatch(self):
        """Scores and labels must align"""
        with pytest.raises(ValidationError):
            nll([0.5, 0.5], [1])

    def test_negative_weights(self):
        """Weights must be nonnegative"""
        with pytest.raises(ValidationError):
            nll([0.5, 0.5], [1, 0], weights=[1.0, -1.0])


@pytest.mark.unit
@pytest.mark.metrics
class TestEce:
    """Unit tests for ece and bin_index"""

    def test_single_occupied_bin(self):
        """Two samples at 0.8 with one unsafe give 0.3"""
        assert ece([0.8, 0.8], ["U", "S"], ECE_W15) == pytest.approx(0.3, abs=1e-12)

    def test_perfect_two_point(self):
        """Confident and correct is perfectly calibrated"""
        assert ece([0.0, 1.0], ["S", "U"], ECE_W15) == 0.0

    def test_uniform_weights(self, random_scores):
        """Uniform weights equal the unweighted value"""
        p, y = random_scores
        for spec in (ECE_W15, EQUAL_MASS_15):
            assert ece(p, y, spec, weights=np.full(len(p), 0.7)) == pytest.approx(ece(p, y, spec), abs=1e-12)

    def test_bin_edges(self):
        """Edges go to the higher bin, p = 1 to the top bin"""
        idx = bin_index(np.array([0.0, 0.2, 0.4, 0.9999, 1.0]), ECE_W15)
        assert idx.tolist() == [0, 3, 6, 14, 14]

    def test_equal_mass_ties_by_index(self):
        """Equal scores split across bins in sample order"""
        idx = bin_index(np.full(4, 0.5), EceSpec(bins=2, scheme=BinScheme.EQUAL_MASS))
        assert idx.tolist() == [0, 0, 1, 1]

    def test_bounded(self, random_scores):
        """ECE lies in [0, 1]"""
        p, y = random_scores
        assert 0.0 <= ece(p, y) <= 1.0

    def test_metric_ids(self):
        """ids parse back to specs"""
        assert EceSpec.from_id("ece_m15") == EQUAL_MASS_15
        assert ECE_W15.metric_id == "ece_w15"
        with pytest.raises(ValueError):
            EceSpec.from_id("brier")


@pytest.mark.unit
@pytest.mark.metrics
class TestReliabilityBins:
    """Unit tests for reliability_bins"""

    def test_two_point_example(self):
        """One occupied bin at conf 0.8 and freq 0.5"""
        bins = reliability_bins([0.8, 0.8], ["U", "S"], ECE_W15)
        assert len(bins) == 1
        row = bins.iloc[0]
        assert row["bin"] == 12
        assert row["conf"] == pytest.approx(0.8)
        assert row["freq"] == 0.5
        assert row["mass"] == 1.0

    def test_consistent_with_ece(self, random_scores):
        """Mass-weighted |freq - conf| reproduces ECE"""
        p, y = random_scores
        bins = reliability_bins(p, y, ECE_W15)
        from_bins = float((bins["mass"] * (bins["freq"] - bins["conf"]).abs()).sum())
        assert from_bins == pytest.approx(ece(p, y, ECE_W15), abs=1e-12)
        assert bins["count"].sum() == len(p)


@pytest.mark.unit
@pytest.mark.metrics
class TestAuroc:
    """Unit tests for auroc"""

    def test_perfect_separation(self):
        """All unsafe above all safe"""
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_three_of_four_pairs(self):
        """(0.1, 0.4, 0.35, 0.8) with (S, S, U, U) is 0.75"""
        assert auroc([0.1, 0.4, 0.35, 0.8], ["S", "S", "U", "U"]) == 0.75

    def test_all_ties(self):
        """Equal scores give 0.5"""
        assert auroc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_single_class(self):
        """One class only is undefined, not 0.5"""
        with pytest.raises(UndefinedMetricError):
            auroc([0.2, 0.7], [1, 1])

    def test_integer_weights_duplicate_samples(self):
        """A weight of 2 counts the sample twice"""
        weighted = auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], weights=[1, 2, 1, 1])
        assert weighted == pytest.approx(auroc([0.1, 0.4, 0.4, 0.35, 0.8], [0, 0, 0, 1, 1]), abs=1e-15)

    def test_invariant_under_increasing_transform(self, random_scores):
        """Only the ranking matters"""
        p, y = random_scores
        assert auroc(0.1 + 0.5 * p ** 2, y) == pytest.approx(auroc(p, y), abs=1e-12)


@pytest.mark.unit
@pytest.mark.metrics
class TestAuprc:
    """Unit tests for auprc"""

    def test_single_positive_first(self):
        """One positive ranked first of five"""
        assert auprc([0.9, 0.5, 0.4, 0.3, 0.2], [1, 0, 0, 0, 0]) == 1.0

    def test_hand_computed(self):
        """(0.9, 0.8, 0.7) with (U, S, U) is (1 + 2/3) / 2"""
        assert auprc([0.9, 0.8, 0.7], ["U", "S", "U"]) == pytest.approx(5.0 / 6.0, abs=1e-12)

    def test_all_positive(self):
        """Every sample unsafe"""
        assert auprc([0.1, 0.6, 0.3], [1, 1, 1]) == pytest.approx(1.0, abs=1e-15)

    def test_no_positives(self):
        """No unsafe samples is undefined"""
        with pytest.raises(UndefinedMetricError):
            auprc([0.1, 0.6], [0, 0])

    def test_invariant_under_increasing_transform(self, random_scores):
        """Only the ranking matters"""
        p, y = random_scores
        assert auprc(0.1 + 0.5 * p ** 2, y) == pytest.approx(auprc(p, y), abs=1e-12)


@pytest.mark.unit
@pytest.mark.metrics
class TestErrorAtThreshold:
    """Unit tests for error_at_threshold"""

    def test_boundary_is_unsafe(self):
        """p = 0.5 predicts unsafe"""
        assert error_at_threshold([0.5], ["U"]) == 0.0

    def test_all_wrong(self):
        """Both predictions flipped"""
        assert error_at_threshold([0.4, 0.6], ["U", "S"]) == 1.0

    def test_all_right(self):
        """Both predictions correct"""
        assert error_at_threshold([0.4, 0.6], ["S", "U"]) == 0.0


@pytest.mark.unit
@pytest.mark.metrics
class TestEvaluate:
    """Unit tests for evaluate and metric_value"""

    def test_full_bundle(self, random_scores):
        """Every report metric present"""
        p, y = random_scores
        report = evaluate(p, y)
        assert isinstance(report, EvalReport)
        assert set(report.as_row()) == set(metric_ids())
        assert report.n == len(p)
        assert report.undefined == []

    def test_undefined_ranking_metrics(self):
        """Single-class input records None instead of raising"""
        report = evaluate([0.2, 0.3], [0, 0])
        assert report.auroc is None
        assert report.auprc is None
        assert set(report.undefined) == {"auroc", "auprc"}

    def test_metric_value_dispatch(self, random_scores):
        """Metric ids map to the metric functions"""
        p, y = random_scores
        assert metric_value("nll", p, y) == nll(p, y)
        assert metric_value("ece_m15", p, y) == ece(p, y, EQUAL_MASS_15)
        assert metric_value("err05", p, y) == error_at_threshold(p, y)

    def test_unknown_metric(self):
        """Unknown ids raise"""
        with pytest.raises(ValidationError):
            metric_value("brier", [0.5], [1])

    def test_prepare_accepts_label_values(self):
        """Letters and integers give the same indicator"""
        _, y1, _ = prepare([0.1, 0.2], ["U", "S"])
        _, y2, _ = prepare([0.1, 0.2], [1, 0])
        assert y1.tolist() == y2.tolist() == [1, 0]
