"""Cross-prompt fragility tests"""
import numpy as np
import pytest

from core.utils.error_handling_standerizer import InsufficientDataError
from metrics.fragility import decile_gaps, decile_slices, decile_table, fragility_profile, sigma_order
from metrics.models import FragilityProfile, StatKind
from tests.conftest import make_matrix


def profile_from(sigma, stat):
    """Profile whose mistake and disagreement rates are both `stat`"""
    sigma = np.asarray(sigma, dtype=float)
    stat = np.asarray(stat, dtype=float)
    return FragilityProfile(mu=np.zeros_like(sigma), sigma=sigma, mistake_rate=stat, disagreement_rate=stat)


@pytest.mark.unit
@pytest.mark.metrics
class TestFragilityProfile:
    """Unit tests for fragility_profile"""

    def test_population_sigma(self):
        """Row (0, 1) has sigma 0.5"""
        profile = fragility_profile(make_matrix([[0.0, 1.0]], labels=[1]))
        assert profile.sigma[0] == 0.5
        assert profile.mu[0] == 0.5

    def test_disagreement_eight_of_fifteen(self):
        """8 unsafe votes out of 15 give 1 - 8/15"""
        matrix = make_matrix([[0.9] * 8 + [0.1] * 7], labels=[1])
        profile = fragility_profile(matrix)
        assert profile.disagreement_rate[0] == pytest.approx(1 - 8 / 15, abs=1e-12)
        assert profile.mistake_rate[0] == pytest.approx(7 / 15, abs=1e-12)

    def test_all_correct(self):
        """Unanimous correct prompts"""
        matrix = make_matrix([[0.9, 0.8], [0.1, 0.2]], labels=[1, 0])
        profile = fragility_profile(matrix)
        assert profile.mistake_rate.tolist() == [0.0, 0.0]
        assert profile.disagreement_rate.tolist() == [0.0, 0.0]

    def test_rates_bounded(self, synth_matrix):
        """Disagreement is at most one half, mistakes within [0, 1]"""
        profile = fragility_profile(synth_matrix)
        assert (profile.disagreement_rate <= 0.5).all()
        assert ((profile.mistake_rate >= 0) & (profile.mistake_rate <= 1)).all()

    def test_decile_summary_attached(self, synth_matrix):
        """Ten or more samples carry the decile table"""
        profile = fragility_profile(synth_matrix)
        assert list(profile.decile_summary["decile"]) == list(range(1, 11))
        assert profile.decile_summary["n"].sum() == synth_matrix.n_samples

    def test_small_matrix_has_no_summary(self, tiny_matrix):
        """Fewer than ten samples skip the deciles"""
        assert fragility_profile(tiny_matrix).decile_summary is None


@pytest.mark.unit
@pytest.mark.metrics
class TestDecileGaps:
    """Unit tests for decile_gaps"""

    def test_monotone_construction(self):
        """N=20, stat = 1[rank > 10] gives D1 0, D10 1"""
        sigma = np.arange(1, 21) / 20
        gap = decile_gaps(profile_from(sigma, (np.arange(1, 21) > 10).astype(float)), StatKind.MISTAKE)
        assert (gap.d1, gap.d10, gap.gap) == (0.0, 1.0, 1.0)

    def test_increasing_stat_positive_gap(self):
        """A stat increasing with sigma has a positive gap"""
        sigma = np.linspace(0.0, 0.5, 50)
        gap = decile_gaps(profile_from(sigma, np.arange(50) / 50), "disagreement")
        assert gap.gap > 0

    def test_ties_by_index(self):
        """Equal sigma keeps sample order"""
        stat = np.arange(20, dtype=float)
        gap = decile_gaps(profile_from(np.zeros(20), stat), StatKind.MISTAKE)
        assert gap.d1 == 0.5
        assert gap.d10 == 18.5

    def test_shuffled_input(self):
        """Deciles follow sigma, not input order"""
        rng = np.random.default_rng(0)
        perm = rng.permutation(20)
        sigma = (np.arange(1, 21) / 20)[perm]
        stat = (np.arange(1, 21) > 10).astype(float)[perm]
        gap = decile_gaps(profile_from(sigma, stat), StatKind.MISTAKE)
        assert gap.gap == 1.0

    def test_too_few_samples(self):
        """Fewer than ten samples raise"""
        with pytest.raises(InsufficientDataError):
            decile_gaps(profile_from(np.arange(5.0), np.zeros(5)), StatKind.MISTAKE)

    def test_slices_cover_everything(self):
        """Decile rank ranges partition 0..N"""
        bounds = decile_slices(23)
        assert bounds[0][0] == 0 and bounds[-1][1] == 23
        assert all(a[1] == b[0] for a, b in zip(bounds, bounds[1:]))

    def test_sigma_order_stable(self):
        """lexsort breaks sigma ties by index"""
        order = sigma_order(profile_from([0.2, 0.1, 0.2, 0.1], np.zeros(4)))
        assert order.tolist() == [1, 3, 0, 2]

    def test_table_matches_gaps(self, synth_matrix):
        """First and last table rows agree with decile_gaps"""
        profile = fragility_profile(synth_matrix)
        table = decile_table(profile)
        gap = decile_gaps(profile, StatKind.DISAGREEMENT)
        assert table["disagreement"].iloc[0] == gap.d1
        assert table["disagreement"].iloc[-1] == gap.d10
