import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classview.policy import ReorgTrigger, alpha_from_scan_ratio, lazy_waste


class TestObserveCost:
    def test_accumulates(self):
        t = ReorgTrigger(reorg_cost=10.0)
        t.observe_cost(3.0)
        assert t.accumulated == 3.0

    def test_zero_cost_round(self):
        t = ReorgTrigger(reorg_cost=10.0, accumulated=5.0)
        t.observe_cost(0.0)
        assert t.accumulated == 5.0

    def test_sequence_sums(self):
        t = ReorgTrigger(reorg_cost=10.0)
        for c in (2.0, 3.0, 4.0):
            t.observe_cost(c)
        assert t.accumulated == 9.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ReorgTrigger(reorg_cost=1.0).observe_cost(-0.1)


class TestShouldReorganize:
    def test_below_threshold(self):
        assert not ReorgTrigger(reorg_cost=10.0, alpha=1.0, accumulated=5.0).should_reorganize()

    def test_above_threshold(self):
        assert ReorgTrigger(reorg_cost=10.0, alpha=1.0, accumulated=12.0).should_reorganize()

    def test_boundary_inclusive(self):
        assert ReorgTrigger(reorg_cost=10.0, alpha=1.0, accumulated=10.0).should_reorganize()

    def test_reorganized_resets(self):
        t = ReorgTrigger(reorg_cost=10.0, accumulated=11.0)
        t.reorganized(8.0)
        assert t.accumulated == 0.0
        assert t.reorg_cost == 8.0


class TestAlpha:
    def test_zero_ratio_gives_one(self):
        assert alpha_from_scan_ratio(0.0) == 1.0

    def test_hand_value(self):
        # (-0.75 + sqrt(0.75^2 + 4)) / 2
        assert alpha_from_scan_ratio(0.75) == pytest.approx(0.6930, abs=5e-5)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            alpha_from_scan_ratio(-1.0)

    @given(st.floats(0.0, 50.0))
    @settings(max_examples=300, deadline=None)
    def test_is_root_and_in_unit_interval(self, sigma):
        a = alpha_from_scan_ratio(sigma)
        assert 0.0 < a <= 1.0
        assert abs(a * a + sigma * a - 1.0) <= 1e-12


class TestLazyWaste:
    def test_plugged_values(self):
        assert lazy_waste(100, 80, 2.0) == pytest.approx(0.4)

    def test_tight_scan_is_free(self):
        assert lazy_waste(50, 50, 3.0) == 0.0

    def test_fully_wasted_scan(self):
        assert lazy_waste(10, 0, 7.0) == 7.0

    def test_empty_scan(self):
        assert lazy_waste(0, 0, 5.0) == 0.0

    def test_rejects_inverted_counts(self):
        with pytest.raises(ValueError):
            lazy_waste(3, 4, 1.0)
