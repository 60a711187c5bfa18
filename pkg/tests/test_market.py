"""Consumer choice, demand, surplus, and profit behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peeringsim.market import (
    Choice,
    ConsumerPopulation,
    CostVector,
    DemandShares,
    PriceVector,
    aggregate_surplus,
    consumer_choice,
    demand_shares,
    isp_profit,
    shares_arrays,
    video_price,
    vsp_profit,
)
from peeringsim.oracle import classify_choices, mc_market_estimate

PRICES = PriceVector(p_basic=50.0, p_premium_increment=20.0, p_video=26.17)


def surplus_of(choice, b, p, v, prices):
    return {
        Choice.NONE: 0.0,
        Choice.BASIC: b - prices.p_basic,
        Choice.PREMIUM: b + p - prices.p_basic - prices.p_premium_increment,
        Choice.PREMIUM_VIDEO: b + p + v - prices.p_bundle_total,
    }[choice]


class TestConsumerChoice:
    def test_prefers_full_bundle(self):
        # surpluses: none 0, basic 10, premium 15, premium+video 18.83
        assert consumer_choice(60.0, 25.0, 30.0, PRICES) == Choice.PREMIUM_VIDEO

    def test_zero_utilities_stay_out(self):
        assert consumer_choice(0.0, 0.0, 0.0, PRICES) == Choice.NONE

    def test_basic_beats_negative_upgrades(self):
        # surpluses: basic 5, premium -10, premium+video -36.17
        assert consumer_choice(55.0, 5.0, 0.0, PRICES) == Choice.BASIC

    def test_tie_breaks_toward_richer_bundle(self):
        # both premium choices give 10; video must win the tie
        prices = PriceVector(p_basic=40.0, p_premium_increment=10.0, p_video=20.0)
        assert consumer_choice(50.0, 10.0, 20.0, prices) == Choice.PREMIUM_VIDEO

    def test_rejects_non_finite_utilities(self):
        with pytest.raises(ValueError):
            consumer_choice(float("nan"), 0.0, 0.0, PRICES)

    @settings(max_examples=200, deadline=None)
    @given(b=st.floats(-300, 300), p=st.floats(-300, 300), v=st.floats(-300, 300),
           pb=st.floats(1, 120), pp=st.floats(1, 80), pv=st.floats(1, 80))
    def test_choice_maximizes_surplus(self, b, p, v, pb, pp, pv):
        prices = PriceVector(p_basic=pb, p_premium_increment=pp, p_video=pv)
        chosen = consumer_choice(b, p, v, prices)
        best = surplus_of(chosen, b, p, v, prices)
        assert best >= 0.0 or chosen == Choice.NONE
        for alt in Choice:
            assert best >= surplus_of(alt, b, p, v, prices) - 1e-12

    def test_vectorized_classifier_matches_scalar(self):
        rng = np.random.default_rng(7)
        b = rng.normal(56, 14, 500)
        p = rng.normal(19, 5, 500)
        v = rng.normal(28, 7, 500)
        codes = classify_choices(b, p, v, PRICES)
        order = [Choice.NONE, Choice.BASIC, Choice.PREMIUM, Choice.PREMIUM_VIDEO]
        for i in range(500):
            assert order[codes[i]] == consumer_choice(b[i], p[i], v[i], PRICES)


@pytest.fixture(scope="module")
def pop():
    return ConsumerPopulation.from_means(56.11, 18.90, 27.75, n_consumers=1_000_000)


class TestDemandShares:
    def test_calibrated_market_hits_observed_shares(self, calibration):
        pop = calibration.population()
        prices = PriceVector.from_fee(50.0, 20.0, calibration.p_peering, 21.58, 1.0)
        shares = demand_shares(pop, prices)
        assert shares.share_basic == pytest.approx(0.25, abs=1e-6)
        assert shares.share_premium_only == pytest.approx(0.125, abs=1e-6)
        assert shares.share_premium_video == pytest.approx(0.375, abs=1e-6)

    def test_unaffordable_market_empties(self, pop):
        prices = PriceVector(p_basic=1e9, p_premium_increment=20.0, p_video=26.0)
        shares = demand_shares(pop, prices)
        assert shares.share_basic == 0.0
        assert shares.share_premium_only == 0.0
        assert shares.share_premium_video == 0.0

    def test_rejects_non_finite_prices(self, pop):
        with pytest.raises(ValueError):
            demand_shares(pop, PriceVector(50.0, 20.0, float("inf")))

    def test_matches_monte_carlo_classification(self, pop):
        est = mc_market_estimate(pop, PRICES, 2_000_000, seed=11)
        sb, sp, sv = shares_arrays(pop, 50.0, 20.0, 26.17)
        for quad, mc, se in zip((sb, sp, sv), est.shares, est.shares_se):
            assert float(quad) == pytest.approx(mc, abs=3.0 * se)

    def test_partition_sums_to_at_most_one(self, pop):
        rng = np.random.default_rng(3)
        pb = rng.uniform(20, 90, 50)
        pp = rng.uniform(2, 45, 50)
        pv = rng.uniform(5, 50, 50)
        sb, sp, sv = shares_arrays(pop, pb, pp, pv)
        total = sb + sp + sv
        assert np.all(total <= 1.0 + 1e-9)
        assert np.all(sb >= 0) and np.all(sp >= 0) and np.all(sv >= 0)

    def test_basic_price_monotonicity(self, pop):
        pb = np.linspace(30.0, 90.0, 40)
        sb, sp, sv = shares_arrays(pop, pb, 20.0, 26.17)
        subscribed = sb + sp + sv
        assert np.all(np.diff(subscribed) <= 1e-10)

    def test_video_price_monotonicity(self, pop):
        pv = np.linspace(10.0, 50.0, 40)
        _, _, sv = shares_arrays(pop, 50.0, 20.0, pv)
        assert np.all(np.diff(sv) <= 1e-10)


class TestAggregateSurplus:
    def test_unaffordable_market_zero_surplus(self, pop):
        prices = PriceVector(p_basic=1e8, p_premium_increment=1e8, p_video=1e8)
        s = aggregate_surplus(pop, prices)
        assert s.cs_basic == 0.0 and s.cs_premium_only == 0.0
        assert s.cs_premium_video == 0.0 and s.cs_total == 0.0

    def test_components_nonnegative_and_sum(self, pop):
        s = aggregate_surplus(pop, PRICES)
        assert s.cs_basic >= 0 and s.cs_premium_only >= 0 and s.cs_premium_video >= 0
        assert s.cs_total == pytest.approx(
            s.cs_basic + s.cs_premium_only + s.cs_premium_video, rel=1e-12)

    def test_matches_monte_carlo(self, pop):
        est = mc_market_estimate(pop, PRICES, 2_000_000, seed=13)
        s = aggregate_surplus(pop, PRICES)
        quad = np.array([s.cs_basic, s.cs_premium_only, s.cs_premium_video])
        quad /= pop.n_consumers
        for q, mc, se in zip(quad, est.surplus, est.surplus_se):
            assert q == pytest.approx(mc, abs=3.0 * se)

    def test_scales_linearly_with_population(self):
        small = ConsumerPopulation.from_means(56.11, 18.90, 27.75, n_consumers=1000)
        large = ConsumerPopulation.from_means(56.11, 18.90, 27.75, n_consumers=2000)
        s1 = aggregate_surplus(small, PRICES)
        s2 = aggregate_surplus(large, PRICES)
        assert s2.cs_total == pytest.approx(2.0 * s1.cs_total, rel=1e-12)


class TestProfits:
    def test_zero_shares_zero_profit(self, pop):
        shares = DemandShares(0.0, 0.0, 0.0)
        costs = CostVector(16.5, 19.0, 3.0)
        prices = PriceVector.from_fee(50.0, 20.0, 4.59, 21.58, 1.0)
        assert isp_profit(shares, pop, prices, costs) == 0.0
        assert vsp_profit(shares, pop, prices, costs) == 0.0

    def test_isp_profit_linear_form(self, pop):
        # margins: basic 33.50, premium 34.50, video 36.09 on one million
        shares = DemandShares(0.25, 0.125, 0.375)
        costs = CostVector(16.5, 19.0, 3.0)
        prices = PriceVector.from_fee(50.0, 20.0, 4.59, 21.58, 1.0)
        expected = (0.25e6 * 33.50 + 0.125e6 * 34.50 + 0.375e6 * 36.09)
        assert expected == 26_221_250.0
        assert isp_profit(shares, pop, prices, costs) == pytest.approx(expected, rel=1e-12)

    def test_vsp_profit_linear_form(self, pop):
        shares = DemandShares(0.25, 0.125, 0.375)
        costs = CostVector(16.5, 19.0, 3.0, c_vsp=10.0)
        prices = PriceVector.from_fee(50.0, 20.0, 4.59, 21.58, 1.0)
        expected = (26.17 - 10.0 - 4.59) * 0.375e6
        assert expected == pytest.approx(4_342_500.0, rel=1e-12)
        assert vsp_profit(shares, pop, prices, costs) == pytest.approx(expected, rel=1e-9)

    def test_profit_doubles_with_population(self):
        shares = DemandShares(0.2, 0.1, 0.3)
        costs = CostVector(16.5, 19.0, 3.0)
        prices = PriceVector.from_fee(50.0, 20.0, 4.59, 21.58, 1.0)
        small = ConsumerPopulation.from_means(56.0, 19.0, 28.0, n_consumers=1000)
        large = ConsumerPopulation.from_means(56.0, 19.0, 28.0, n_consumers=2000)
        assert (isp_profit(shares, large, prices, costs)
                == pytest.approx(2 * isp_profit(shares, small, prices, costs), rel=1e-12))


class TestVideoPrice:
    def test_full_pass_through(self):
        assert video_price(21.58, 1.0, 4.59) == pytest.approx(26.17, abs=1e-12)

    def test_zero_fee(self):
        assert video_price(21.58, 1.0, 0.0) == pytest.approx(21.58)

    def test_partial_pass_through(self):
        assert video_price(21.58, 0.5, 4.00) == pytest.approx(23.58)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            video_price(21.58, 0.0, 4.59)
        with pytest.raises(ValueError):
            video_price(21.58, 1.5, 4.59)


class TestValidation:
    def test_population_requires_positive_sigmas(self):
        with pytest.raises(ValueError):
            ConsumerPopulation(56.0, 0.0, 19.0, 5.0, 28.0, 7.0)

    def test_population_requires_positive_count(self):
        with pytest.raises(ValueError):
            ConsumerPopulation(56.0, 14.0, 19.0, 5.0, 28.0, 7.0, n_consumers=0)

    def test_negative_fee_allowed(self):
        prices = PriceVector.from_fee(50.0, 20.0, -2.0, 21.58, 1.0)
        assert prices.p_video == pytest.approx(19.58)

    def test_cost_vector_sign_rules(self):
        CostVector(16.5, 19.0, -1.12)  # video increment may be negative
        with pytest.raises(ValueError):
            CostVector(-1.0, 19.0, 3.0)

    def test_share_bounds_enforced(self):
        with pytest.raises(ValueError):
            DemandShares(0.7, 0.5, 0.2)
