"""Shared fixtures; expensive solves are session-scoped and timed."""

from __future__ import annotations

import time

import pytest

from peeringsim.dataio import bundled_data_path, load_counties, load_ixps
from peeringsim.equilibrium import (
    MarketTargets,
    calibrate,
    evaluate_point,
    maximize_isp_prices,
    maximize_tier_prices_given_fee,
    regulator_optimal_fee,
)
from peeringsim.geo import build_topology
from peeringsim.market import PriceVector

N_CONSUMERS = 40_000_000
C_VSP = 10.0


def baseline_targets(c_video_increment: float = 3.00) -> MarketTargets:
    return MarketTargets(
        target_p_basic=50.0,
        target_p_premium_increment=20.0,
        target_share_basic=0.25,
        target_share_premium_only=0.125,
        target_share_premium_video=0.375,
        given_c_video_increment=c_video_increment,
        given_p_video_base=21.58,
        given_pass_through=1.0,
    )


@pytest.fixture(scope="session")
def timed_calibration():
    start = time.monotonic()
    result = calibrate(baseline_targets())
    return result, time.monotonic() - start


@pytest.fixture(scope="session")
def calibration(timed_calibration):
    return timed_calibration[0]


@pytest.fixture(scope="session")
def market(calibration):
    pop = calibration.population(N_CONSUMERS)
    costs = calibration.cost_vector(3.00, c_vsp=C_VSP)
    return pop, costs


@pytest.fixture(scope="session")
def isp_optimum(market):
    """Cold full three-price optimization on the calibrated market."""
    pop, costs = market
    return maximize_isp_prices(pop, costs, 21.58, 1.0)


@pytest.fixture(scope="session")
def point_at_fee_zero(market):
    pop, costs = market
    pb, pp = maximize_tier_prices_given_fee(pop, costs, 21.58, 1.0, 0.0)
    return evaluate_point(pop, costs, PriceVector.from_fee(pb, pp, 0.0, 21.58, 1.0))


@pytest.fixture(scope="session")
def point_at_fee_opt(market, isp_optimum):
    pop, costs = market
    pb, pp, fee = isp_optimum
    return evaluate_point(pop, costs, PriceVector.from_fee(pb, pp, fee, 21.58, 1.0))


@pytest.fixture(scope="session")
def regulator_solution(market):
    pop, costs = market
    return regulator_optimal_fee(pop, costs, 21.58, 1.0, (-10.0, 10.0))


@pytest.fixture(scope="session")
def full_topology():
    counties = load_counties(bundled_data_path("us_counties.csv"))
    ixps = load_ixps(bundled_data_path("us_ixps.csv"))
    return build_topology(counties, ixps)
