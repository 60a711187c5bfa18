"""Peering economics toolkit.

Simulates a two-sided broadband/streaming market (consumer choice, demand,
surplus, profits), solves the ISP's and a regulator's pricing problems,
calibrates the model from market observables, and evaluates the geographic
traffic-sensitive cost of interconnection agreements.
"""

__version__ = "0.1.0"

from .equilibrium import (
    CalibrationResult,
    CdSweepPoint,
    EquilibriumPoint,
    FeeSweepPoint,
    MarketTargets,
    calibrate,
    evaluate_point,
    maximize_isp_prices,
    maximize_tier_prices_given_fee,
    regulator_optimal_fee,
    sweep_cd,
    sweep_fee,
)
from .errors import ConvergenceError, PeeringSimError, ValidationError
from .geo import (
    County,
    DistanceReport,
    IxpSite,
    PeeringAgreement,
    ReplicationPolicy,
    Topology,
    TrafficCostParams,
    build_topology,
    distance_report,
    entry_distribution,
    estimate_cd,
    expected_access,
    expected_backbone_cold,
    expected_backbone_hot,
    expected_middle_mile,
    haversine,
    partial_replication_cost,
    rank_subset,
    sweep_interconnection,
    total_traffic_cost,
)
from .market import (
    Choice,
    ConsumerPopulation,
    CostVector,
    DemandShares,
    PriceVector,
    ProfitReport,
    SurplusBreakdown,
    aggregate_surplus,
    consumer_choice,
    demand_shares,
    isp_profit,
    video_price,
    vsp_profit,
)
from .dataio import (
    ResultTable,
    Scenario,
    bundled_data_path,
    load_counties,
    load_ixps,
    load_scenario,
    read_results,
    write_results,
)

__all__ = [name for name in dir() if not name.startswith("_")]
