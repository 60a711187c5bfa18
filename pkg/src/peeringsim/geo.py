"""Geographic traffic-sensitive cost model.

The ISP's network is abstracted into three segments: a backbone linking
the interconnection exchange sites, middle-mile links from each county
centroid to its closest exchange, and within-county access networks.
Subscribers (and, under hot-potato delivery, traffic sources) are spread
over counties in proportion to population.

A peering agreement names the subset of exchanges where content may
enter. Locally delivered traffic enters at the agreed exchange closest
to the end user; hot-potato traffic enters at the agreed exchange
closest to the source. Either way it rides the backbone to the exchange
closest to the user, then the fixed middle mile and access segments,
so only the backbone leg varies with the agreement.

All distances are great-circle kilometers. Expected distances are exact
population-weighted sums (no sampling); the Monte Carlo estimators in
the test-suite cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ValidationError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class County:
    fips_code: str
    name: str
    centroid_lat: float
    centroid_lon: float
    population: float
    land_area_km2: float

    def __post_init__(self):
        _check_coords(self.centroid_lat, self.centroid_lon)
        if self.population < 0:
            raise ValidationError(f"county {self.fips_code}: population must be >= 0")
        if not self.land_area_km2 > 0:
            raise ValidationError(f"county {self.fips_code}: land area must be positive")


@dataclass(frozen=True)
class IxpSite:
    name: str
    metro: str
    lat: float
    lon: float
    rank: int

    def __post_init__(self):
        _check_coords(self.lat, self.lon)
        if self.rank < 1:
            raise ValidationError(f"exchange {self.name}: rank must be >= 1")


@dataclass(frozen=True)
class PeeringAgreement:
    """Indices (into Topology.ixps) of the exchanges in the agreement."""

    agreed: tuple[int, ...]

    def __post_init__(self):
        if len(self.agreed) == 0:
            raise ValidationError("a peering agreement needs at least one exchange")
        if len(set(self.agreed)) != len(self.agreed):
            raise ValidationError("agreement lists an exchange twice")


@dataclass(frozen=True)
class ReplicationPolicy:
    """Fraction of requests served from the agreed exchange nearest the user."""

    local_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.local_fraction <= 1.0:
            raise ValidationError("local_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class TrafficCostParams:
    """Unit costs per distance-volume on each segment, and monthly volume.

    Per-unit transport cost rises toward the network edge as traffic
    aggregation falls; the decade-spaced defaults encode that ordering in
    normalized units (absolute dollar levels are scenario inputs).
    """

    volume_down: float = 1.0
    unit_cost_backbone: float = 1.0
    unit_cost_middle: float = 10.0
    unit_cost_access: float = 100.0

    def __post_init__(self):
        for name in ("volume_down", "unit_cost_backbone",
                     "unit_cost_middle", "unit_cost_access"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")


@dataclass(frozen=True)
class DistanceReport:
    ed_backbone_hot: float
    ed_backbone_cold: float
    ed_middle: float
    ed_access: float


def _check_coords(lat, lon):
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValidationError(f"coordinates must be finite: ({lat}, {lon})")
    if abs(lat) > 90.0 or abs(lon) > 180.0:
        raise ValidationError(f"coordinates out of range: ({lat}, {lon})")


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; inputs in decimal degrees, broadcastable."""
    for lat, lon in ((lat1, lon1), (lat2, lon2)):
        la, lo = np.asarray(lat, dtype=float), np.asarray(lon, dtype=float)
        if not (np.all(np.isfinite(la)) and np.all(np.isfinite(lo))):
            raise ValidationError("coordinates must be finite")
        if np.any(np.abs(la) > 90.0) or np.any(np.abs(lo) > 180.0):
            raise ValidationError("coordinates out of range")
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.asarray(lon2, dtype=float)) - np.radians(np.asarray(lon1, dtype=float))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


@dataclass(frozen=True)
class Topology:
    """Immutable county/exchange geometry with cached distance structure."""

    counties: tuple[County, ...]
    ixps: tuple[IxpSite, ...]
    nearest_ixp: np.ndarray          # county -> index of closest exchange
    county_weight: np.ndarray        # county population / total population
    county_ixp_km: np.ndarray        # (n_counties, n_ixps) great-circle km
    ixp_ixp_km: np.ndarray           # (n_ixps, n_ixps)

    @property
    def n_ixps(self) -> int:
        return len(self.ixps)

    def exit_distribution(self) -> np.ndarray:
        """Population mass reaching each exchange as the user-side exit."""
        mass = np.zeros(self.n_ixps)
        np.add.at(mass, self.nearest_ixp, self.county_weight)
        return mass


def build_topology(counties, ixps) -> Topology:
    """Assign every county to its closest exchange (ties to lower rank)."""
    counties = tuple(counties)
    ixps = tuple(sorted(ixps, key=lambda s: s.rank))
    if not counties or not ixps:
        raise ValidationError("topology needs at least one county and one exchange")
    ranks = [s.rank for s in ixps]
    if len(set(ranks)) != len(ranks):
        raise ValidationError("exchange ranks must be unique")
    seen = set()
    for c in counties:
        if c.fips_code in seen:
            raise ValidationError(f"duplicate county fips code {c.fips_code}")
        seen.add(c.fips_code)
    total_pop = sum(c.population for c in counties)
    if total_pop <= 0:
        raise ValidationError("total population must be positive")

    c_lat = np.array([c.centroid_lat for c in counties])
    c_lon = np.array([c.centroid_lon for c in counties])
    x_lat = np.array([s.lat for s in ixps])
    x_lon = np.array([s.lon for s in ixps])
    county_ixp = haversine(c_lat[:, None], c_lon[:, None], x_lat[None, :], x_lon[None, :])
    ixp_ixp = haversine(x_lat[:, None], x_lon[:, None], x_lat[None, :], x_lon[None, :])
    # argmin returns the first minimum; sites are rank-ordered, so ties
    # resolve toward the lower rank
    nearest = np.argmin(county_ixp, axis=1)
    weight = np.array([c.population for c in counties]) / total_pop
    return Topology(counties, ixps, nearest, weight, county_ixp, ixp_ixp)


def _agreed_array(topology: Topology, agreement: PeeringAgreement) -> np.ndarray:
    agreed = np.asarray(agreement.agreed, dtype=int)
    if np.any(agreed < 0) or np.any(agreed >= topology.n_ixps):
        raise ValidationError(f"agreement indices out of range: {agreement.agreed}")
    return agreed


def nearest_agreed(topology: Topology, agreement: PeeringAgreement) -> np.ndarray:
    """Per county, the agreed exchange closest to the county centroid."""
    agreed = _agreed_array(topology, agreement)
    sub = topology.county_ixp_km[:, agreed]
    return agreed[np.argmin(sub, axis=1)]


def entry_distribution(topology: Topology, agreement: PeeringAgreement) -> np.ndarray:
    """Hot-potato entry mass per exchange (zero off the agreement).

    Sources follow the user population, so the mass at an agreed exchange
    is the population share of counties for which it is the closest
    agreed exchange.
    """
    entry = np.zeros(topology.n_ixps)
    np.add.at(entry, nearest_agreed(topology, agreement), topology.county_weight)
    return entry


def expected_backbone_hot(topology: Topology, agreement: PeeringAgreement) -> float:
    """Mean backbone km under hot-potato delivery.

    Entry (source side) and exit (user side) are independent, so the
    expectation factorizes into entry and exit distributions over
    exchanges instead of a county-pair double sum.
    """
    entry = entry_distribution(topology, agreement)
    exit_ = topology.exit_distribution()
    return float(entry @ topology.ixp_ixp_km @ exit_)


def expected_backbone_cold(topology: Topology, agreement: PeeringAgreement) -> float:
    """Mean backbone km under local delivery from the nearest agreed exchange."""
    na = nearest_agreed(topology, agreement)
    legs = topology.ixp_ixp_km[na, topology.nearest_ixp]
    return float(topology.county_weight @ legs)


def expected_middle_mile(topology: Topology) -> float:
    """Mean km from the user's county centroid to its closest exchange."""
    legs = topology.county_ixp_km[np.arange(len(topology.counties)), topology.nearest_ixp]
    return float(topology.county_weight @ legs)


def expected_access(topology: Topology) -> float:
    """Mean within-county km, with each county as an equal-area disk.

    Users uniform on a disk of the county's land area sit at mean distance
    2r/3 from the center.
    """
    areas = np.array([c.land_area_km2 for c in topology.counties])
    mean_radius = (2.0 / 3.0) * np.sqrt(areas / np.pi)
    return float(topology.county_weight @ mean_radius)


def distance_report(topology: Topology, agreement: PeeringAgreement) -> DistanceReport:
    return DistanceReport(
        ed_backbone_hot=expected_backbone_hot(topology, agreement),
        ed_backbone_cold=expected_backbone_cold(topology, agreement),
        ed_middle=expected_middle_mile(topology),
        ed_access=expected_access(topology),
    )


def partial_replication_cost(topology: Topology, agreement: PeeringAgreement,
                             policy: ReplicationPolicy,
                             params: TrafficCostParams) -> float:
    """Backbone cost when a fraction of requests is replicated locally.

    Linear blend of the local-delivery and hot-potato expected backbone
    distances, scaled by backbone unit cost and downstream volume.
    """
    x = policy.local_fraction
    blend = (x * expected_backbone_cold(topology, agreement)
             + (1.0 - x) * expected_backbone_hot(topology, agreement))
    return params.unit_cost_backbone * params.volume_down * blend


def total_traffic_cost(topology: Topology, agreement: PeeringAgreement,
                       policy: ReplicationPolicy, params: TrafficCostParams) -> float:
    """Traffic-sensitive cost across backbone, middle mile, and access.

    The middle-mile and access terms do not depend on the agreement or the
    replication policy; they matter only when comparing cost levels.
    """
    fixed = (params.unit_cost_middle * expected_middle_mile(topology)
             + params.unit_cost_access * expected_access(topology))
    return (partial_replication_cost(topology, agreement, policy, params)
            + params.volume_down * fixed)


def rank_subset(topology: Topology, n: int) -> PeeringAgreement:
    """Agreement on the n top-ranked exchanges."""
    if not 1 <= n <= topology.n_ixps:
        raise ValidationError(f"subset size {n} out of range 1..{topology.n_ixps}")
    return PeeringAgreement(tuple(range(n)))


@dataclass(frozen=True)
class InterconnectSweepRow:
    n_sites: int
    local_fraction: float
    agreed: tuple[int, ...]
    ed_backbone_hot: float
    ed_backbone_cold: float
    backbone_cost: float
    total_cost: float


def sweep_interconnection(topology: Topology, n_range, x_list,
                          params: TrafficCostParams,
                          subset_rule: str = "by_rank") -> list[InterconnectSweepRow]:
    """Cost table over agreement size and local-delivery fraction.

    ``by_rank`` nests agreements down the rank order. ``best_subset``
    exhaustively minimizes total cost per (size, fraction) pair and is
    guarded to at most 15 exchanges.
    """
    if subset_rule not in ("by_rank", "best_subset"):
        raise ValidationError(f"unknown subset rule {subset_rule!r}")
    if subset_rule == "best_subset" and topology.n_ixps > 15:
        raise ValidationError(
            "best_subset search is limited to 15 exchanges "
            f"(topology has {topology.n_ixps})")
    fixed = (params.unit_cost_middle * expected_middle_mile(topology)
             + params.unit_cost_access * expected_access(topology)) * params.volume_down

    rows = []
    for n in n_range:
        n = int(n)
        if subset_rule == "by_rank":
            candidates = [rank_subset(topology, n)]
        else:
            if not 1 <= n <= topology.n_ixps:
                raise ValidationError(f"subset size {n} out of range")
            candidates = [PeeringAgreement(c)
                          for c in combinations(range(topology.n_ixps), n)]
        per_cand = []
        for agreement in candidates:
            hot = expected_backbone_hot(topology, agreement)
            cold = expected_backbone_cold(topology, agreement)
            per_cand.append((agreement, hot, cold))
        for x in x_list:
            x = float(x)
            ReplicationPolicy(x)  # bounds check
            best = min(
                per_cand,
                key=lambda t: x * t[2] + (1.0 - x) * t[1],
            )
            agreement, hot, cold = best
            backbone = (params.unit_cost_backbone * params.volume_down
                        * (x * cold + (1.0 - x) * hot))
            rows.append(InterconnectSweepRow(
                n_sites=n, local_fraction=x, agreed=agreement.agreed,
                ed_backbone_hot=hot, ed_backbone_cold=cold,
                backbone_cost=backbone, total_cost=backbone + fixed))
    return rows


def estimate_cd(cost_with_agreement: float, cost_baseline: float,
                video_subscribers: float) -> float:
    """Incremental monthly cost per video subscriber implied by a cost delta."""
    if video_subscribers <= 0:
        raise ValidationError("video_subscribers must be positive")
    return (cost_with_agreement - cost_baseline) / video_subscribers


def mc_distance_estimate(topology: Topology, agreement: PeeringAgreement,
                         n_samples: int, seed: int):
    """Monte Carlo mean (and standard error) of the four segment distances.

    Samples independent source/user counties from the population weights
    and walks the same routing rules as the closed-form expectations; used
    as the independent oracle for the factorized computations.
    """
    rng = np.random.default_rng(seed)
    na = nearest_agreed(topology, agreement)
    n_counties = len(topology.counties)
    src = rng.choice(n_counties, size=n_samples, p=topology.county_weight)
    usr = rng.choice(n_counties, size=n_samples, p=topology.county_weight)

    hot_legs = topology.ixp_ixp_km[na[src], topology.nearest_ixp[usr]]
    cold_legs = topology.ixp_ixp_km[na[usr], topology.nearest_ixp[usr]]
    middle_legs = topology.county_ixp_km[usr, topology.nearest_ixp[usr]]
    areas = np.array([c.land_area_km2 for c in topology.counties])
    radii = np.sqrt(areas / np.pi)
    # distance of a uniform point on a disk from the center: r * sqrt(U)
    access_legs = radii[usr] * np.sqrt(rng.uniform(size=n_samples))

    out = {}
    for key, legs in (("hot", hot_legs), ("cold", cold_legs),
                      ("middle", middle_legs), ("access", access_legs)):
        mean = float(np.mean(legs))
        se = float(np.std(legs, ddof=1) / np.sqrt(n_samples))
        out[key] = (mean, se)
    return out
