"""Consumer choice model for a two-tier broadband market with video streaming.

A population of consumers draws independent normal utilities (b, p, v) for
basic broadband, the premium upgrade, and video streaming. Facing a basic
price, a premium increment, and an aggregate video price, each consumer
picks the surplus-maximizing option among:

    none | basic | premium | premium + video

Demand shares and aggregate consumer surplus are exact Gaussian integrals:
with independent utilities each choice region reduces to one bivariate
normal orthant (basic, premium-only) or a one-dimensional integral of
bivariate orthants (premium + video). The integrals are evaluated with
deterministic Gauss-Legendre panels, refined by doubling until the result
is stable to well below the 1e-5 tolerance demanded of the shares. The
Monte Carlo estimators in :mod:`peeringsim.oracle` provide an independent
cross-check.

ISP and streaming-provider profits are exact linear forms in the shares.
All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import (
    Z_CLIP,
    bvn_lower,
    bvn_upper,
    norm_cdf,
    norm_pdf,
    panel_nodes,
    upper_orthant_excess,
)

# Integration range in standardized utility units; the tail mass beyond
# 8.5 sigma is ~1e-17 and cannot move a share at 1e-5 tolerance.
_T_RANGE = 8.5
_QUAD_ORDER = 16
_QUAD_PANELS = 8
_QUAD_MAX_PANELS = 64
_QUAD_TOL = 1e-10


class Choice(enum.Enum):
    NONE = "none"
    BASIC = "basic"
    PREMIUM = "premium"
    PREMIUM_VIDEO = "premium_video"


@dataclass(frozen=True)
class ConsumerPopulation:
    """Independent normal utility distributions and the population size."""

    mu_b: float
    sigma_b: float
    mu_p: float
    sigma_p: float
    mu_v: float
    sigma_v: float
    n_consumers: int = 40_000_000

    def __post_init__(self):
        for name in ("mu_b", "sigma_b", "mu_p", "sigma_p", "mu_v", "sigma_v"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma_b <= 0 or self.sigma_p <= 0 or self.sigma_v <= 0:
            raise ValueError("utility standard deviations must be positive")
        if self.n_consumers <= 0:
            raise ValueError("n_consumers must be positive")

    @classmethod
    def from_means(cls, mu_b, mu_p, mu_v, n_consumers=40_000_000, spread=0.25):
        """Population with sigma = spread * mu on every component."""
        return cls(mu_b, spread * mu_b, mu_p, spread * mu_p,
                   mu_v, spread * mu_v, n_consumers)


@dataclass(frozen=True)
class PriceVector:
    """All posted prices; peering fee may be negative, zero, or positive."""

    p_basic: float
    p_premium_increment: float
    p_video: float
    p_peering: float = 0.0
    p_video_base: float | None = None
    pass_through: float = 1.0

    def __post_init__(self):
        for name in ("p_basic", "p_premium_increment", "p_video", "p_peering"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.0 < self.pass_through <= 1.0:
            raise ValueError("pass_through must lie in (0, 1]")
        if self.p_video_base is None:
            object.__setattr__(
                self, "p_video_base",
                self.p_video - self.pass_through * self.p_peering)

    @classmethod
    def from_fee(cls, p_basic, p_premium_increment, p_peering,
                 p_video_base, pass_through=1.0):
        return cls(
            p_basic=p_basic,
            p_premium_increment=p_premium_increment,
            p_video=video_price(p_video_base, pass_through, p_peering),
            p_peering=p_peering,
            p_video_base=p_video_base,
            pass_through=pass_through,
        )

    @property
    def p_premium_total(self) -> float:
        return self.p_basic + self.p_premium_increment

    @property
    def p_bundle_total(self) -> float:
        return self.p_basic + self.p_premium_increment + self.p_video


@dataclass(frozen=True)
class CostVector:
    """ISP and streaming-provider marginal costs per subscriber-month."""

    c_basic: float
    c_premium_increment: float
    c_video_increment: float
    c_vsp: float = 0.0

    def __post_init__(self):
        for name in ("c_basic", "c_premium_increment", "c_video_increment", "c_vsp"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.c_basic < 0 or self.c_premium_increment < 0 or self.c_vsp < 0:
            raise ValueError("costs other than c_video_increment must be >= 0")


@dataclass(frozen=True)
class DemandShares:
    share_basic: float
    share_premium_only: float
    share_premium_video: float

    def __post_init__(self):
        shares = (self.share_basic, self.share_premium_only, self.share_premium_video)
        if any(s < -1e-12 or s > 1 + 1e-12 for s in shares):
            raise ValueError(f"shares must lie in [0, 1]: {shares}")
        if sum(shares) > 1 + 1e-9:
            raise ValueError(f"shares must sum to at most 1: {shares}")

    @property
    def share_none(self) -> float:
        return 1.0 - self.share_basic - self.share_premium_only - self.share_premium_video

    @property
    def share_subscribed(self) -> float:
        return self.share_basic + self.share_premium_only + self.share_premium_video


@dataclass(frozen=True)
class SurplusBreakdown:
    """Aggregate consumer surplus ($/month) by chosen option."""

    cs_basic: float
    cs_premium_only: float
    cs_premium_video: float
    cs_total: float = field(default=float("nan"))

    def __post_init__(self):
        total = self.cs_basic + self.cs_premium_only + self.cs_premium_video
        if math.isnan(self.cs_total):
            object.__setattr__(self, "cs_total", total)
        elif abs(self.cs_total - total) > 1e-6 * max(1.0, abs(total)):
            raise ValueError("cs_total must equal the sum of the components")


@dataclass(frozen=True)
class ProfitReport:
    isp_profit: float
    vsp_profit: float


def video_price(p_video_base: float, pass_through: float, p_peering: float) -> float:
    """Aggregate video price: base price plus the passed-through peering fee."""
    if not 0.0 < pass_through <= 1.0:
        raise ValueError("pass_through must lie in (0, 1]")
    if not (math.isfinite(p_video_base) and math.isfinite(p_peering)):
        raise ValueError("prices must be finite")
    return p_video_base + pass_through * p_peering


def consumer_choice(b: float, p: float, v: float, prices: PriceVector) -> Choice:
    """Surplus-maximizing option for one consumer.

    Ties are broken toward the richer bundle (premium+video > premium >
    basic > none); under continuous utility distributions ties have zero
    probability, so this affects only determinism, never demand.
    """
    for name, val in (("b", b), ("p", p), ("v", v)):
        if not math.isfinite(val):
            raise ValueError(f"utility {name} must be finite")
    surpluses = (
        (b + p + v - prices.p_basic - prices.p_premium_increment - prices.p_video,
         Choice.PREMIUM_VIDEO),
        (b + p - prices.p_basic - prices.p_premium_increment, Choice.PREMIUM),
        (b - prices.p_basic, Choice.BASIC),
        (0.0, Choice.NONE),
    )
    best = max(surpluses, key=lambda t: t[0])
    # max() keeps the first of equals, which is the highest-priority option
    return best[1]


def _validate_price_arrays(pb, pp, pv):
    for name, arr in (("p_basic", pb), ("p_premium_increment", pp), ("p_video", pv)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} must be finite")


def _zclip(x):
    return np.clip(x, -Z_CLIP, Z_CLIP)


def shares_arrays(pop: ConsumerPopulation, p_basic, p_premium, p_video):
    """Demand shares (basic, premium-only, premium+video) for price arrays.

    Inputs broadcast against each other; returns three arrays of the
    broadcast shape. This is the vectorized workhorse behind
    :func:`demand_shares` and the grid searches in the optimizers.
    """
    pb = np.asarray(p_basic, dtype=float)
    pp = np.asarray(p_premium, dtype=float)
    pv = np.asarray(p_video, dtype=float)
    _validate_price_arrays(pb, pp, pv)
    pb, pp, pv = np.broadcast_arrays(pb, pp, pv)

    sb_, sp_, sv_ = pop.sigma_b, pop.sigma_p, pop.sigma_v
    s_bp = math.hypot(sb_, sp_)
    s_pv = math.hypot(sp_, sv_)
    r_bp = sp_ / s_bp
    r_pv = sp_ / s_pv

    zb = _zclip((pb - pop.mu_b) / sb_)
    zp = _zclip((pp - pop.mu_p) / sp_)
    zv = _zclip((pv - pop.mu_v) / sv_)
    zbp = _zclip((pb + pp - pop.mu_b - pop.mu_p) / s_bp)
    zpv = _zclip((pp + pv - pop.mu_p - pop.mu_v) / s_pv)

    share_basic = norm_cdf(-zb) * bvn_lower(zp, zpv, r_pv)
    share_premium = norm_cdf(zv) * bvn_upper(zp, zbp, r_bp)
    share_video = _video_region_integral(pop, pb, pp, pv, moment=False)
    return share_basic, share_premium, share_video


def surplus_arrays(pop: ConsumerPopulation, p_basic, p_premium, p_video):
    """Per-consumer expected surplus by option, for price arrays."""
    pb = np.asarray(p_basic, dtype=float)
    pp = np.asarray(p_premium, dtype=float)
    pv = np.asarray(p_video, dtype=float)
    _validate_price_arrays(pb, pp, pv)
    pb, pp, pv = np.broadcast_arrays(pb, pp, pv)

    sb_, sp_, sv_ = pop.sigma_b, pop.sigma_p, pop.sigma_v
    s_bp = math.hypot(sb_, sp_)
    s_pv = math.hypot(sp_, sv_)
    r_bp = sp_ / s_bp
    r_pv = sp_ / s_pv

    zb = _zclip((pb - pop.mu_b) / sb_)
    zp = _zclip((pp - pop.mu_p) / sp_)
    zv = _zclip((pv - pop.mu_v) / sv_)
    zbp = _zclip((pb + pp - pop.mu_b - pop.mu_p) / s_bp)
    zpv = _zclip((pp + pv - pop.mu_p - pop.mu_v) / s_pv)

    cs_basic = sb_ * (norm_pdf(zb) - zb * norm_cdf(-zb)) * bvn_lower(zp, zpv, r_pv)
    cs_premium = norm_cdf(zv) * s_bp * upper_orthant_excess(zp, zbp, r_bp)
    cs_video = _video_region_integral(pop, pb, pp, pv, moment=True)
    return cs_basic, cs_premium, cs_video


def _video_region_integral(pop, pb, pp, pv, moment: bool):
    """Integrate the premium+video region over the video utility axis.

    With ``moment=False`` returns the region probability; with
    ``moment=True`` the expected surplus contribution. Gauss-Legendre
    panels double until the result is stable below _QUAD_TOL.
    """
    sb_, sp_, sv_ = pop.sigma_b, pop.sigma_p, pop.sigma_v
    s_bp = math.hypot(sb_, sp_)
    r_bp = sp_ / s_bp

    zv = (pv - pop.mu_v) / sv_
    lo = np.clip(zv, -_T_RANGE, _T_RANGE)
    hi = np.full_like(lo, _T_RANGE)

    def evaluate(panels):
        t, wt = panel_nodes(lo, hi, panels, _QUAD_ORDER)
        v = pop.mu_v + sv_ * t
        h = _zclip((pp[..., None] + pv[..., None] - v - pop.mu_p) / sp_)
        k = _zclip((pb[..., None] + pp[..., None] + pv[..., None] - v
                    - pop.mu_b - pop.mu_p) / s_bp)
        if moment:
            inner = s_bp * upper_orthant_excess(h, k, r_bp)
        else:
            inner = bvn_upper(h, k, r_bp)
        return np.einsum("...n,...n->...", norm_pdf(t) * wt, inner)

    result = evaluate(_QUAD_PANELS)
    panels = _QUAD_PANELS
    while panels < _QUAD_MAX_PANELS:
        panels *= 2
        refined = evaluate(panels)
        if np.max(np.abs(refined - result)) < _QUAD_TOL:
            return refined
        result = refined
    return result


def demand_shares(pop: ConsumerPopulation, prices: PriceVector) -> DemandShares:
    """Probability mass of each choice region under the utility model."""
    sb, sp, sv = shares_arrays(
        pop, prices.p_basic, prices.p_premium_increment, prices.p_video)
    return DemandShares(float(sb), float(sp), float(sv))


def aggregate_surplus(pop: ConsumerPopulation, prices: PriceVector) -> SurplusBreakdown:
    """Aggregate consumer surplus over the population, by chosen option."""
    csb, csp, csv = surplus_arrays(
        pop, prices.p_basic, prices.p_premium_increment, prices.p_video)
    n = pop.n_consumers
    return SurplusBreakdown(n * float(csb), n * float(csp), n * float(csv))


def isp_profit(shares: DemandShares, pop: ConsumerPopulation,
               prices: PriceVector, costs: CostVector) -> float:
    """ISP profit per month (fixed costs excluded)."""
    n = pop.n_consumers
    margin_basic = prices.p_basic - costs.c_basic
    margin_premium = margin_basic + prices.p_premium_increment - costs.c_premium_increment
    margin_video = margin_premium + prices.p_peering - costs.c_video_increment
    return n * (margin_basic * shares.share_basic
                + margin_premium * shares.share_premium_only
                + margin_video * shares.share_premium_video)


def vsp_profit(shares: DemandShares, pop: ConsumerPopulation,
               prices: PriceVector, costs: CostVector) -> float:
    """Aggregate streaming-provider profit per month (fixed costs excluded)."""
    margin = prices.p_video - costs.c_vsp - prices.p_peering
    return pop.n_consumers * margin * shares.share_premium_video
