"""Pricing layers on top of the consumer model.

Four related problems share the profit machinery:

* the ISP's unconstrained choice of basic price, premium increment, and
  peering fee (the video price follows the fee through the pass-through
  rule);
* the ISP's tier-price best response when the fee is set externally;
* a regulator's bilevel problem: choose the fee maximizing aggregate
  consumer surplus given that the ISP best-responds with tier prices;
* the inverse problem: recover utility means, ISP costs, and the implied
  fee from observed prices and subscription shares.

Optimizers are derivative-free (Nelder-Mead seeded from a coarse grid)
because that keeps the whole pipeline dependency-light and robust; every
returned optimum is certified against a surrounding probe grid, and
multi-start disagreement is reported as an error rather than resolved
silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize, root

from .errors import ConvergenceError, ValidationError
from .market import (
    ConsumerPopulation,
    CostVector,
    DemandShares,
    PriceVector,
    ProfitReport,
    SurplusBreakdown,
    aggregate_surplus,
    demand_shares,
    isp_profit,
    shares_arrays,
    surplus_arrays,
    video_price,
    vsp_profit,
)

_PROBE_STEP = 0.25          # certificate probe spacing around an optimum
_PROBE_SLACK = 1e-9         # allowed probe superiority before flagging
_AMBIGUITY_DISTANCE = 0.25  # distinct optima closer than this are "the same"
_AMBIGUITY_GAP = 1e-8       # objective gap treating two optima as tied
_XATOL = 5e-4               # simplex refinement tolerance, dollars


@dataclass(frozen=True)
class MarketTargets:
    """Observed market anchors used to pin down the model parameters."""

    target_p_basic: float
    target_p_premium_increment: float
    target_share_basic: float
    target_share_premium_only: float
    target_share_premium_video: float
    given_c_video_increment: float
    given_p_video_base: float
    given_pass_through: float = 1.0
    sigma_ratio: float = 0.25

    def __post_init__(self):
        shares = (self.target_share_basic, self.target_share_premium_only,
                  self.target_share_premium_video)
        if any(not 0.0 < s < 1.0 for s in shares):
            raise ValidationError(f"target shares must lie in (0, 1): {shares}")
        if sum(shares) >= 1.0:
            raise ValidationError(f"target shares must sum to less than 1: {shares}")
        if self.target_p_basic <= 0 or self.target_p_premium_increment <= 0:
            raise ValidationError("target prices must be positive")
        if not 0.0 < self.given_pass_through <= 1.0:
            raise ValidationError("pass-through rate must lie in (0, 1]")
        if self.sigma_ratio <= 0:
            raise ValidationError("sigma_ratio must be positive")


@dataclass(frozen=True)
class EquilibriumPoint:
    """One fully evaluated price point: prices, demand, surplus, profits."""

    prices: PriceVector
    shares: DemandShares
    surplus: SurplusBreakdown
    profits: ProfitReport


@dataclass(frozen=True)
class CalibrationResult:
    mu_b: float
    mu_p: float
    mu_v: float
    c_basic: float
    c_premium_increment: float
    p_peering: float
    sigma_ratio: float
    share_residual: float
    foc_residual: float

    def population(self, n_consumers: int = 40_000_000) -> ConsumerPopulation:
        return ConsumerPopulation.from_means(
            self.mu_b, self.mu_p, self.mu_v, n_consumers, spread=self.sigma_ratio)

    def cost_vector(self, c_video_increment: float, c_vsp: float = 0.0) -> CostVector:
        return CostVector(self.c_basic, self.c_premium_increment,
                          c_video_increment, c_vsp)

    def as_tuple(self):
        return (self.mu_b, self.mu_p, self.mu_v,
                self.c_basic, self.c_premium_increment, self.p_peering)


@dataclass(frozen=True)
class FeeSweepPoint:
    fee: float
    point: EquilibriumPoint | None
    error: str | None = None


@dataclass(frozen=True)
class CdSweepPoint:
    c_video_increment: float
    calibration: CalibrationResult | None
    fee_isp: float | None
    point_isp: EquilibriumPoint | None
    fee_cs: float | None
    point_cs: EquilibriumPoint | None
    incremental_cs: float | None
    error: str | None = None


def evaluate_point(pop: ConsumerPopulation, costs: CostVector,
                   prices: PriceVector) -> EquilibriumPoint:
    shares = demand_shares(pop, prices)
    surplus = aggregate_surplus(pop, prices)
    profits = ProfitReport(
        isp_profit(shares, pop, prices, costs),
        vsp_profit(shares, pop, prices, costs),
    )
    return EquilibriumPoint(prices, shares, surplus, profits)


def _profit_arrays(pop, costs, pb, pp, pd, p_video_base, pass_through):
    """ISP profit per consumer on broadcast price arrays."""
    pb = np.asarray(pb, dtype=float)
    pp = np.asarray(pp, dtype=float)
    pd = np.asarray(pd, dtype=float)
    pv = p_video_base + pass_through * pd
    sb, sp, sv = shares_arrays(pop, pb, pp, pv)
    m_basic = pb - costs.c_basic
    m_premium = m_basic + pp - costs.c_premium_increment
    m_video = m_premium + pd - costs.c_video_increment
    return m_basic * sb + m_premium * sp + m_video * sv


def _cs_per_consumer(pop, pb, pp, pv) -> float:
    csb, csp, csv = surplus_arrays(pop, pb, pp, pv)
    return float(csb + csp + csv)


def _refine_simplex(f_neg, x0, step):
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(n)])
    res = minimize(f_neg, x0, method="Nelder-Mead",
                   options=dict(initial_simplex=simplex, xatol=_XATOL,
                                fatol=1e-12, maxiter=4000, maxfev=8000))
    return res.x, -res.fun


def _certify_and_select(f, candidates, probe_step=_PROBE_STEP):
    """Pick the best refined optimum; reject ambiguity and probe failures.

    ``candidates`` is a list of (x, value). Distinct locations with
    near-identical objectives are reported instead of silently choosing.
    """
    candidates = sorted(candidates, key=lambda c: -c[1])
    x_best, f_best = candidates[0]
    for x, val in candidates[1:]:
        if (np.max(np.abs(np.asarray(x) - np.asarray(x_best))) > _AMBIGUITY_DISTANCE
                and val > f_best - _AMBIGUITY_GAP):
            raise ConvergenceError(
                "ambiguous optimum: multi-start results "
                f"{np.round(x_best, 4)} and {np.round(x, 4)} agree in objective "
                f"({f_best:.9g} vs {val:.9g}) but differ in location")
    n = len(x_best)
    offsets = np.array(np.meshgrid(*([[-probe_step, 0.0, probe_step]] * n),
                                   indexing="ij")).reshape(n, -1).T
    probes = x_best[None, :] + offsets
    values = np.array([f(p) for p in probes])
    if np.any(values > f_best + _PROBE_SLACK):
        raise ConvergenceError(
            f"optimum at {np.round(x_best, 4)} failed the surrounding-grid "
            f"certificate (probe improves objective by "
            f"{float(np.max(values) - f_best):.3g})")
    return x_best, f_best


def maximize_isp_prices(pop: ConsumerPopulation, costs: CostVector,
                        p_video_base: float, pass_through: float,
                        *, x0=None, grid_step: float = 1.0,
                        progress=None) -> tuple[float, float, float]:
    """Jointly profit-maximizing (basic price, premium increment, fee).

    Seeds a simplex refinement from a coarse multi-start grid ($1 spacing
    over a +/-$20 box around cost-plus centers), or from ``x0`` when a
    warm start is available from a neighboring solve.
    """
    def objective(x):
        return float(_profit_arrays(pop, costs, x[0], x[1], x[2],
                                    p_video_base, pass_through))

    seeds = []
    if x0 is not None:
        seeds.append(np.asarray(x0, dtype=float))
    else:
        cd = costs.c_video_increment
        pb_axis = np.arange(costs.c_basic + 1.0, costs.c_basic + 41.0 + 1e-9, grid_step)
        pp_axis = np.arange(max(1.0, costs.c_premium_increment - 19.0),
                            costs.c_premium_increment + 21.0 + 1e-9, grid_step)
        pd_axis = np.arange(cd - 7.0, cd + 13.0 + 1e-9, grid_step)
        mesh = np.meshgrid(pb_axis, pp_axis, pd_axis, indexing="ij")
        flat = [m.ravel() for m in mesh]
        values = _profit_arrays(pop, costs, flat[0], flat[1], flat[2],
                                p_video_base, pass_through)
        order = np.argsort(values)[::-1]
        for idx in order[:40]:
            cand = np.array([flat[0][idx], flat[1][idx], flat[2][idx]])
            if all(np.max(np.abs(cand - s)) > 1.5 * grid_step for s in seeds):
                seeds.append(cand)
            if len(seeds) >= 5:
                break
        if progress:
            progress({"event": "coarse_grid", "n_points": values.size,
                      "best": float(values[order[0]])})

    candidates = [_refine_simplex(lambda x: -objective(x), s, 0.5) for s in seeds]
    x_best, _ = _certify_and_select(objective, candidates)
    return float(x_best[0]), float(x_best[1]), float(x_best[2])


def maximize_tier_prices_given_fee(pop: ConsumerPopulation, costs: CostVector,
                                   p_video_base: float, pass_through: float,
                                   p_peering_fixed: float,
                                   *, x0=None, grid_step: float = 1.0,
                                   progress=None) -> tuple[float, float]:
    """Profit-maximizing tier prices with the peering fee frozen."""
    if not math.isfinite(p_peering_fixed):
        raise ValidationError("p_peering_fixed must be finite")

    def objective(x):
        return float(_profit_arrays(pop, costs, x[0], x[1], p_peering_fixed,
                                    p_video_base, pass_through))

    seeds = []
    if x0 is not None:
        seeds.append(np.asarray(x0, dtype=float))
    else:
        pb_axis = np.arange(costs.c_basic + 1.0, costs.c_basic + 41.0 + 1e-9, grid_step)
        pp_axis = np.arange(max(1.0, costs.c_premium_increment - 19.0),
                            costs.c_premium_increment + 21.0 + 1e-9, grid_step)
        mesh = np.meshgrid(pb_axis, pp_axis, indexing="ij")
        flat = [m.ravel() for m in mesh]
        values = _profit_arrays(pop, costs, flat[0], flat[1], p_peering_fixed,
                                p_video_base, pass_through)
        order = np.argsort(values)[::-1]
        for idx in order[:30]:
            cand = np.array([flat[0][idx], flat[1][idx]])
            if all(np.max(np.abs(cand - s)) > 1.5 * grid_step for s in seeds):
                seeds.append(cand)
            if len(seeds) >= 4:
                break

    candidates = [_refine_simplex(lambda x: -objective(x), s, 0.5) for s in seeds]
    x_best, _ = _certify_and_select(objective, candidates)
    return float(x_best[0]), float(x_best[1])


def _best_response_cs(pop, costs, p_video_base, pass_through, fee, tier_x0):
    """Inner tier-price solve followed by the surplus evaluation."""
    pb, pp = maximize_tier_prices_given_fee(
        pop, costs, p_video_base, pass_through, fee, x0=tier_x0)
    pv = video_price(p_video_base, pass_through, fee)
    cs = _cs_per_consumer(pop, pb, pp, pv)
    return cs, (pb, pp)


def regulator_optimal_fee(pop: ConsumerPopulation, costs: CostVector,
                          p_video_base: float, pass_through: float,
                          fee_range: tuple[float, float] = (-10.0, 10.0),
                          *, scan_step: float = 0.25, resolution: float = 1e-3,
                          progress=None) -> tuple[float, EquilibriumPoint]:
    """Fee maximizing aggregate consumer surplus under ISP best response.

    The outer problem is scanned coarsely to find (and verify) a single
    interior peak, then refined by golden-section; the inner tier-price
    problem is re-solved at every fee with a warm start.
    """
    lo, hi = fee_range
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValidationError(f"fee_range must be a bounded interval, got {fee_range}")

    fees = np.arange(lo, hi + 1e-9, scan_step)
    cs_values = np.empty(fees.size)
    tiers = []
    tier_x0 = None
    for i, fee in enumerate(fees):
        cs, tier_x0 = _best_response_cs(pop, costs, p_video_base, pass_through,
                                        fee, tier_x0)
        cs_values[i] = cs
        tiers.append(tier_x0)
        if progress:
            progress({"event": "fee_scan", "index": i, "fee": float(fee), "cs": cs})

    interior = [i for i in range(1, fees.size - 1)
                if cs_values[i] >= cs_values[i - 1] and cs_values[i] >= cs_values[i + 1]]
    if len(interior) > 1:
        best = max(interior, key=lambda i: cs_values[i])
        for i in interior:
            if i != best and cs_values[i] > cs_values[best] - 1e-7:
                raise ConvergenceError(
                    "consumer surplus is not unimodal over the fee range: "
                    f"local maxima near {fees[best]:.2f} and {fees[i]:.2f}")
    i_best = int(np.argmax(cs_values))
    if i_best in (0, fees.size - 1):
        fee_star = float(fees[i_best])
        tier_star = tiers[i_best]
    else:
        # golden-section refinement inside the bracketing scan cells
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = float(fees[i_best - 1]), float(fees[i_best + 1])
        tier_x0 = tiers[i_best]
        cache: dict[float, tuple[float, tuple[float, float]]] = {}

        def eval_fee(fee):
            if fee not in cache:
                cache[fee] = _best_response_cs(pop, costs, p_video_base,
                                               pass_through, fee, tier_x0)
            return cache[fee]

        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, _ = eval_fee(c)
        fd, _ = eval_fee(d)
        while (b - a) > resolution:
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc, _ = eval_fee(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd, _ = eval_fee(d)
        fee_star = c if fc > fd else d
        _, tier_star = eval_fee(fee_star)
        fee_star = float(fee_star)

    prices = PriceVector.from_fee(tier_star[0], tier_star[1], fee_star,
                                  p_video_base, pass_through)
    return fee_star, evaluate_point(pop, costs, prices)


def _share_grads(pop, pb, pp, pv, h=1e-4):
    """d(shares)/d(pb, pp, pv) via central differences, one vector call."""
    pbs = np.array([pb + h, pb - h, pb, pb, pb, pb])
    pps = np.array([pp, pp, pp + h, pp - h, pp, pp])
    pvs = np.array([pv, pv, pv, pv, pv + h, pv - h])
    sb, sp, sv = shares_arrays(pop, pbs, pps, pvs)
    stacked = np.stack([sb, sp, sv])            # (region, eval)
    return (stacked[:, 0::2] - stacked[:, 1::2]) / (2.0 * h)  # (region, wrt price)


def calibrate(targets: MarketTargets, *, progress=None) -> CalibrationResult:
    """Recover (mu_b, mu_p, mu_v, c_basic, c_premium_increment, p_peering).

    The six conditions are the three observed shares at the target prices
    plus stationarity of ISP profit in all three price directions. The
    solve nests cleanly: given a fee, the utility means are pinned by the
    share equations and the two tier-price stationarity conditions are
    linear in the costs; the remaining scalar equation (stationarity in
    the fee) is solved by bracketed root finding.
    """
    pb, pp = targets.target_p_basic, targets.target_p_premium_increment
    share_targets = np.array([
        targets.target_share_basic,
        targets.target_share_premium_only,
        targets.target_share_premium_video,
    ])
    cd = targets.given_c_video_increment
    alpha = targets.given_pass_through
    ratio = targets.sigma_ratio
    mu_guess = np.array([1.12 * pb, 0.95 * pp,
                         1.06 * (targets.given_p_video_base + alpha * cd)])

    def solve_mus(pv, x0):
        def residual(mus):
            if np.any(mus <= 0):
                return np.full(3, 1e3)
            pop = ConsumerPopulation.from_means(*mus, spread=ratio)
            sb, sp, sv = shares_arrays(pop, pb, pp, pv)
            return np.array([float(sb), float(sp), float(sv)]) - share_targets

        sol = root(residual, x0, method="hybr", tol=1e-12)
        # hybr may flag success=False for over-tight tol; the residual decides
        if np.max(np.abs(sol.fun)) > 1e-8:
            raise ConvergenceError(
                "share-matching failed during calibration: "
                f"residual={np.max(np.abs(sol.fun)):.3g} at pv={pv:.4f} "
                f"({sol.message})")
        return sol.x

    state = {"mus": mu_guess}

    def implied(fee):
        pv = targets.given_p_video_base + alpha * fee
        mus = solve_mus(pv, state["mus"])
        state["mus"] = mus
        pop = ConsumerPopulation.from_means(*mus, spread=ratio)
        s = np.array(shares_arrays(pop, pb, pp, pv), dtype=float)
        g = _share_grads(pop, pb, pp, pv)
        # stationarity in (pb, pp) is linear in (c_basic, c_premium_increment)
        lhs = np.array([
            [g[:, 0].sum(), g[1, 0] + g[2, 0]],
            [g[:, 1].sum(), g[1, 1] + g[2, 1]],
        ])
        rhs = np.array([
            s.sum() + pb * g[0, 0] + (pb + pp) * g[1, 0] + (pb + pp + fee - cd) * g[2, 0],
            s[1] + s[2] + pb * g[0, 1] + (pb + pp) * g[1, 1] + (pb + pp + fee - cd) * g[2, 1],
        ])
        if abs(np.linalg.det(lhs)) < 1e-14:
            raise ConvergenceError("singular stationarity system during calibration")
        cb, cp = np.linalg.solve(lhs, rhs)
        foc_fee = s[2] + alpha * ((pb - cb) * g[0, 2]
                                  + (pb + pp - cb - cp) * g[1, 2]
                                  + (pb + pp + fee - cb - cp - cd) * g[2, 2])
        return float(foc_fee), float(cb), float(cp), mus

    fee_lo, fee_hi = None, None
    r_prev, fee_prev = None, None
    scan = [cd + off for off in (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0)]
    residuals = []
    for fee in scan:
        r, *_ = implied(fee)
        residuals.append((fee, r))
        if progress:
            progress({"event": "calibration_scan", "fee": fee, "residual": r})
        if r_prev is not None and np.sign(r) != np.sign(r_prev):
            fee_lo, fee_hi = fee_prev, fee
            break
        r_prev, fee_prev = r, fee
    if fee_lo is None:
        raise ConvergenceError(
            "calibration found no bracketing fee; stationarity residuals: "
            + ", ".join(f"fee={f:.2f}: {r:+.4g}" for f, r in residuals))

    fee_star = brentq(lambda f: implied(f)[0], fee_lo, fee_hi, xtol=1e-9)
    foc_fee, cb, cp, mus = implied(fee_star)

    pop = ConsumerPopulation.from_means(*mus, spread=ratio)
    pv = targets.given_p_video_base + alpha * fee_star
    s = np.array(shares_arrays(pop, pb, pp, pv), dtype=float)
    share_residual = float(np.max(np.abs(s - share_targets)))
    g = _share_grads(pop, pb, pp, pv)
    margins = np.array([pb - cb, pb + pp - cb - cp, pb + pp + fee_star - cb - cp - cd])
    foc = np.array([
        s.sum() + margins @ g[:, 0],
        s[1] + s[2] + margins @ g[:, 1],
        foc_fee,
    ])
    return CalibrationResult(
        mu_b=float(mus[0]), mu_p=float(mus[1]), mu_v=float(mus[2]),
        c_basic=cb, c_premium_increment=cp, p_peering=float(fee_star),
        sigma_ratio=ratio, share_residual=share_residual,
        foc_residual=float(np.max(np.abs(foc))),
    )


def sweep_fee(pop: ConsumerPopulation, costs: CostVector, p_video_base: float,
              pass_through: float, fee_grid, *, on_error: str = "raise",
              progress=None) -> list[FeeSweepPoint]:
    """Tier-price best response and full evaluation at each grid fee."""
    if on_error not in ("raise", "record"):
        raise ValidationError("on_error must be 'raise' or 'record'")
    points: list[FeeSweepPoint] = []
    tier_x0 = None
    for i, fee in enumerate(fee_grid):
        try:
            pb, pp = maximize_tier_prices_given_fee(
                pop, costs, p_video_base, pass_through, fee, x0=tier_x0)
            tier_x0 = (pb, pp)
            prices = PriceVector.from_fee(pb, pp, fee, p_video_base, pass_through)
            points.append(FeeSweepPoint(float(fee), evaluate_point(pop, costs, prices)))
        except (ConvergenceError, ValidationError) as exc:
            if on_error == "raise":
                raise
            points.append(FeeSweepPoint(float(fee), None, str(exc)))
        if progress:
            progress({"event": "fee_sweep_point", "index": i, "fee": float(fee)})
    return points


def sweep_cd(targets: MarketTargets, cd_grid, *,
             fee_range: tuple[float, float] = (-10.0, 10.0),
             n_consumers: int = 40_000_000, c_vsp: float = 0.0,
             on_error: str = "record", progress=None) -> list[CdSweepPoint]:
    """Recalibrate at each incremental video cost; solve both fee problems.

    Each grid point gets a fresh calibration (holding the observed targets
    fixed), the ISP's own fee choice, the regulator's surplus-maximizing
    fee, and the surplus gap between the two.
    """
    points: list[CdSweepPoint] = []
    for i, cd in enumerate(cd_grid):
        cd = float(cd)
        try:
            cal = calibrate(replace(targets, given_c_video_increment=cd))
            pop = cal.population(n_consumers)
            costs = cal.cost_vector(cd, c_vsp)
            pb, pp, fee_isp = maximize_isp_prices(
                pop, costs, targets.given_p_video_base, targets.given_pass_through,
                x0=(targets.target_p_basic, targets.target_p_premium_increment,
                    cal.p_peering))
            prices_isp = PriceVector.from_fee(
                pb, pp, fee_isp, targets.given_p_video_base, targets.given_pass_through)
            point_isp = evaluate_point(pop, costs, prices_isp)
            fee_cs, point_cs = regulator_optimal_fee(
                pop, costs, targets.given_p_video_base, targets.given_pass_through,
                fee_range)
            points.append(CdSweepPoint(
                cd, cal, fee_isp, point_isp, fee_cs, point_cs,
                incremental_cs=point_cs.surplus.cs_total - point_isp.surplus.cs_total))
        except (ConvergenceError, ValidationError) as exc:
            if on_error == "raise":
                raise
            points.append(CdSweepPoint(cd, None, None, None, None, None, None,
                                       error=str(exc)))
        if progress:
            progress({"event": "cd_sweep_point", "index": i, "cd": cd})
    return points
