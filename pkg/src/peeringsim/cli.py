"""Scenario runner.

Each experiment is a subcommand reading one TOML scenario and writing CSV
result tables (plus per-curve plot data) into the output directory, with a
run manifest for exact reruns. Progress goes to stderr; files carry the
machine-readable results.

Exit codes: 0 success, 1 validation error, 2 convergence failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import ResultTable, Scenario, load_counties, load_ixps, load_scenario, write_results
from .equilibrium import (
    _profit_arrays,
    calibrate,
    evaluate_point,
    maximize_isp_prices,
    maximize_tier_prices_given_fee,
    regulator_optimal_fee,
    sweep_cd,
    sweep_fee,
)
from .errors import ConvergenceError, ValidationError
from .geo import (
    build_topology,
    distance_report,
    estimate_cd,
    rank_subset,
    sweep_interconnection,
)
from .market import ConsumerPopulation, CostVector, PriceVector, shares_arrays, surplus_arrays
from .oracle import grid_maximum, mc_market_estimate

_EXIT_VALIDATION = 1
_EXIT_CONVERGENCE = 2
_EXIT_IO = 3


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _progress_sink(event: dict) -> None:
    _log("  " + " ".join(f"{k}={v}" for k, v in event.items() if k != "event"))


def _resolve_market(scenario: Scenario):
    """Population and costs, calibrating first when in target mode."""
    if scenario.mode == "population":
        return scenario.population, scenario.costs, None
    cal = calibrate(scenario.targets)
    pop = cal.population(scenario.n_consumers)
    costs = cal.cost_vector(scenario.c_video_increment, scenario.c_vsp)
    return pop, costs, cal


def _write(table: ResultTable, out_dir: Path, name: str, outputs: list) -> None:
    path = out_dir / name
    write_results(table, path)
    outputs.append(str(path))


def _write_curve(out_dir: Path, name: str, fingerprint: str, xlabel: str,
                 ylabel: str, xs, ys, outputs: list,
                 xtype: str = "money", ytype: str = "money") -> None:
    table = ResultTable(f"curve:{name}", fingerprint, (xlabel, ylabel),
                        (xtype, ytype), list(zip(xs, ys)))
    _write(table, out_dir / "plot_data", f"{name}.csv", outputs)


def _manifest(out_dir: Path, subcommand: str, fingerprint: str,
              started: float, outputs: list) -> None:
    manifest = {
        "subcommand": subcommand,
        "fingerprint": fingerprint,
        "wall_time_s": round(time.monotonic() - started, 3),
        "version": __version__,
        "outputs": sorted(outputs),
    }
    path = out_dir / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_calibrate(scenario: Scenario, out_dir: Path, args) -> int:
    if scenario.mode != "calibration":
        raise ValidationError("calibrate requires a [calibration] scenario")
    started = time.monotonic()
    cal = calibrate(scenario.targets, progress=_progress_sink if args.verbose else None)
    rows = [
        ("mu_basic", cal.mu_b), ("mu_premium", cal.mu_p), ("mu_video", cal.mu_v),
        ("c_basic", cal.c_basic), ("c_premium_increment", cal.c_premium_increment),
        ("p_peering", cal.p_peering),
        ("share_residual", cal.share_residual), ("foc_residual", cal.foc_residual),
    ]
    table = ResultTable("calibration", scenario.fingerprint,
                        ("parameter", "value"), ("text", "money"), rows)
    outputs: list[str] = []
    _write(table, out_dir, "calibration.csv", outputs)
    _manifest(out_dir, "calibrate", scenario.fingerprint, started, outputs)
    for name, value in rows[:6]:
        _log(f"{name:22s} {value:10.4f}")
    _log(f"residuals: shares {cal.share_residual:.2e}, stationarity {cal.foc_residual:.2e}")
    return 0


_POINT_COLUMNS = (
    "p_basic", "p_premium_increment", "p_premium_total", "p_video",
    "p_bundle_total", "share_basic", "share_premium_only", "share_premium_video",
    "cs_basic", "cs_premium_only", "cs_premium_video", "cs_total",
    "isp_profit", "vsp_profit",
)
_POINT_TYPES = ("money", "money", "money", "money", "money",
                "fraction", "fraction", "fraction",
                "money", "money", "money", "money", "money", "money")


def _point_cells(point) -> tuple:
    pr, sh, su, pf = point.prices, point.shares, point.surplus, point.profits
    return (pr.p_basic, pr.p_premium_increment, pr.p_premium_total, pr.p_video,
            pr.p_bundle_total, sh.share_basic, sh.share_premium_only,
            sh.share_premium_video, su.cs_basic, su.cs_premium_only,
            su.cs_premium_video, su.cs_total, pf.isp_profit, pf.vsp_profit)


def cmd_fee_sweep(scenario: Scenario, out_dir: Path, args) -> int:
    if scenario.fee_grid is None:
        raise ValidationError("fee-sweep needs sweeps.fee_grid or fee_min/max/step")
    started = time.monotonic()
    pop, costs, _ = _resolve_market(scenario)

    if args.threads > 1:
        def solve(fee):
            return sweep_fee(pop, costs, scenario.p_video_base,
                             scenario.pass_through, [fee], on_error="record")[0]
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            points = list(pool.map(solve, scenario.fee_grid))
    else:
        points = sweep_fee(pop, costs, scenario.p_video_base, scenario.pass_through,
                           scenario.fee_grid, on_error="record",
                           progress=_progress_sink if args.verbose else None)

    failed = sum(1 for p in points if p.error)
    pb_opt, pp_opt, fee_opt = maximize_isp_prices(
        pop, costs, scenario.p_video_base, scenario.pass_through)
    ref = evaluate_point(pop, costs, PriceVector.from_fee(
        pb_opt, pp_opt, fee_opt, scenario.p_video_base, scenario.pass_through))

    rows = []
    for p in points:
        if p.error:
            rows.append((p.fee,) + (float("nan"),) * (len(_POINT_COLUMNS) + 1)
                        + (f"error: {p.error}",))
        else:
            inc = p.point.surplus.cs_total - ref.surplus.cs_total
            rows.append((p.fee,) + _point_cells(p.point) + (inc, "ok"))
    table = ResultTable(
        "fee_sweep", scenario.fingerprint,
        ("fee",) + _POINT_COLUMNS + ("incremental_cs", "status"),
        ("money",) + _POINT_TYPES + ("money", "text"), rows)

    outputs: list[str] = []
    _write(table, out_dir, "fee_sweep.csv", outputs)
    good = [p for p in points if not p.error]
    fees = [p.fee for p in good]
    fp = scenario.fingerprint
    _write_curve(out_dir, "price_basic_vs_fee", fp, "fee", "p_basic",
                 fees, [p.point.prices.p_basic for p in good], outputs)
    _write_curve(out_dir, "price_premium_total_vs_fee", fp, "fee", "p_premium_total",
                 fees, [p.point.prices.p_premium_total for p in good], outputs)
    _write_curve(out_dir, "price_video_vs_fee", fp, "fee", "p_video",
                 fees, [p.point.prices.p_video for p in good], outputs)
    _write_curve(out_dir, "share_basic_vs_fee", fp, "fee", "share_basic",
                 fees, [p.point.shares.share_basic for p in good], outputs,
                 ytype="fraction")
    _write_curve(out_dir, "share_premium_only_vs_fee", fp, "fee", "share_premium_only",
                 fees, [p.point.shares.share_premium_only for p in good], outputs,
                 ytype="fraction")
    _write_curve(out_dir, "share_premium_video_vs_fee", fp, "fee", "share_premium_video",
                 fees, [p.point.shares.share_premium_video for p in good], outputs,
                 ytype="fraction")
    _write_curve(out_dir, "isp_profit_vs_fee", fp, "fee", "isp_profit",
                 fees, [p.point.profits.isp_profit for p in good], outputs)
    _write_curve(out_dir, "vsp_profit_vs_fee", fp, "fee", "vsp_profit",
                 fees, [p.point.profits.vsp_profit for p in good], outputs)
    _write_curve(out_dir, "incremental_cs_vs_fee", fp, "fee", "incremental_cs",
                 fees, [p.point.surplus.cs_total - ref.surplus.cs_total for p in good],
                 outputs)
    for tier in ("basic", "premium_only", "premium_video"):
        _write_curve(out_dir, f"cs_{tier}_vs_fee", fp, "fee", f"cs_{tier}",
                     fees, [getattr(p.point.surplus, f"cs_{tier}") for p in good],
                     outputs)
    _log(f"fee sweep: {len(points)} points, {failed} failed; "
         f"profit-maximizing fee {fee_opt:.4f}")
    if failed > 0.10 * len(points):
        raise ConvergenceError(f"{failed}/{len(points)} sweep points failed")
    _manifest(out_dir, "fee-sweep", fp, started, outputs)
    return 0


def cmd_cs_opt(scenario: Scenario, out_dir: Path, args) -> int:
    started = time.monotonic()
    pop, costs, _ = _resolve_market(scenario)
    fee_cs, point_cs = regulator_optimal_fee(
        pop, costs, scenario.p_video_base, scenario.pass_through, scenario.fee_range,
        progress=_progress_sink if args.verbose else None)
    pb, pp, fee_isp = maximize_isp_prices(
        pop, costs, scenario.p_video_base, scenario.pass_through)
    point_isp = evaluate_point(pop, costs, PriceVector.from_fee(
        pb, pp, fee_isp, scenario.p_video_base, scenario.pass_through))
    tiers0 = maximize_tier_prices_given_fee(
        pop, costs, scenario.p_video_base, scenario.pass_through, 0.0)
    point_zero = evaluate_point(pop, costs, PriceVector.from_fee(
        tiers0[0], tiers0[1], 0.0, scenario.p_video_base, scenario.pass_through))

    rows = [
        ("surplus_maximizing", fee_cs) + _point_cells(point_cs),
        ("profit_maximizing", fee_isp) + _point_cells(point_isp),
        ("settlement_free", 0.0) + _point_cells(point_zero),
    ]
    table = ResultTable("cs_opt", scenario.fingerprint,
                        ("regime", "fee") + _POINT_COLUMNS,
                        ("text", "money") + _POINT_TYPES, rows)
    outputs: list[str] = []
    _write(table, out_dir, "cs_opt.csv", outputs)
    _manifest(out_dir, "cs-opt", scenario.fingerprint, started, outputs)
    _log(f"surplus-maximizing fee = {fee_cs:.4f}")
    _log(f"profit-maximizing fee  = {fee_isp:.4f}")
    _log(f"CS gain vs profit-maximizing fee: "
         f"{point_cs.surplus.cs_total - point_isp.surplus.cs_total:,.0f}")
    _log(f"CS gain vs settlement-free:       "
         f"{point_cs.surplus.cs_total - point_zero.surplus.cs_total:,.0f}")
    return 0


def cmd_cd_sweep(scenario: Scenario, out_dir: Path, args) -> int:
    if scenario.mode != "calibration":
        raise ValidationError("cd-sweep requires a [calibration] scenario "
                              "(each point recalibrates)")
    if scenario.cd_grid is None:
        raise ValidationError("cd-sweep needs sweeps.cd_grid or cd_min/max/step")
    started = time.monotonic()

    if args.threads > 1:
        def solve(cd):
            return sweep_cd(scenario.targets, [cd], fee_range=scenario.fee_range,
                            n_consumers=scenario.n_consumers, c_vsp=scenario.c_vsp)[0]
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            points = list(pool.map(solve, scenario.cd_grid))
    else:
        points = sweep_cd(scenario.targets, scenario.cd_grid,
                          fee_range=scenario.fee_range,
                          n_consumers=scenario.n_consumers, c_vsp=scenario.c_vsp,
                          progress=_progress_sink if args.verbose else None)

    rows = []
    for p in points:
        if p.error:
            rows.append((p.c_video_increment,) + (float("nan"),) * 9
                        + (f"error: {p.error}",))
        else:
            rows.append((
                p.c_video_increment, p.fee_isp, p.fee_cs,
                p.point_isp.prices.p_premium_total, p.point_cs.prices.p_premium_total,
                p.point_isp.prices.p_bundle_total, p.point_cs.prices.p_bundle_total,
                p.point_isp.shares.share_premium_video,
                p.point_cs.shares.share_premium_video,
                p.incremental_cs, "ok"))
    table = ResultTable(
        "cd_sweep", scenario.fingerprint,
        ("c_video_increment", "fee_isp", "fee_cs", "p_premium_total_isp",
         "p_premium_total_cs", "p_bundle_total_isp", "p_bundle_total_cs",
         "share_premium_video_isp", "share_premium_video_cs",
         "incremental_cs", "status"),
        ("money", "money", "money", "money", "money", "money", "money",
         "fraction", "fraction", "money", "text"), rows)

    outputs: list[str] = []
    _write(table, out_dir, "cd_sweep.csv", outputs)
    good = [p for p in points if not p.error]
    cds = [p.c_video_increment for p in good]
    fp = scenario.fingerprint
    _write_curve(out_dir, "fee_isp_vs_cd", fp, "c_video_increment", "fee_isp",
                 cds, [p.fee_isp for p in good], outputs)
    _write_curve(out_dir, "fee_cs_vs_cd", fp, "c_video_increment", "fee_cs",
                 cds, [p.fee_cs for p in good], outputs)
    _write_curve(out_dir, "incremental_cs_vs_cd", fp, "c_video_increment",
                 "incremental_cs", cds, [p.incremental_cs for p in good], outputs)
    failed = len(points) - len(good)
    _log(f"cd sweep: {len(points)} points, {failed} failed")
    if failed > 0.10 * len(points):
        raise ConvergenceError(f"{failed}/{len(points)} sweep points failed")
    _manifest(out_dir, "cd-sweep", fp, started, outputs)
    return 0


def cmd_geo_sweep(scenario: Scenario, out_dir: Path, args) -> int:
    if scenario.n_range is None:
        raise ValidationError("geo-sweep needs sweeps.n_max (and optional n_min)")
    started = time.monotonic()
    counties = load_counties(scenario.counties_file)
    ixps = load_ixps(scenario.ixps_file)
    topology = build_topology(counties, ixps)
    if max(scenario.n_range) > topology.n_ixps:
        raise ValidationError(
            f"sweeps.n_max={max(scenario.n_range)} exceeds the "
            f"{topology.n_ixps} exchanges in the topology")
    rows_raw = sweep_interconnection(topology, scenario.n_range, scenario.x_list,
                                     scenario.traffic, scenario.subset_rule)
    report = distance_report(topology, rank_subset(topology, topology.n_ixps))

    rows = [(r.n_sites, r.local_fraction, r.ed_backbone_hot, r.ed_backbone_cold,
             r.backbone_cost, r.total_cost) for r in rows_raw]
    table = ResultTable(
        "geo_sweep", scenario.fingerprint,
        ("n_sites", "local_fraction", "ed_backbone_hot", "ed_backbone_cold",
         "backbone_cost", "total_cost"),
        ("int", "fraction", "km", "km", "money", "money"), rows)
    outputs: list[str] = []
    _write(table, out_dir, "geo_sweep.csv", outputs)

    dist_table = ResultTable(
        "geo_distances", scenario.fingerprint,
        ("ed_backbone_hot_full", "ed_backbone_cold_full", "ed_middle", "ed_access"),
        ("km", "km", "km", "km"),
        [(report.ed_backbone_hot, report.ed_backbone_cold,
          report.ed_middle, report.ed_access)])
    _write(dist_table, out_dir, "geo_distances.csv", outputs)

    for x in scenario.x_list:
        sub = [r for r in rows_raw if r.local_fraction == x]
        _write_curve(out_dir, f"cost_vs_n_x{x:0.2f}".replace(".", "_"),
                     scenario.fingerprint, "n_sites", "total_cost",
                     [r.n_sites for r in sub], [r.total_cost for r in sub],
                     outputs, xtype="int")

    if scenario.video_subscribers is not None:
        # implied incremental cost per video subscriber, against the
        # cheapest arrangement (full agreement, fully local delivery)
        baseline = min(r.total_cost for r in rows_raw
                       if r.n_sites == max(scenario.n_range))
        cd_rows = [(r.n_sites, r.local_fraction,
                    estimate_cd(r.total_cost, baseline, scenario.video_subscribers))
                   for r in rows_raw]
        cd_table = ResultTable(
            "geo_cd_estimates", scenario.fingerprint,
            ("n_sites", "local_fraction", "cd_estimate"),
            ("int", "fraction", "money"), cd_rows)
        _write(cd_table, out_dir, "cd_estimates.csv", outputs)
    _manifest(out_dir, "geo-sweep", scenario.fingerprint, started, outputs)
    _log(f"geo sweep: {len(rows)} rows over n={min(scenario.n_range)}.."
         f"{max(scenario.n_range)}, {len(scenario.x_list)} replication fractions")
    return 0


def cmd_oracle_check(scenario: Scenario, out_dir: Path, args) -> int:
    started = time.monotonic()
    pop, costs, _ = _resolve_market(scenario)
    rng = np.random.default_rng(args.seed)
    rows = []
    worst = 0.0

    for i in range(scenario.oracle_price_points):
        prices = PriceVector(
            p_basic=float(rng.uniform(0.6, 1.3) * pop.mu_b),
            p_premium_increment=float(rng.uniform(0.5, 1.5) * pop.mu_p),
            p_video=float(rng.uniform(0.5, 1.5) * pop.mu_v),
        )
        est = mc_market_estimate(pop, prices, scenario.oracle_mc_samples,
                                 seed=int(rng.integers(2**63)))
        sb, sp, sv = shares_arrays(pop, prices.p_basic,
                                   prices.p_premium_increment, prices.p_video)
        cb, cp_, cv = surplus_arrays(pop, prices.p_basic,
                                     prices.p_premium_increment, prices.p_video)
        quad = np.array([float(sb), float(sp), float(sv),
                         float(cb), float(cp_), float(cv)])
        mc = np.concatenate([est.shares, est.surplus])
        se = np.concatenate([est.shares_se, est.surplus_se])
        z = np.abs(quad - mc) / np.where(se > 0, se, np.inf)
        worst = max(worst, float(np.max(z)))
        for name, q, m, s, zz in zip(
                ("share_basic", "share_premium_only", "share_premium_video",
                 "cs_basic", "cs_premium_only", "cs_premium_video"),
                quad, mc, se, z):
            rows.append((f"mc_point_{i}", name, q, m, s, zz,
                         "pass" if zz < 3.0 else "FAIL"))
        if args.verbose:
            _log(f"  mc point {i}: max |z| = {float(np.max(z)):.2f}")

    for i in range(scenario.oracle_grid_scenarios):
        mus = (float(rng.uniform(40.0, 70.0)), float(rng.uniform(12.0, 26.0)),
               float(rng.uniform(18.0, 36.0)))
        rpop = ConsumerPopulation.from_means(*mus, n_consumers=pop.n_consumers)
        rcosts = CostVector(float(rng.uniform(8.0, 22.0)),
                            float(rng.uniform(8.0, 22.0)),
                            float(rng.uniform(-2.0, 4.0)))
        pv0 = float(rng.uniform(15.0, 28.0))
        pb, pp, fee = maximize_isp_prices(rpop, rcosts, pv0, 1.0)
        axes = [np.linspace(pb - 5.0, pb + 5.0, 41),
                np.linspace(pp - 5.0, pp + 5.0, 41),
                np.linspace(fee - 5.0, fee + 5.0, 41)]
        _, best_grid = grid_maximum(
            lambda b, p, d: _profit_arrays(rpop, rcosts, b, p, d, pv0, 1.0), axes)
        f_opt = float(_profit_arrays(rpop, rcosts, pb, pp, fee, pv0, 1.0))
        ok = f_opt >= best_grid - 1e-9
        rows.append((f"grid_scenario_{i}", "optimizer_vs_grid", f_opt, best_grid,
                     0.0, 0.0, "pass" if ok else "FAIL"))
        if args.verbose:
            _log(f"  grid scenario {i}: optimizer {f_opt:.9f} vs grid {best_grid:.9f}")

    table = ResultTable(
        "oracle_check", scenario.fingerprint,
        ("check", "quantity", "analytic", "oracle", "se", "z", "status"),
        ("text", "text", "money", "money", "money", "money", "text"), rows)
    outputs: list[str] = []
    _write(table, out_dir, "oracle_check.csv", outputs)
    _manifest(out_dir, "oracle-check", scenario.fingerprint, started, outputs)
    n_fail = sum(1 for r in rows if r[-1] == "FAIL")
    _log(f"oracle check: {len(rows)} comparisons, {n_fail} failures, "
         f"worst |z| = {worst:.2f}")
    if n_fail:
        raise ConvergenceError(f"{n_fail} oracle comparisons failed")
    return 0


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "fee-sweep": cmd_fee_sweep,
    "cs-opt": cmd_cs_opt,
    "cd-sweep": cmd_cd_sweep,
    "geo-sweep": cmd_geo_sweep,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peeringsim",
        description="Broadband/streaming market and interconnection cost simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--scenario", required=True, help="scenario TOML file")
        p.add_argument("--out", default=None,
                       help="output directory (default: scenario's output.directory)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent sweep points (default 1)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for Monte Carlo oracles only (default 0)")
        p.add_argument("--format", choices=["csv"], default="csv",
                       help="output format (default csv)")
        p.add_argument("--verbose", action="store_true",
                       help="report per-point progress on stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        out_dir = Path(args.out) if args.out else Path(scenario.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](scenario, out_dir, args)
    except ValidationError as exc:
        _log(f"validation error: {exc}")
        return _EXIT_VALIDATION
    except ConvergenceError as exc:
        _log(f"convergence error: {exc}")
        return _EXIT_CONVERGENCE
    except OSError as exc:
        _log(f"i/o error: {exc}")
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
