"""Command-line behavior: exit codes, outputs, manifests, determinism."""

import json

import pytest

from peeringsim.cli import main
from peeringsim.dataio import read_results

CAL_SCENARIO = """
[calibration]
p_basic = 50.0
p_premium_increment = 20.0
share_basic = 0.25
share_premium_only = 0.125
share_premium_video = 0.375

[costs]
video_increment = 3.0

[pricing]
video_base = 21.58
"""

POP_SCENARIO = """
n_consumers = 40000000

[population]
mu_basic = 56.110792
mu_premium = 18.902705
mu_video = 27.748992

[costs]
basic = 16.495879
premium_increment = 18.994328
video_increment = 3.0

[pricing]
video_base = 21.58

[sweeps]
fee_grid = [0.0, 2.34, 4.59]
n_max = 12
x_list = [0.0, 0.5, 1.0]
"""


@pytest.fixture(scope="module")
def cal_scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenario") / "cal.toml"
    path.write_text(CAL_SCENARIO)
    return path


@pytest.fixture(scope="module")
def pop_scenario(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenario") / "pop.toml"
    path.write_text(POP_SCENARIO)
    return path


class TestExitCodes:
    def test_validation_error_is_1(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[calibration]\np_basic = 50.0\n")
        assert main(["calibrate", "--scenario", str(bad), "--out", str(tmp_path)]) == 1

    def test_missing_scenario_is_io_3(self, tmp_path):
        assert main(["calibrate", "--scenario", str(tmp_path / "none.toml"),
                     "--out", str(tmp_path)]) == 3

    def test_convergence_error_is_2(self, tmp_path):
        hopeless = CAL_SCENARIO.replace("video_increment = 3.0",
                                        "video_increment = 60.0")
        f = tmp_path / "hopeless.toml"
        f.write_text(hopeless)
        assert main(["calibrate", "--scenario", str(f), "--out", str(tmp_path)]) == 2

    def test_infeasible_targets_rejected_before_solving(self, tmp_path):
        bad = CAL_SCENARIO.replace("share_premium_video = 0.375",
                                   "share_premium_video = 0.7")
        f = tmp_path / "infeasible.toml"
        f.write_text(bad)
        assert main(["calibrate", "--scenario", str(f), "--out", str(tmp_path)]) == 1

    def test_wrong_subcommand_scenario_pairing(self, pop_scenario, tmp_path):
        assert main(["cd-sweep", "--scenario", str(pop_scenario),
                     "--out", str(tmp_path)]) == 1


class TestCalibrateCommand:
    def test_writes_report_and_manifest(self, cal_scenario, tmp_path):
        out = tmp_path / "run"
        assert main(["calibrate", "--scenario", str(cal_scenario),
                     "--out", str(out)]) == 0
        table = read_results(out / "calibration.csv")
        values = dict(table.rows)
        assert values["mu_basic"] == pytest.approx(56.11, abs=0.05)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "calibrate"
        assert manifest["fingerprint"] == table.fingerprint
        assert any(p.endswith("calibration.csv") for p in manifest["outputs"])

    def test_repeated_runs_byte_identical(self, cal_scenario, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["calibrate", "--scenario", str(cal_scenario), "--out", str(out1)]) == 0
        assert main(["calibrate", "--scenario", str(cal_scenario), "--out", str(out2)]) == 0
        assert (out1 / "calibration.csv").read_bytes() == (out2 / "calibration.csv").read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["fingerprint"] == m2["fingerprint"]
        assert [p.rsplit("/", 2)[-1] for p in m1["outputs"]] == \
               [p.rsplit("/", 2)[-1] for p in m2["outputs"]]


class TestFeeSweepCommand:
    def test_tables_and_curves(self, pop_scenario, tmp_path):
        out = tmp_path / "fs"
        assert main(["fee-sweep", "--scenario", str(pop_scenario),
                     "--out", str(out)]) == 0
        table = read_results(out / "fee_sweep.csv")
        assert table.column("status") == ["ok", "ok", "ok"]
        fees = table.column("fee")
        assert fees == [0.0, 2.34, 4.59]
        premium = table.column("p_premium_total")
        assert premium[0] == pytest.approx(73.98, abs=0.05)
        assert premium[2] == pytest.approx(70.0, abs=0.05)
        curve = read_results(out / "plot_data" / "price_video_vs_fee.csv")
        assert curve.column("p_video")[0] == pytest.approx(21.58, abs=0.03)

    def test_threads_give_same_tables(self, pop_scenario, tmp_path):
        out1, out2 = tmp_path / "t1", tmp_path / "t2"
        assert main(["fee-sweep", "--scenario", str(pop_scenario), "--out", str(out1),
                     "--threads", "3"]) == 0
        assert main(["fee-sweep", "--scenario", str(pop_scenario), "--out", str(out2),
                     "--threads", "3"]) == 0
        assert (out1 / "fee_sweep.csv").read_bytes() == (out2 / "fee_sweep.csv").read_bytes()


class TestGeoSweepCommand:
    def test_outputs_and_determinism(self, pop_scenario, tmp_path):
        out1, out2 = tmp_path / "g1", tmp_path / "g2"
        assert main(["geo-sweep", "--scenario", str(pop_scenario),
                     "--out", str(out1)]) == 0
        assert main(["geo-sweep", "--scenario", str(pop_scenario),
                     "--out", str(out2)]) == 0
        t1 = read_results(out1 / "geo_sweep.csv")
        assert len(t1.rows) == 12 * 3
        assert (out1 / "geo_sweep.csv").read_bytes() == (out2 / "geo_sweep.csv").read_bytes()
        dist = read_results(out1 / "geo_distances.csv")
        assert dist.column("ed_backbone_cold_full") == [0.0]
        # pure hot potato: the cost-minimizing row sits at a single site
        hot_rows = [r for r in t1.rows if r[1] == 0.0]
        assert min(hot_rows, key=lambda r: r[5])[0] == 1

    def test_missing_n_range_rejected(self, cal_scenario, tmp_path):
        assert main(["geo-sweep", "--scenario", str(cal_scenario),
                     "--out", str(tmp_path)]) == 1

    def test_cd_estimates_when_subscribers_given(self, tmp_path):
        text = POP_SCENARIO + "[traffic]\nvideo_subscribers = 15000000\n"
        f = tmp_path / "geo.toml"
        f.write_text(text)
        out = tmp_path / "g"
        assert main(["geo-sweep", "--scenario", str(f), "--out", str(out)]) == 0
        table = read_results(out / "cd_estimates.csv")
        rows = {(r[0], r[1]): r[2] for r in table.rows}
        # cheapest arrangement is the zero reference; everything else costs more
        assert rows[(12, 1.0)] == 0.0
        assert all(v >= 0.0 for v in rows.values())
        assert rows[(1, 0.0)] > rows[(12, 1.0)]
