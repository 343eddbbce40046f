from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

import pytest

from suplab import cli
from suplab import devmodel as dm
from suplab import calibrate as cal
from suplab import tiersim as ts

from test_counters import FIXTURE_3ROWS


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


@pytest.fixture
def counters_csv(tmp_path):
    path = tmp_path / "counters.csv"
    path.write_text(FIXTURE_3ROWS)
    return path


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        assert cli.run(["ingest"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag_is_1(self, capsys):
        assert cli.run(["latcdf", "--profile", "cxl-b", "--bogus"]) == 1

    def test_data_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("not,a,counter,log\n1,2,3,4\n")
        assert cli.run(["ingest", "--input", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_file_is_2(self, tmp_path):
        assert cli.run(
            ["ingest", "--input", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]
        ) == 2

    def test_success_is_0(self, tmp_path, counters_csv):
        assert cli.run(
            ["ingest", "--input", str(counters_csv), "--out", str(tmp_path / "o")]
        ) == 0


class TestManifest:
    def test_manifest_written_with_seed(self, tmp_path, counters_csv):
        out = tmp_path / "o"
        cli.run(["ingest", "--input", str(counters_csv), "--out", str(out), "--seed", "9"])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["subcommand"] == "ingest"


class TestLatCdf:
    def test_cxlb_spread_in_band(self, tmp_path):
        out = tmp_path / "lat"
        rc = cli.run(
            ["latcdf", "--profile", "cxl-b", "--n", "1000000", "--seed", "7",
             "--out", str(out)]
        )
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert 144.0 <= summary["p99.9_minus_p50"] <= 176.0
        lines = (out / "percentiles.csv").read_text().splitlines()
        assert lines[0] == "q,ns"

    def test_profile_json_accepted(self, tmp_path):
        prof = tmp_path / "dev.json"
        dm.PRESETS["cxl-b"].to_json(prof)
        out = tmp_path / "lat"
        rc = cli.run(["latcdf", "--profile", str(prof), "--n", "1000", "--seed", "7",
                      "--out", str(out)])
        assert rc == 0


class TestPipelines:
    def test_breakdown_rerun_byte_identical(self, tmp_path):
        pairs = dm.make_consistency_fixture(10, seed=3)
        from suplab.counters import write_run_pairs

        pairs_csv = tmp_path / "pairs.csv"
        write_run_pairs(pairs, pairs_csv)
        out = tmp_path / "bd"
        assert cli.run(["breakdown", "--pairs", str(pairs_csv), "--out", str(out)]) == 0
        first = tree_digest(out)
        shutil.rmtree(out)
        assert cli.run(["breakdown", "--pairs", str(pairs_csv), "--out", str(out)]) == 0
        assert tree_digest(out) == first

    def test_calibrate_then_predict(self, tmp_path, counters_csv):
        local, remote = dm.PRESETS["local-emr"], dm.PRESETS["cxl-b"]
        truth = dm.make_reference_params(local, remote)
        runs = dm.make_calibration_runs(local, remote, truth, seed=2)
        runs_csv = tmp_path / "runs.csv"
        cal.write_calibration_csv(runs, runs_csv)
        cal_out = tmp_path / "cal"
        assert cli.run(["calibrate", "--runs", str(runs_csv), "--out", str(cal_out)]) == 0
        pred_out = tmp_path / "pred"
        assert cli.run(
            ["predict", "--input", str(counters_csv),
             "--params", str(cal_out / "params.json"), "--out", str(pred_out)]
        ) == 0
        lines = (pred_out / "predictions.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_interleave_scan_and_forecast(self, tmp_path):
        local = dm.DeviceProfile(name="l", base_latency_ns=90.0, bandwidth_cap_gbs=50.0)
        remote = dm.DeviceProfile(name="r", base_latency_ns=140.0, bandwidth_cap_gbs=30.0)
        ldev, rdev = tmp_path / "l.json", tmp_path / "r.json"
        local.to_json(ldev)
        remote.to_json(rdev)
        w = dm.make_bandwidth_bound_suite(1, seed=2, local=local)[0]
        wjson = tmp_path / "w.json"
        wjson.write_text(json.dumps(w.__dict__))
        out = tmp_path / "scan"
        rc = cli.run(
            ["interleave", "scan", "--workload", str(wjson), "--local", str(ldev),
             "--remote", str(rdev), "--grid", "51", "--out", str(out)]
        )
        assert rc == 0
        best = json.loads((out / "scan_best.json").read_text())
        assert 0.0 <= best["remote_fraction"] <= 1.0

        # forecast needs params + fit + a counter log of the local run
        from suplab import interleave as il
        from suplab.counters import write_counter_log

        params = dm.make_reference_params(local, remote)
        fit = il.fit_interleave(
            dm.make_bandwidth_bound_suite(4, seed=5, local=local),
            local, remote, params, grid=51, seed=0,
        )
        pjson, fjson = tmp_path / "params.json", tmp_path / "fit.json"
        params.to_json(pjson)
        fit.to_json(fjson)
        log = tmp_path / "snap.csv"
        write_counter_log([dm.local_snapshot(w, local)], log)
        fout = tmp_path / "fc"
        rc = cli.run(
            ["interleave", "forecast", "--input", str(log), "--params", str(pjson),
             "--fit", str(fjson), "--local", str(ldev), "--remote", str(rdev),
             "--out", str(fout)]
        )
        assert rc == 0
        body = (fout / "forecast.csv").read_text().splitlines()
        assert body[0].startswith("label,r_dram")

    def test_tiersim_subcommand(self, tmp_path):
        trace = ts.make_no_overlap_trace(seed=0)
        ts.write_trace(trace, tmp_path / "t.csv", tmp_path / "t.json")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps([
            {"policy": "tpp", "fast_capacity": 2500},
            {"policy": "alto", "fast_capacity": 2500},
        ]))
        out = tmp_path / "sim"
        rc = cli.run(
            ["tiersim", "--trace", str(tmp_path / "t.csv"),
             "--trace-header", str(tmp_path / "t.json"),
             "--policy-config", str(cfg_path), "--out", str(out)]
        )
        assert rc == 0
        rows = json.loads((out / "comparison.json").read_text())
        assert {r["policy"] for r in rows} == {"tpp", "alto"}
        assert (out / "epochs_tpp.csv").exists()


@pytest.mark.slow
class TestDemo:
    def test_demo_deterministic(self, tmp_path):
        out = tmp_path / "demo"
        assert cli.run(["demo", "--seed", "1", "--out", str(out)]) == 0
        first = tree_digest(out)
        shutil.rmtree(out)
        assert cli.run(["demo", "--seed", "1", "--out", str(out)]) == 0
        assert tree_digest(out) == first
        assert (out / "summary.txt").exists()
