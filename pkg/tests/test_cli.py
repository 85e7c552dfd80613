import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from metabias.cli import main
from metabias.errors import ConfigError, ParseError
from metabias.harness import (analyze_dataset, load_dataset, load_run_config,
                              run_calibrate, run_simulate)
from metabias.pooling import dl_random_effects, fixed_effects

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic_case.csv"


def write_config(tmp_path, **overrides):
    data = {
        "grid": {"m": [4], "delta": [15], "tau2": [0],
                 "variance_scenario": ["equal"], "effect_kind": ["cohen_d"]},
        "replicates": 10,
        "seed": 7,
        "selection": {"policy": "none"},
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


class TestAnalyze:
    def test_fixture_matches_library_calls(self):
        rows = analyze_dataset(str(FIXTURE))
        assert rows[0] == "method,effect_kind,estimate,ci_low,ci_high,note"
        table = {}
        for row in rows[1:]:
            meth, kind, est, lo, hi, note = row.split(",")
            table[(meth, kind)] = (est, lo, hi, note)
        effects = load_dataset(str(FIXTURE))["cohen_d"]
        dl = dl_random_effects(effects)
        est, lo, hi, note = table[("dl_random", "cohen_d")]
        assert float(est) == pytest.approx(dl.estimate, rel=1e-5)
        assert float(lo) == pytest.approx(dl.ci_low, rel=1e-5)
        assert note == ""
        # raw-arm input computes both effect kinds for every method
        assert ("pet_peese", "hedges_g") in table
        assert len(rows) == 1 + 7 * 2

    def test_single_study_file(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("study_id,n1,mean1,sd1,n0,mean0,sd0\n"
                        "s1,20,5.0,2.0,20,4.0,2.0\n")
        rows = analyze_dataset(str(path))
        table = {(r.split(",")[0], r.split(",")[1]): r.split(",")
                 for r in rows[1:]}
        assert table[("fixed", "cohen_d")][5] == ""
        assert table[("dl_random", "cohen_d")][5] == ""
        for meth in ("copas", "pet_peese", "trim_fill", "limit_meta"):
            assert table[(meth, "cohen_d")][5] == "InsufficientStudies"

    def test_precomputed_schema(self, tmp_path):
        path = tmp_path / "pre.csv"
        path.write_text(
            "study_id,effect,variance,n1,n0,kind\n"
            "a,0.5,0.04,20,20,cohen_d\n"
            "b,0.3,0.09,15,15,cohen_d\n"
            "c,0.6,0.01,40,40,cohen_d\n")
        rows = analyze_dataset(str(path), methods=("fixed", "dl_random"))
        assert len(rows) == 3
        effects = load_dataset(str(path))["cohen_d"]
        fe = fixed_effects(effects)
        est = float(rows[1].split(",")[2])
        assert est == pytest.approx(fe.estimate, rel=1e-5)

    def test_analyze_is_idempotent(self):
        assert analyze_dataset(str(FIXTURE)) == analyze_dataset(str(FIXTURE))

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("study_id,n1,mean1,sd1,n0,mean0,sd0\n"
                        "s1,20,5.0,2.0,20,4.0,2.0\n"
                        "s2,20,oops,2.0,20,4.0,2.0\n")
        with pytest.raises(ParseError, match="line 3"):
            analyze_dataset(str(path))

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ParseError, match="line 1"):
            analyze_dataset(str(path))

    def test_mixed_kinds_rejected(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text("study_id,effect,variance,n1,n0,kind\n"
                        "a,0.5,0.04,20,20,cohen_d\n"
                        "b,0.3,0.09,15,15,hedges_g\n")
        with pytest.raises(ParseError, match="line 3"):
            analyze_dataset(str(path))


class TestConfig:
    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError, match=r"\$.grid"):
            load_run_config({"grid": {"m": [4], "delta": [15], "tau2": [0],
                                      "variance_scenario": ["equal"],
                                      "effect_kind": ["cohen_d"],
                                      "bogus": 1}}, "simulate")

    def test_top_level_unknown_key(self):
        with pytest.raises(ConfigError, match=r"\$: unknown key"):
            load_run_config({"grid": {}, "extra": True}, "simulate")

    def test_methods_validated(self):
        with pytest.raises(ConfigError, match=r"\$.methods"):
            load_run_config({
                "grid": {"m": [4], "delta": [15], "tau2": [0],
                         "variance_scenario": ["equal"],
                         "effect_kind": ["cohen_d"]},
                "methods": ["dl_random", "nope"]}, "simulate")

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError, match=r"\$.grid.m"):
            load_run_config({"grid": {"m": [], "delta": [15], "tau2": [0],
                                      "variance_scenario": ["equal"],
                                      "effect_kind": ["cohen_d"]}}, "simulate")

    def test_fixed_policy_requires_pi(self):
        with pytest.raises(ConfigError, match=r"\$.selection.pi_pub"):
            load_run_config({
                "grid": {"m": [4], "delta": [15], "tau2": [0],
                         "variance_scenario": ["equal"],
                         "effect_kind": ["cohen_d"]},
                "selection": {"policy": "fixed"}}, "simulate")


class TestSimulateRuns:
    def test_same_seed_same_bytes(self, tmp_path):
        cfg_path = write_config(tmp_path, methods=["dl_random", "fixed"])
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg_path),
                     "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        cfg_path = write_config(
            tmp_path,
            grid={"m": [4, 5], "delta": [15], "tau2": [0, 1],
                  "variance_scenario": ["equal"], "effect_kind": ["cohen_d"]},
            methods=["dl_random", "trim_fill"])
        out1, out4 = tmp_path / "t1.csv", tmp_path / "t4.csv"
        assert main(["simulate", "--config", str(cfg_path), "--threads", "1",
                     "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg_path), "--threads", "4",
                     "--out", str(out4)]) == 0
        assert out1.read_bytes() == out4.read_bytes()

    def test_methods_filter_restricts_rows(self, tmp_path):
        cfg_path = write_config(tmp_path)
        rows = run_simulate(load_run_config(json.loads(cfg_path.read_text())
                                            | {"methods": ["dl_random"]},
                                            "simulate"))
        assert len(rows) == 2
        assert rows[1].split(",")[5] == "dl_random"

    def test_row_count_matches_grid_arithmetic(self, tmp_path):
        cfg = load_run_config({
            "grid": {"m": [4, 6], "delta": [15], "tau2": [0, 1, 5],
                     "variance_scenario": ["equal", "unequal"],
                     "effect_kind": ["cohen_d", "hedges_g"]},
            "replicates": 2, "seed": 3, "selection": {"policy": "none"},
            "methods": ["fixed", "dl_random"]}, "simulate")
        rows = run_simulate(cfg)
        assert len(rows) == 1 + 2 * 1 * 3 * 2 * 2 * 2

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg_path = write_config(tmp_path, methods=["dl_random"])
        a, b = tmp_path / "s1.csv", tmp_path / "s2.csv"
        main(["simulate", "--config", str(cfg_path), "--seed", "1",
              "--out", str(a)])
        main(["simulate", "--config", str(cfg_path), "--seed", "2",
              "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_output_schema(self, tmp_path):
        cfg_path = write_config(tmp_path, methods=["dl_random"])
        out = tmp_path / "o.csv"
        main(["simulate", "--config", str(cfg_path), "--out", str(out)])
        lines = out.read_text().splitlines()
        assert lines[0] == ("m,n,tau2,variance_scenario,effect_kind,method,"
                            "amse,bias,coverage,power,mean_published,failures")
        fields = lines[1].split(",")
        assert fields[0] == "4" and fields[5] == "dl_random"
        float(fields[6])  # amse parses
        assert fields[10] == "4"  # pi=0: every study published


class TestCalibrateRuns:
    def test_target_one_means_no_suppression(self, tmp_path):
        cfg = load_run_config({
            "grid": {"m": [4], "delta": [15], "tau2": [0],
                     "variance_scenario": ["equal"],
                     "effect_kind": ["cohen_d"]},
            "replicates": 50, "seed": 11,
            "selection": {"target_rate": 1.0, "calib_reps": 100}},
            "calibrate")
        rows = run_calibrate(cfg)
        assert rows[0] == ("m,n,tau2,variance_scenario,effect_kind,"
                           "pi_pub,mean_published,note")
        assert rows[1].split(",")[5] == "0"

    def test_unreachable_target_is_flagged_not_fatal(self, tmp_path):
        cfg = load_run_config({
            "grid": {"m": [4], "delta": [30], "tau2": [0],
                     "variance_scenario": ["equal"],
                     "effect_kind": ["cohen_d"]},
            "eta": 80.0, "replicates": 20, "seed": 11,
            "selection": {"target_rate": 0.5, "calib_reps": 100}},
            "calibrate")
        rows = run_calibrate(cfg)
        assert rows[1].split(",")[-1] == "target-unreachable"


class TestCliProcess:
    def test_missing_dataset_is_exit_code_one(self, capsys):
        assert main(["analyze", "/nonexistent/file.csv"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_stdout_default(self, capsys):
        assert main(["analyze", str(FIXTURE), "--methods", "fixed"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("method,effect_kind,estimate")

    def test_console_entrypoint(self):
        proc = subprocess.run(
            [sys.executable, "-m", "metabias.cli", "analyze", str(FIXTURE),
             "--methods", "dl_random"],
            capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert proc.stdout.startswith("method,effect_kind")
