import json

import numpy as np
import pytest

from nprach.cli import main
from nprach.waveform import load_iq


def test_pattern_defaults(capsys):
    assert main(["pattern", "--config", "defaults", "--n0", "0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[:4] == ["0, 0", "1, 1", "2, 7", "3, 6"]
    assert len(lines) == 128


def test_pattern_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("preamble_groups = 8\n")
    assert main(["pattern", "--config", str(cfg), "--n0", "11", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.splitlines()[:4] == ["0, 11", "1, 10", "2, 4", "3, 5"]
    assert (tmp_path / "pattern_n0_11.txt").exists()


def test_generate(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("preamble_groups = 8\n")
    assert main(["generate", "--config", str(cfg), "--n0", "3", "--out", str(tmp_path)]) == 0
    buf, header = load_iq(tmp_path / "preamble_n0_3.iq")
    assert len(buf) == 3072 and header["config"]["n0"] == 3
    assert np.allclose(np.abs(buf.samples), 1 / 64, rtol=1e-6)


def test_campaign_invalid_config_exit_1(tmp_path, capsys):
    scn = tmp_path / "s.toml"
    scn.write_text("preamble_groups = 6\nthreshold = 2.0\n")
    assert main(["campaign", "--scenario", str(scn), "--out", str(tmp_path / "o")]) == 1
    assert "L mod 4" in capsys.readouterr().err


def test_unknown_flag_exit_1():
    assert main(["pattern", "--frobnicate"]) == 1


def test_unknown_scenario_key_exit_1(tmp_path):
    scn = tmp_path / "s.toml"
    scn.write_text("trails = 5\n")
    assert main(["campaign", "--scenario", str(scn)]) == 1


def test_missing_file_exit_2(tmp_path):
    assert main(["campaign", "--scenario", str(tmp_path / "nope.toml")]) == 2


def test_calibrate_deterministic(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("preamble_groups = 8\n")
    args = ["calibrate", "--config", str(cfg), "--target-fa", "0.01", "--trials", "300", "--seed", "7"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args + ["--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out == first
    rec = json.loads((tmp_path / "threshold.json").read_text())
    assert rec["threshold"] == float(first) and rec["target_fa"] == 0.01


def test_campaign_end_to_end(tmp_path, capsys):
    scn = tmp_path / "s.toml"
    scn.write_text('coverage_class = "C1"\nfading = "flat_rayleigh"\nn_trials = 20\n'
                   'calibration_trials = 200\ntarget_fa = 0.01\n')
    out = tmp_path / "res"
    assert main(["campaign", "--scenario", str(scn), "--out", str(out), "--seed", "3"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["trials"] == 20 and s["scenario"]["master_seed"] == 3
    assert s["detections"] + s["misdetections"] == 20
    rows = (out / "trials.csv").read_text().splitlines()
    assert len(rows) == 21
