"""Tests for the command-line interface and its artifact outputs."""
import json
import os

import pytest

from gkflow.cli import main
from gkflow.config import parse_config


CYL = """
[run]
t_max = 0.01
out_dir = "{out}"
monitor_stride = 9

[shape]
kind = "cylinder"
r = 1.0
points = 160

[tolerances]
max_H_over_G = 5.000001
"""

DEMO = """
[run]
out_dir = "{out}"

[shape]
kind = "capsule"
r = 1.0
length = 16.0
points = 900

[surgery_params]
g_star = 0.5
cap_tip_factor = 1.0
{extra}
"""


def write_cfg(tmp_path, text, name="cfg.toml", **kw):
    out = tmp_path / "out"
    path = tmp_path / name
    path.write_text(text.format(out=out, **kw))
    return str(path), str(out)


class TestFlowRun:
    def test_cylinder_ok(self, tmp_path, capsys):
        cfg, out = write_cfg(tmp_path, CYL)
        assert main(["flow", "run", cfg]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["surgeries"] == 0
        for name in ("monitors_00.csv", "events.jsonl", "verdicts.json",
                     "config.toml", "final_00.csv", "monitors.png",
                     "profiles.png"):
            assert os.path.exists(os.path.join(out, name)), name

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["flow", "run", str(tmp_path / "nope.toml")]) == 2

    def test_invalid_cfl_exits_2(self, tmp_path):
        cfg, _ = write_cfg(tmp_path, CYL + "\n[step]\ncfl = 0.0\n")
        assert main(["flow", "run", cfg]) == 2

    def test_verdict_failure_exits_4(self, tmp_path):
        cfg, _ = write_cfg(tmp_path, CYL.replace("5.000001", "4.0"))
        assert main(["flow", "run", cfg]) == 4

    def test_deterministic_outputs(self, tmp_path):
        cfg1, out1 = write_cfg(tmp_path, CYL, name="a.toml")
        cfg2, out2 = write_cfg(tmp_path, CYL.replace('"{out}"', '"{out}2"'),
                               name="b.toml")
        assert main(["flow", "run", cfg1]) == 0
        assert main(["flow", "run", cfg2]) == 0
        for name in ("monitors_00.csv", "events.jsonl", "final_00.csv"):
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out1 + "2", name), "rb").read()
            assert a == b, name


class TestSurgeryDemo:
    def test_default_demo_passes(self, tmp_path, capsys):
        cfg, out = write_cfg(tmp_path, DEMO, extra="")
        assert main(["surgery", "demo", cfg]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"]
        for name in ("pre.csv", "post_0.csv", "post_1.csv",
                     "surgery_report.json", "surgery.png"):
            assert os.path.exists(os.path.join(out, name)), name

    def test_small_B_exits_4(self, tmp_path):
        cfg, out = write_cfg(tmp_path, DEMO, extra="B = 1.0")
        assert main(["surgery", "demo", cfg]) == 4
        assert os.path.exists(os.path.join(out, "surgery_report.json"))

    def test_zero_amplitude_trivially_passes(self, tmp_path):
        cfg, _ = write_cfg(tmp_path, DEMO, extra="tau0 = 0.0")
        assert main(["surgery", "demo", cfg]) == 0

    def test_no_neck_exits_2(self, tmp_path):
        cfg, _ = write_cfg(tmp_path, DEMO.replace("16.0", "6.0"), extra="")
        assert main(["surgery", "demo", cfg]) == 2


class TestVerifyAlgebra:
    def test_small_run_passes(self, capsys):
        assert main(["verify", "algebra", "--samples", "500",
                     "--seed", "1"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["passed"]
        assert summary["checked"]["pinching"] >= 400
        assert not summary["failures"]

    def test_zero_samples_exits_2(self):
        assert main(["verify", "algebra", "--samples", "0", "--seed", "1"]) == 2

    def test_replay_is_deterministic(self, capsys):
        main(["verify", "algebra", "--samples", "300", "--seed", "9"])
        first = capsys.readouterr().out
        main(["verify", "algebra", "--samples", "300", "--seed", "9"])
        assert capsys.readouterr().out == first


class TestPrintDefaults:
    def test_output_parses_back(self, capsys):
        assert main(["print-defaults"]) == 0
        text = capsys.readouterr().out
        from gkflow.config import default_config
        assert parse_config(text) == default_config()
