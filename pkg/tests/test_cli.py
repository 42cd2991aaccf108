"""End-to-end command-line behavior with small sampler settings."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from latentratings.cli import main

FAST = ["--chains", "2", "--warmup", "120", "--samples", "120"]


def run_cli(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    code = run_cli(["simulate", "--preset", "study1", "--seed", "5150", "--out", out])
    assert code == 0
    return out


class TestSimulate:
    def test_outputs_exist(self, sim_dir):
        for name in ("ratings.csv", "truth.csv", "sim_manifest.json", "run_manifest.json"):
            assert (sim_dir / name).exists()

    def test_byte_identical_reruns(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        run_cli(["simulate", "--preset", "study1", "--seed", "9", "--out", a])
        run_cli(["simulate", "--preset", "study1", "--seed", "9", "--out", b])
        assert (a / "ratings.csv").read_bytes() == (b / "ratings.csv").read_bytes()
        assert (a / "truth.csv").read_bytes() == (b / "truth.csv").read_bytes()
        assert (a / "sim_manifest.json").read_bytes() == (b / "sim_manifest.json").read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            "n_calls = 30\nn_ratings = 3\nmodel = base\nintercept = -1.0\n"
            "betas =\ntau = 0.4\nfpr = 0.2\nfnr = 0.1\ncovariates =\n"
            "treatment_prob = 0.5\nseed = 4\n"
        )
        out = tmp_path / "out"
        assert run_cli(["simulate", "--config", cfg, "--out", out]) == 0
        assert (out / "ratings.csv").exists()

    def test_needs_preset_or_config(self, tmp_path, capsys):
        assert run_cli(["simulate", "--out", tmp_path / "x"]) == 2


class TestFit:
    def test_fit_and_reports(self, sim_dir, tmp_path):
        out = tmp_path / "fit"
        code = run_cli(
            ["fit", "--data", sim_dir / "ratings.csv", "--model", "base",
             "--out", out, "--seed", "3", "--dump-draws", "--allow-nonconverged", *FAST]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["model"] == "base"
        assert set(report["params"]) == {
            "intercept", "beta_x1", "beta_x2", "tau", "fpr", "fnr"
        }
        assert 0.0 < report["params"]["fpr"]["mean"] < 0.5
        per_call = (out / "per_call.csv").read_text().splitlines()
        assert per_call[0] == "call_id,post_mean,post_lo95,post_hi95"
        assert len(per_call) == 1001
        draws = (out / "draws.csv").read_text().splitlines()
        assert draws[0] == "chain,iter,intercept,beta_x1,beta_x2,tau,fpr,fnr"
        assert len(draws) == 1 + 2 * 120

    def test_nonconvergence_exit_code(self, sim_dir, tmp_path):
        args = ["fit", "--data", sim_dir / "ratings.csv", "--out", tmp_path / "f",
                "--seed", "3", "--chains", "2", "--warmup", "15", "--samples", "30"]
        assert run_cli(args) == 3
        assert run_cli(args + ["--allow-nonconverged"]) == 0

    def test_rounds_keep(self, sim_dir, tmp_path):
        out = tmp_path / "fit1"
        code = run_cli(
            ["fit", "--data", sim_dir / "ratings.csv", "--rounds-keep", "1",
             "--out", out, "--seed", "3", "--allow-nonconverged", *FAST]
        )
        assert code == 0
        manifest = json.loads((out / "report.json").read_text())["manifest"]
        assert manifest["n_calls"] == 1000

    def test_missing_data_file(self, tmp_path):
        assert run_cli(["fit", "--data", tmp_path / "nope.csv", "--out", tmp_path / "o",
                        *FAST]) == 2

    def test_byte_stable_reports(self, sim_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            run_cli(["fit", "--data", sim_dir / "ratings.csv", "--out", out,
                     "--seed", "11", "--allow-nonconverged", *FAST])
            outs.append(out)
        assert (outs[0] / "report.json").read_bytes() == (outs[1] / "report.json").read_bytes()
        assert (outs[0] / "per_call.csv").read_bytes() == (outs[1] / "per_call.csv").read_bytes()


class TestAnalyzeCompare:
    def test_analyze(self, sim_dir, tmp_path):
        fit_out = tmp_path / "fit"
        run_cli(["fit", "--data", sim_dir / "ratings.csv", "--out", fit_out,
                 "--seed", "3", "--allow-nonconverged", *FAST])
        out = tmp_path / "ana"
        code = run_cli(["analyze", "--per-call", fit_out / "per_call.csv",
                        "--truth", sim_dir / "truth.csv", "--out", out])
        assert code == 0
        rec = json.loads((out / "recovery.json").read_text())
        assert 0.5 < rec["corr_with_truth"] <= 1.0
        assert 0.9 < rec["auc"] <= 1.0

    def test_compare(self, sim_dir, tmp_path):
        out = tmp_path / "cmp"
        code = run_cli(
            ["compare", "--data", sim_dir / "ratings.csv", "--truth", sim_dir / "truth.csv",
             "--methods", "base-5,base-1,mv-5", "--out", out,
             "--seed", "3", "--allow-nonconverged", *FAST]
        )
        assert code == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0] == "method,corr,fpr,fnr,tau,eta"
        assert len(lines) == 4
        payload = json.loads((out / "comparison.json").read_text())
        methods = [m["method"] for m in payload["methods"]]
        assert methods == ["base-5", "base-1", "mv-5"]
        assert (out / "fig_draws_base-5.csv").exists()
        assert (out / "fig_per_call_base-5.csv").exists()

    def test_bad_method_token(self, sim_dir, tmp_path):
        code = run_cli(
            ["compare", "--data", sim_dir / "ratings.csv", "--truth", sim_dir / "truth.csv",
             "--methods", "bogus-3", "--out", tmp_path / "x", *FAST]
        )
        assert code == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "latentratings.cli", "--version"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
