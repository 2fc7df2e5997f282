import csv
import json

import pytest

from bergman_lab.cli import read_config_file, resolve_config, run, UsageError


def _run(tmp_path, *args):
    return run([*args, "--out-dir", str(tmp_path)])


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _summary(path):
    return json.loads(path.read_text())


class TestSubcommands:
    def test_moments(self, tmp_path):
        assert _run(tmp_path, "moments", "--m", "1,2", "--cap", "6") == 0
        rows = _csv(tmp_path / "moments.csv")
        assert rows[0] == ["alpha_1", "alpha_2", "log_moment", "moment"]
        assert len(rows) - 1 == 28
        doc = _summary(tmp_path / "moments.summary.json")
        assert doc["schema"] == "bergman-lab/1"
        assert doc["config"]["m"] == "1,2" and doc["wall_time"] is None

    def test_seventeen_digits(self, tmp_path):
        _run(tmp_path, "moments", "--m", "1,1", "--cap", "1")
        value = _csv(tmp_path / "moments.csv")[1][3]
        assert len(value.replace(".", "").replace("e-", "").lstrip("0")) >= 16

    def test_kernel_eval(self, tmp_path):
        args = ["kernel-eval", "--m", "1,1", "--z", "0.5,0", "--w", "0.5,0", "--export-series", "true"]
        assert _run(tmp_path, *args) == 0
        doc = _summary(tmp_path / "kernel-eval.summary.json")
        assert doc["result"]["value"][0] == pytest.approx(2 / 3.141592653589793**2 * 0.75**-3, rel=1e-10)
        assert (tmp_path / "kernel-eval.series.csv").exists()

    def test_kernel_eval_outside_is_usage_error(self, tmp_path):
        assert _run(tmp_path, "kernel-eval", "--m", "1,1", "--z", "0.9,0.9", "--w", "0,0") == 1

    @pytest.mark.parametrize("kind", ["rotation", "permutation"])
    def test_check_transform(self, tmp_path, kind):
        assert _run(tmp_path, "check-transform", "--m", "1,2", "--map", kind, "--pairs", "10", "--cap", "40",
                    "--closed-forms", "false") == 0
        assert len(_csv(tmp_path / "check-transform.csv")) == 11

    def test_check_transform_ball_automorphism(self, tmp_path):
        assert _run(tmp_path, "check-transform", "--m", "1,1", "--map", "ball-automorphism", "--pairs", "10") == 0

    def test_ball_automorphism_needs_ball(self, tmp_path):
        assert _run(tmp_path, "check-transform", "--m", "1,2", "--map", "ball-automorphism") == 1

    def test_check_covering(self, tmp_path):
        assert _run(tmp_path, "check-covering", "--m", "1,1", "--j", "2",
                    "--z", "0.4+0.1i,0.3-0.2i", "--w", "0.2+0.1i,-0.1+0.3i") == 0
        assert _summary(tmp_path / "check-covering.summary.json")["result"]["residual"] <= 1e-6

    def test_check_covering_threshold_failure(self, tmp_path):
        code = _run(tmp_path, "check-covering", "--m", "1,1", "--j", "2", "--caps", "4,4",
                    "--closed-forms", "false", "--tol", "1e-12",
                    "--z", "0.6+0.1i,0.5-0.2i", "--w", "0.4+0.1i,-0.3+0.3i")
        assert code == 2

    def test_project(self, tmp_path):
        assert _run(tmp_path, "project", "--m", "1,1", "--g", "mono:1,2", "--cap", "6",
                    "--idempotence", "true", "--map", "rotation:0.3,0.5") == 0
        rows = _csv(tmp_path / "project.csv")
        assert rows[0] == ["alpha_1", "alpha_2", "coeff_real", "coeff_imag"]
        doc = _summary(tmp_path / "project.summary.json")
        assert doc["result"]["idempotence_residual"] <= 1e-10

    def test_project_bad_function(self, tmp_path):
        assert _run(tmp_path, "project", "--m", "1,1", "--g", "wiggle:3") == 1
        assert _run(tmp_path, "project", "--m", "1,1", "--g", "mono:1") == 1

    def test_zero_search_doctored(self, tmp_path):
        assert _run(tmp_path, "zero-search", "--doctored", "true", "--starts", "4",
                    "--expect", "ZeroFound") == 0
        assert _summary(tmp_path / "zero-search.summary.json")["result"]["status"] == "ZeroFound"

    def test_zero_search_expectation_failure(self, tmp_path):
        assert _run(tmp_path, "zero-search", "--doctored", "true", "--starts", "2",
                    "--expect", "PositiveOnSearch") == 2

    def test_zero_transfer(self, tmp_path):
        assert _run(tmp_path, "zero-transfer", "--m", "1,1", "--j", "2", "--cap", "40", "--starts", "3") == 0
        assert len(_csv(tmp_path / "zero-transfer.csv")) == 3

    def test_ramadanov_passes_with_more_levels(self, tmp_path):
        assert _run(tmp_path, "ramadanov", "--j", "1,2,4,8,16") == 0
        assert len(_csv(tmp_path / "ramadanov.csv")) == 6

    def test_ramadanov_default_misses_two_percent(self, tmp_path):
        # the j=8 gap is 5.4%, see the acceptance notes in the README
        assert _run(tmp_path, "ramadanov") == 2
        rows = _csv(tmp_path / "ramadanov.csv")
        assert len(rows) == 5 and float(rows[-1][5]) > 0.02

    def test_ramadanov_escaping_point(self, tmp_path):
        assert _run(tmp_path, "ramadanov", "--points", "0.8,0.7") == 1


class TestUsageErrors:
    def test_unknown_subcommand(self, tmp_path):
        assert _run(tmp_path, "frobnicate") == 1

    def test_missing_required(self, tmp_path, capsys):
        assert _run(tmp_path, "moments") == 1
        assert "'m'" in capsys.readouterr().err

    def test_bad_field_named(self, tmp_path, capsys):
        assert _run(tmp_path, "moments", "--m", "1,x") == 1
        assert "'m'" in capsys.readouterr().err

    def test_bad_cap_named(self, tmp_path, capsys):
        assert _run(tmp_path, "moments", "--m", "1", "--cap", "six") == 1
        assert "'cap'" in capsys.readouterr().err

    def test_unknown_config_field(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("m = 1,1\nbogus = 3\n")
        assert _run(tmp_path, "moments", "--config", str(cfg)) == 1

    def test_malformed_config_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("m 1,1\n")
        assert _run(tmp_path, "moments", "--config", str(cfg)) == 1

    def test_missing_config(self, tmp_path):
        assert _run(tmp_path, "moments", "--config", str(tmp_path / "nope.cfg")) == 1


class TestConfig:
    def test_precedence(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nm = 1,2\ncap = 3\n")
        echo, parsed = resolve_config("moments", {"cap": "2", "m": None}, str(cfg))
        assert echo["m"] == "1,2" and parsed["cap"] == 2
        echo, parsed = resolve_config("moments", {"m": "1"}, None)
        assert parsed["cap"] == 6

    def test_file_values_used(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("m = 1,2\ncap = 2\n")
        assert _run(tmp_path, "moments", "--config", str(cfg)) == 0
        assert len(_csv(tmp_path / "moments.csv")) - 1 == 6

    def test_read_summary_json(self, tmp_path):
        _run(tmp_path, "moments", "--m", "1,3", "--cap", "2")
        cfg = read_config_file(str(tmp_path / "moments.summary.json"))
        assert cfg["m"] == "1,3" and cfg["cap"] == "2"

    def test_resolve_rejects_missing(self):
        with pytest.raises(UsageError):
            resolve_config("moments", {}, None)


class TestReproducibility:
    def _rerun_identical(self, tmp_path, args):
        first = tmp_path / "a"
        second = tmp_path / "b"
        code = run([*args, "--out-dir", str(first)])
        summary = first / f"{args[0]}.summary.json"
        assert run([args[0], "--config", str(summary), "--out-dir", str(second)]) == code
        for name in (f"{args[0]}.csv", f"{args[0]}.summary.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_summary_feedback_moments(self, tmp_path):
        self._rerun_identical(tmp_path, ["moments", "--m", "2,3", "--cap", "4"])

    def test_summary_feedback_search(self, tmp_path):
        self._rerun_identical(tmp_path, ["zero-search", "--m", "1,2", "--cap", "30", "--starts", "3",
                                         "--seed", "9", "--max-iters", "300"])

    def test_summary_feedback_project(self, tmp_path):
        self._rerun_identical(tmp_path, ["project", "--m", "1,2", "--g", "bump:0.5", "--cap", "8"])

    @pytest.mark.parametrize("cmd", [
        ["zero-search", "--m", "1,2", "--cap", "30", "--starts", "4", "--seed", "3", "--max-iters", "300"],
        ["project", "--m", "1,1", "--g", "bump:0.4", "--cap", "10", "--idempotence", "true"],
    ])
    def test_threads_do_not_change_output(self, tmp_path, cmd):
        run([*cmd, "--threads", "1", "--out-dir", str(tmp_path / "t1")])
        run([*cmd, "--threads", "4", "--out-dir", str(tmp_path / "t4")])
        stem = cmd[0]
        assert (tmp_path / "t1" / f"{stem}.csv").read_bytes() == (tmp_path / "t4" / f"{stem}.csv").read_bytes()
        a = _summary(tmp_path / "t1" / f"{stem}.summary.json")
        b = _summary(tmp_path / "t4" / f"{stem}.summary.json")
        a["config"].pop("threads"), b["config"].pop("threads")
        assert a == b

    def test_record_time(self, tmp_path):
        _run(tmp_path, "moments", "--m", "1", "--record-time", "true")
        assert _summary(tmp_path / "moments.summary.json")["wall_time"] >= 0


def test_env_outdir(tmp_path, monkeypatch):
    monkeypatch.setenv("BERGMAN_LAB_OUTDIR", str(tmp_path / "env"))
    assert run(["moments", "--m", "1", "--cap", "2", "--name", "tiny"]) == 0
    assert (tmp_path / "env" / "tiny.csv").exists()
    assert (tmp_path / "env" / "tiny.summary.json").exists()


def test_console_script(tmp_path):
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "bergman_lab.cli", "moments", "--m", "1", "--cap", "1",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["passed"] is True


def test_documented_zero_search_example(tmp_path):
    assert _run(tmp_path, "zero-search", "--m", "1,1", "--cap", "60", "--starts", "64", "--seed", "7") == 0
    assert _summary(tmp_path / "zero-search.summary.json")["result"]["status"] == "PositiveOnSearch"
