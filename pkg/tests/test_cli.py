import csv

import pytest

from fsmdm import cli
from fsmdm.experiments import (CSV_COLUMNS, DEFAULT_SWEEPS, TRACE_COLUMNS, ExperimentConfig,
                               ResultsFormatError, cell_seed, format_row, run_cell, summarize)
from fsmdm.model import Hyperparams

FAST = ["--rounds", "40", "--trials", "1"]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_sweep_grids():
    assert DEFAULT_SWEEPS["outlier_sweep"][0] == 0.025
    assert DEFAULT_SWEEPS["outlier_sweep"][-1] == 0.3
    assert DEFAULT_SWEEPS["cauchy_sweep"][:3] == [0.2, 0.4, 0.6]
    assert DEFAULT_SWEEPS["cauchy_sweep"][-1] == 4.0


@pytest.mark.parametrize("scenario,count", [("outlier_sweep", 12), ("cauchy_sweep", 20)])
def test_sweep_row_counts(tmp_path, scenario, count, capsys):
    out = tmp_path / "r.csv"
    assert cli.main(["--scenario", scenario, "--out", str(out), *FAST]) == 0
    rows = read_rows(out)
    assert list(rows[0]) == list(CSV_COLUMNS)
    for alg in ("fsmdm", "dsrl"):
        assert len({r["sweep_value"] for r in rows if r["algorithm"] == alg}) == count
    assert "mean_rmse" in capsys.readouterr().out


def test_identical_seed_identical_bytes(tmp_path):
    paths = [tmp_path / f"{i}.csv" for i in range(2)]
    for p in paths:
        assert cli.main(["--scenario", "cauchy_sweep", "--sweep-values", "0.5,2",
                         "--trials", "2", "--rounds", "60", "--seed", "7", "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_cell_reproduces_from_logged_seed(tmp_path):
    out = tmp_path / "r.csv"
    cli.main(["--scenario", "outlier_sweep", "--sweep-values", "0.2", "--trials", "3",
              "--rounds", "60", "--seed", "5", "--out", str(out)])
    cfg = ExperimentConfig(scenario="outlier_sweep", trials=3, seed=5,
                           hyperparams=Hyperparams(k_global_max=60), sweep_values=[0.2])
    lines = out.read_text().splitlines()[1:]
    for line, rec in zip(lines, read_rows(out)):
        row, _ = run_cell(cfg, rec["algorithm"], 0.2, int(rec["trial"]), int(rec["cell_seed"]))
        assert format_row(row).rstrip("\n") == line


def test_cell_seed_ignores_sweep_value():
    assert cell_seed(3, 1) == cell_seed(3, 1) != cell_seed(3, 2)


def test_convergence_trace(tmp_path):
    out = tmp_path / "conv.csv"
    assert cli.main(["--scenario", "convergence", "--out", str(out), "--rounds", "25",
                     "--trials", "1", "--local-per-global", "3"]) == 0
    trace = read_rows(tmp_path / "conv_trace.csv")
    assert list(trace[0]) == list(TRACE_COLUMNS)
    assert len(trace) == 2 * 25
    assert {r["round"] for r in trace} == {str(k) for k in range(1, 26)}


def test_dsrl_rows_leave_dual_blank(tmp_path):
    out = tmp_path / "r.csv"
    cli.main(["--scenario", "single", "--out", str(out), *FAST])
    rows = {r["algorithm"]: r for r in read_rows(out)}
    assert rows["dsrl"]["dual_sum_norm"] == "" and rows["fsmdm"]["dual_sum_norm"] != ""


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# demo\nscenario = cauchy_sweep\ntrials = 1\nrounds = 30\n"
                   "sweep_values = 1.0\nalgorithms = fsmdm\nomega = 1.5\n")
    out = tmp_path / "r.csv"
    assert cli.main(["--config", str(cfg), "--out", str(out), "--trials", "2"]) == 0
    rows = read_rows(out)
    assert len(rows) == 2 and {r["algorithm"] for r in rows} == {"fsmdm"}
    assert rows[0]["rounds"] == "30"


def test_heterogeneous_mode_runs(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["--async-mode", "heterogeneous", "--algorithms", "fsmdm",
                     "--out", str(out), *FAST]) == 0
    assert read_rows(out)[0]["rounds"] == "40"


@pytest.mark.parametrize("args", [
    ["--trials", "0"],
    ["--omega", "-1"],
    ["--algorithms", "magic"],
    ["--scenario", "outlier_sweep", "--sweep-values", "1.5"],
    ["--config", "/nonexistent/file.cfg"],
])
def test_config_errors_exit_2(tmp_path, args, capsys):
    assert cli.main([*args, "--out", str(tmp_path / "r.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_error_names_field():
    with pytest.raises(ValueError, match="trials"):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError, match="hyperparams"):
        ExperimentConfig(hyperparams=Hyperparams(c=1.0, alpha=1.0))


def test_bad_config_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trials = 1\nwhatever = 3\n")
    assert cli.main(["--config", str(cfg)]) == 2
    assert "bad.cfg:2" in capsys.readouterr().err


def test_runtime_error_exit_1(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path / "missing" / "r.csv"), *FAST]) == 1
    assert "error" in capsys.readouterr().err


def test_interrupt_exit_130(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise KeyboardInterrupt
    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["--out", str(tmp_path / "r.csv")]) == 130
    assert "partial" in capsys.readouterr().err


def test_partial_rows_flushed(tmp_path, monkeypatch):
    from fsmdm import experiments

    calls = []
    real = experiments.run_cell

    def flaky(*a, **k):
        calls.append(1)
        if len(calls) == 3:
            raise KeyboardInterrupt
        return real(*a, **k)

    monkeypatch.setattr(experiments, "run_cell", flaky)
    out = tmp_path / "r.csv"
    cfg = ExperimentConfig(scenario="single", trials=2, output_path=str(out),
                           hyperparams=Hyperparams(k_global_max=20))
    with pytest.raises(KeyboardInterrupt):
        experiments.run_experiment(cfg, echo=False)
    assert len(read_rows(out)) == 2


class TestSummarize:
    def write(self, tmp_path, body):
        p = tmp_path / "s.csv"
        p.write_text(",".join(CSV_COLUMNS) + "\n" + body)
        return p

    def row(self, alg, value, trial, rmse):
        return f"single,{alg},{value},{trial},1,{rmse},{rmse},0.0,0.0,10\n"

    def test_mean_and_stderr(self, tmp_path):
        p = self.write(tmp_path, self.row("fsmdm", 0.1, 0, 1.0) + self.row("fsmdm", 0.1, 1, 3.0))
        (r,) = summarize(p)
        assert (r.mean_rmse, r.stderr, r.trials, r.flag) == (2.0, 1.0, 2, "")

    def test_single_trial_flag(self, tmp_path):
        (r,) = summarize(self.write(tmp_path, self.row("dsrl", 0.1, 0, 4.0)))
        assert r.stderr == 0.0 and r.flag == "single-trial"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ResultsFormatError, match="line 1"):
            summarize(p)

    def test_malformed_line_number(self, tmp_path):
        p = self.write(tmp_path, self.row("fsmdm", 0.1, 0, 1.0) + "single,fsmdm,0.1\n")
        with pytest.raises(ResultsFormatError, match="line 3"):
            summarize(p)
        p = self.write(tmp_path, self.row("fsmdm", 0.1, 0, "oops"))
        with pytest.raises(ResultsFormatError, match="line 2"):
            summarize(p)

    def test_cli_subcommand(self, tmp_path, capsys):
        p = self.write(tmp_path, self.row("fsmdm", 0.1, 0, 1.0) + self.row("fsmdm", 0.1, 1, 3.0))
        assert cli.main(["summarize", str(p)]) == 0
        assert "fsmdm" in capsys.readouterr().out
        bad = tmp_path / "bad.csv"
        bad.write_text("")
        assert cli.main(["summarize", str(bad)]) == 2
