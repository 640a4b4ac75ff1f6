import csv
import logging

import pytest

from fairslot.cli import main
from fairslot.experiments import (RESULT_COLUMNS, DeskSize, GridSpec, emit_plots, read_results,
                                  one_at_a_time_sweep, run_grid)
from fairslot.io import load_instance
from fairslot.model import validate_instance

SMALL = DeskSize(n_billboards=20, n_windows=4, n_users=300, checkins_per_user=5)
SMALL_FLAGS = ["--billboards", "20", "--windows", "4", "--users", "300", "--checkins-per-user", "5"]


def test_default_grid_rows(tmp_path):
    rows = run_grid(GridSpec(desk=SMALL), tmp_path)
    assert len(rows) == 12
    assert {r["status"] for r in rows} <= {"ok", "floor_guard"}
    with open(tmp_path / "results.csv", newline="") as fh:
        assert next(csv.reader(fh)) == RESULT_COLUMNS
    assert (tmp_path / "aggregates.csv").is_file()
    assert (tmp_path / "exposure_timing.csv").is_file()


def test_toy_cell_greedy_strands_someone_mms_does_not(tmp_path):
    rows = run_grid(GridSpec(source="toy_market", algorithms=("greedy", "mms"), seeds=(42,)),
                    tmp_path)
    by_algo = {r["algorithm"]: r for r in rows}
    assert by_algo["greedy"]["empty_handed"] >= 1
    assert by_algo["mms"]["empty_handed"] == 0
    assert by_algo["mms"]["alpha"] == pytest.approx(1.15)


def test_grid_validation():
    assert GridSpec(epsilons=(1.5,)).validate()
    assert GridSpec(algorithms=("bogus",)).validate()
    assert GridSpec().validate() == []
    assert GridSpec(thetas=(77.0,)).out_of_table() == ["theta=77.0"]


def test_sweep_shape():
    sweeps = one_at_a_time_sweep()
    assert len(sweeps) == 5
    assert sweeps[0].alphas == (0.4, 0.6, 0.8, 1.0, 1.2) and sweeps[0].betas == (0.05,)


def test_explicit_advertiser_counts(tmp_path):
    rows = run_grid(GridSpec(desk=SMALL, advertisers=(3, 7), algorithms=("topk",), seeds=(0,)),
                    tmp_path)
    assert [r["n_advertisers"] for r in rows] == [3, 7]
    assert rows[1]["beta"] == pytest.approx(1 / 7)


def test_plots_per_alpha(tmp_path):
    rows = run_grid(GridSpec(desk=SMALL, alphas=(0.4, 0.6, 0.8, 1.0, 1.2), advertisers=(4, 8),
                             algorithms=("greedy", "topk"), seeds=(0,)), tmp_path)
    files = emit_plots(tmp_path / "results.csv", tmp_path / "plots")
    svgs = sorted(p.name for p in files if p.suffix == ".svg")
    assert len(svgs) == 6 and "runtime.svg" in svgs
    assert len(read_results(tmp_path / "results.csv")) == len(rows)


def test_single_row_plot(tmp_path):
    rows = run_grid(GridSpec(desk=SMALL, algorithms=("topk",), seeds=(0,)), tmp_path)
    files = emit_plots(rows, tmp_path / "plots")
    svg = next(p for p in files if p.suffix == ".svg" and p.name.startswith("utility"))
    assert svg.read_text().lstrip().startswith("<?xml")
    series = next(p for p in files if p.suffix == ".csv" and p.name.startswith("utility"))
    assert len(series.read_text().strip().splitlines()) == 2


def test_empty_results_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        assert emit_plots([], tmp_path) == []
    assert "nothing to plot" in caplog.text


def test_cli_run_and_plot(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--out", str(out), "--algo", "topk,random", "--seed", "0"] + SMALL_FLAGS) == 0
    assert len(read_results(out / "results.csv")) == 2
    assert main(["plot", "--out", str(out)]) == 0
    assert main(["plot", "--out", str(tmp_path / "missing")]) == 2


def test_cli_invalid_spec(tmp_path):
    assert main(["run", "--out", str(tmp_path), "--epsilon", "1.5"]) == 3
    assert main(["run", "--out", str(tmp_path), "--algo", "nope"]) == 3


def test_cli_config_overrides_flags(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("# small run\nalgo = topk\nseed = 4\nalpha = 60%\n")
    out = tmp_path / "cfg"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--algo", "greedy"]
                + SMALL_FLAGS) == 0
    (row,) = read_results(out / "results.csv")
    assert row["algorithm"] == "topk" and row["seed"] == "4"
    assert float(row["alpha"]) == pytest.approx(0.6)
    cfg.write_text("colour = blue\n")
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 3


def test_cli_gen_writes_loadable_instance(tmp_path):
    out = tmp_path / "inst"
    assert main(["gen", "--out", str(out), "--seed", "1"] + SMALL_FLAGS) == 0
    inst = load_instance(out)
    assert validate_instance(inst) == [] and inst.n_advertisers == 20
    rows = run_grid(GridSpec(source=str(out), algorithms=("mms",), seeds=(0,)), tmp_path / "r")
    assert rows[0]["status"] == "ok" and rows[0]["n_advertisers"] == 20


def test_cli_verify(capsys):
    assert main(["verify", "--trials", "6", "--seed", "0"]) == 0
    assert "all pass" in capsys.readouterr().out
