import csv
import json

import pytest

from capexeq.cli import main
from capexeq.sampler import read_dataset
from capexeq.scenario import save_scenario

from helpers import mini_scenario


@pytest.fixture()
def mini_yaml(tmp_path):
    path = tmp_path / "mini.yaml"
    save_scenario(mini_scenario(), path)
    return path


def run(*argv) -> int:
    return main([str(a) for a in argv])


def test_sample_train_solve_validate_pipeline(tmp_path, mini_yaml, capsys):
    data = tmp_path / "data.csv"
    assert run("sample", "--scenario", mini_yaml, "--n", "400", "--seed", "5",
               "--output", data) == 0
    assert data.exists()
    assert (tmp_path / "data.csv.manifest.json").exists()
    ds = read_dataset(data)
    assert len(ds) == 400

    models = tmp_path / "models"
    assert run("train", "--dataset", data, "--target", "all", "--output", models,
               "--seed", "5", "--rounds", "120", "--depth", "4") == 0
    model_files = sorted(
        p.name for p in models.glob("*.json") if not p.name.endswith(".manifest.json")
    )
    assert model_files == ["profit_main_A.json", "profit_main_B.json"]

    solution = tmp_path / "solution.csv"
    assert run("solve", "--scenario", mini_yaml, "--evaluator", "hybrid",
               "--models", models, "--seed", "5", "--de-generations", "150",
               "--n-starts", "1", "--output", solution) == 0
    assert solution.exists()
    assert (tmp_path / "solution_trace.csv").exists()
    manifest = json.loads((tmp_path / "solution.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "solve"
    assert manifest["version"]

    validated = tmp_path / "validated.csv"
    assert run("validate", "--scenario", mini_yaml, "--solution", solution,
               "--seed", "5", "--de-generations", "150", "--n-starts", "1",
               "--output", validated) == 0
    out = capsys.readouterr().out
    assert "benchmark equilibrium" in out

    with open(validated, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["genco", "k_main_A", "k_main_B", "objective"]
    assert len(rows) == 3


def test_solve_benchmark_deterministic(tmp_path, mini_yaml):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    for out in (out1, out2):
        assert run("solve", "--scenario", mini_yaml, "--evaluator", "benchmark",
                   "--seed", "9", "--de-generations", "120", "--n-starts", "1",
                   "--output", out) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "a_trace.csv").read_bytes() == (tmp_path / "b_trace.csv").read_bytes()


def test_sample_determinism_and_sweep(tmp_path, mini_yaml):
    d1, d2 = tmp_path / "d1.csv", tmp_path / "d2.csv"
    sweep = tmp_path / "sweep.csv"
    assert run("sample", "--scenario", mini_yaml, "--n", "50", "--seed", "3",
               "--output", d1) == 0
    assert run("sample", "--scenario", mini_yaml, "--n", "50", "--seed", "3",
               "--output", d2, "--payout-sweep", sweep,
               "--sweep-min", "50", "--sweep-max", "150", "--sweep-step", "10") == 0
    assert d1.read_bytes() == d2.read_bytes()
    with open(sweep, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["total_mw", "revenue", "operational_profit"]
    assert len(rows) == 12


def test_auction_command(tmp_path, capsys):
    segments = tmp_path / "segments.csv"
    offers = tmp_path / "offers.csv"
    segments.write_text("price_intercept,slope,max_quantity\n100,-0.02,10000\n")
    offers.write_text("bid,pmax,derate\n20,10000,1\n")
    out = tmp_path / "auction.csv"
    assert run("auction", "--segments", segments, "--offers", offers, "--output", out) == 0
    printed = capsys.readouterr().out.strip().splitlines()
    header = printed[0].split(",")
    values = dict(zip(header, printed[1].split(",")))
    assert float(values["clearing_price"]) == pytest.approx(20.0)
    assert float(values["cleared_mw"]) == pytest.approx(4000.0)
    assert float(values["cleared_fraction_0"]) == pytest.approx(0.4)
    assert out.read_text().splitlines() == printed


def test_missing_file_reports_and_fails(tmp_path, capsys):
    assert run("sample", "--scenario", tmp_path / "nope.yaml", "--output",
               tmp_path / "x.csv") == 1
    assert "error:" in capsys.readouterr().err


def test_bad_target_column(tmp_path, mini_yaml, capsys):
    data = tmp_path / "tiny.csv"
    assert run("sample", "--scenario", mini_yaml, "--n", "20", "--seed", "1",
               "--output", data) == 0
    assert run("train", "--dataset", data, "--target", "profit_main_MISSING",
               "--output", tmp_path / "m.json") == 1
    assert "profit_main_MISSING" in capsys.readouterr().err


def test_solve_hybrid_requires_models(tmp_path, mini_yaml, capsys):
    assert run("solve", "--scenario", mini_yaml, "--evaluator", "hybrid",
               "--output", tmp_path / "s.csv") == 1
    assert "--models" in capsys.readouterr().err


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        run("frobnicate")
    assert exc.value.code == 2


def test_malformed_solution_rejected(tmp_path, mini_yaml, capsys):
    bad = tmp_path / "bad_solution.csv"
    bad.write_text("genco,k_main_WRONG\n1,0\n2,0\n")
    assert run("validate", "--scenario", mini_yaml, "--solution", bad,
               "--output", tmp_path / "v.csv") == 1
    assert "does not match" in capsys.readouterr().err
