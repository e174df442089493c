import csv
import json
import os

import pytest
import yaml

from ..lib.cli import main
from ..lib.experiment_config import OUT_DIR_ENV, get_default_config, parse_config, render_config
from ..lib.reports import SWEEP_COLUMNS


@pytest.fixture(autouse=True)
def no_out_dir_override(monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)


def write_config(tmp_path, kind, name=None, **overrides):
    config = get_default_config(kind)
    config["out_dir"] = str(tmp_path / "out")
    config[kind].update(overrides)
    path = tmp_path / f"{name or kind}.yaml"
    path.write_text(render_config(config))
    return str(path)


def read_json(path):
    with open(path) as handle:
        return json.load(handle)


def test_solve_toy(tmp_path):
    assert main(["solve", "--config", write_config(tmp_path, "toy")]) == 0
    out = tmp_path / "out"
    summary = read_json(out / "toy_summary.json")
    assert summary["max_discrepancy"] <= 1e-9
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "solve"
    assert [entry["file"] for entry in manifest["outputs"]] == ["toy_losses.csv", "toy_losses.json", "toy_summary.json"]
    with open(out / "toy_losses.csv", newline="") as handle:
        rows = {row["classifier"]: row for row in csv.DictReader(handle)}
    assert float(rows["robust"]["loss_plus"]) == pytest.approx(0.5)
    assert float(rows["robust"]["ad"]) > float(rows["standard"]["ad"])


def test_solve_is_deterministic(tmp_path):
    config = write_config(tmp_path, "gaussian")
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["solve", "--config", config, "--out", str(first), "--format", "csv"]) == 0
    assert main(["solve", "--config", config, "--out", str(second), "--format", "csv"]) == 0
    for name in ("gaussian_gap.csv", "gaussian_losses.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_sweep_is_deterministic(tmp_path):
    small = dict(n_major=200, seeds=[0, 1], imbalances=[2.0], epsilons=[0.2], max_epochs=10, patience=5)
    config = write_config(tmp_path, "train", name="tiny", **small)
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["sweep", "--config", config, "--out", str(first), "--format", "csv"]) == 0
    assert main(["sweep", "--config", config, "--out", str(second), "--format", "csv"]) == 0
    assert (first / "sweep.csv").read_bytes() == (second / "sweep.csv").read_bytes()


def test_solve_gaussian_csv(tmp_path):
    config = write_config(tmp_path, "gaussian")
    assert main(["solve", "--config", config, "--format", "csv", "--seed", "5"]) == 0
    out = tmp_path / "out"
    assert (out / "gaussian_gap.csv").exists()
    assert not (out / "gaussian_gap.json").exists()
    with open(out / "gaussian_gap.csv", newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert [float(row["R"]) for row in rows] == [1.0, 1.5, 2.0, 5.0, 10.0]
    assert abs(float(rows[0]["gap"])) < 1e-9
    assert read_json(out / "manifest.json")["config"]["seed"] == 5


def test_solve_cauchy(tmp_path):
    assert main(["solve", "--config", write_config(tmp_path, "cauchy")]) == 0
    rows = read_json(tmp_path / "out" / "cauchy_gap.json")
    assert [row["epsilon"] for row in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert all(row["gap"] <= 1e-12 for row in rows)
    assert all(row["theorem_condition"] for row in rows)


@pytest.mark.parametrize("kind", ["stable_ic", "stable_ec"])
def test_solve_stable(tmp_path, kind):
    assert main(["solve", "--config", write_config(tmp_path, kind)]) == 0
    summary = read_json(tmp_path / "out" / f"{kind}_summary.json")
    assert summary["perturbation"]["epsilon"] > 0


def test_ridge(tmp_path):
    config = write_config(tmp_path, "ridge", noise_var=0.01, gram_samples=3)
    assert main(["ridge", "--config", config]) == 0
    summary = read_json(tmp_path / "out" / "ridge_summary.json")
    assert summary["orthogonal"]["closed1"] == pytest.approx(1 / 101)
    assert summary["g1_slope"] < 0
    assert len(read_json(tmp_path / "out" / "ridge_grams.json")) == 3


def test_sweep_and_train(tmp_path):
    small = dict(n_major=200, seeds=[0], imbalances=[1.0, 2.0], epsilons=[0.0, 0.2], max_epochs=10, patience=5)
    config = write_config(tmp_path, "train", name="tiny", **small)
    assert main(["sweep", "--config", config, "--format", "csv"]) == 0
    with open(tmp_path / "out" / "sweep.csv", newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == SWEEP_COLUMNS
    assert len(rows) == 5
    assert {row[0] for row in rows[1:]} == {"tiny"}

    assert main(["train", "--config", config, "--format", "json"]) == 0
    table = read_json(tmp_path / "out" / "train.json")
    assert len(table) == 4
    assert all(entry["runs"] == 1 for entry in table)


def test_verify_passes_and_writes_junit(tmp_path):
    config = write_config(
        tmp_path, "verify", n_major=20_000, scenarios=["gaussian_d3_balanced_l2"], certificates=False
    )
    junit = str(tmp_path / "verify.xml")
    assert main(["verify", "--config", config, "--junit", junit, "--seed", "1"]) == 0
    assert os.path.exists(junit)
    assert read_json(tmp_path / "out" / "verify.json")["passed"] is True
    assert read_json(tmp_path / "out" / "manifest.json")["command"] == "verify"


def test_verify_detects_injected_bias(tmp_path):
    config = write_config(
        tmp_path, "verify", n_major=20_000, scenarios=["gaussian_d3_balanced_l2"], certificates=False
    )
    assert main(["verify", "--config", config, "--seed", "1", "--inject-bias", "0.5"]) == 1


def test_verify_unknown_scenario(tmp_path):
    config = write_config(tmp_path, "verify", scenarios=["no_such_scenario"])
    assert main(["verify", "--config", config]) == 2


def test_config_errors_exit_with_two(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["solve", "--config", write_config(tmp_path, "ridge")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: toy\ntoy:\n  m: -1\n")
    assert main(["solve", "--config", str(bad)]) == 2


def test_domain_errors_exit_with_three(tmp_path):
    config = write_config(tmp_path, "toy", epsilon=0.4)
    assert main(["solve", "--config", config]) == 3


def test_log_file(tmp_path):
    assert main(["solve", "--config", write_config(tmp_path, "toy"), "--log-file"]) == 0
    log_path = tmp_path / "out" / "logs" / "robustgap.log"
    assert log_path.exists()
    assert "solve: toy" in log_path.read_text()


def test_out_override(tmp_path):
    elsewhere = tmp_path / "elsewhere"
    assert main(["solve", "--config", write_config(tmp_path, "toy"), "--out", str(elsewhere)]) == 0
    assert (elsewhere / "toy_summary.json").exists()


def test_generate_config(capsys):
    assert main(["--generate-config", "--kind", "ridge"]) == 0
    text = capsys.readouterr().out
    assert yaml.safe_load(text)["kind"] == "ridge"
    assert parse_config(text).params["k1"] == 100


def test_generate_config_interactive(tmp_path, monkeypatch, capsys):
    target = tmp_path / "saved.yaml"
    answers = iter(["toy", "", "", "", "", "", "", "", "", "", str(target)])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(answers))
    assert main(["--generate-config", "--interactive"]) == 0
    assert parse_config(target.read_text()).kind == "toy"
    assert "Configuration saved to" in capsys.readouterr().out


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(["--interactive"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
