import builtins
import math

import pytest

from ..lib import experiment_config
from ..lib.errors import ConfigError
from ..lib.experiment_config import (
    DEFAULT_SECTIONS,
    KINDS,
    OUT_DIR_ENV,
    get_default_config,
    load_config,
    parse_config,
    render_config,
    run_interactive_config,
)


@pytest.fixture(autouse=True)
def no_out_dir_override(monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)


@pytest.mark.parametrize("kind", KINDS)
def test_default_configs_validate(kind):
    text = render_config(get_default_config(kind))
    assert text.startswith(f"# robustgap experiment configuration ({kind})")
    cfg = parse_config(text)
    assert cfg.kind == kind
    assert cfg.params == DEFAULT_SECTIONS[kind]
    assert (cfg.seed, cfg.out_dir, cfg.format) == (0, "results", "both")


def test_render_without_comments():
    text = render_config(get_default_config("toy"), include_comments=False)
    assert not text.startswith("#")
    assert parse_config(text).params["m"] == 4


def test_unknown_kind():
    with pytest.raises(ConfigError) as info:
        get_default_config("poisson")
    assert info.value.field == "kind"
    with pytest.raises(ConfigError):
        parse_config("kind: poisson\n")


def test_missing_section_takes_defaults():
    cfg = parse_config("kind: cauchy\nseed: 4\n")
    assert cfg.seed == 4
    assert cfg.params["epsilons"] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_unknown_section_key_reports_line():
    text = "kind: gaussian\nseed: 1\ngaussian:\n  epsilon: 0.1\n  bogus: 3\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == "gaussian.bogus"
    assert info.value.line == 5
    assert "line 5" in str(info.value)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as info:
        parse_config("kind: toy\nextra: 1\n")
    assert info.value.field == "extra"
    assert info.value.line == 2


def test_out_of_range_value_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("kind: gaussian\ngaussian:\n  epsilon: -1\n")
    assert info.value.field == "gaussian.epsilon"
    assert info.value.line == 3


def test_bad_vector_entry_points_at_the_vector():
    with pytest.raises(ConfigError) as info:
        parse_config("kind: gaussian\ngaussian:\n  theta_plus: [1, oops, 0]\n")
    assert info.value.field == "gaussian.theta_plus[1]"
    assert info.value.line == 3


def test_malformed_yaml_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("kind: gaussian\nseed: [1, 2\nformat: csv\n")
    assert info.value.line is not None
    assert "malformed YAML" in str(info.value)


def test_norm_indices():
    assert parse_config("kind: gaussian\ngaussian:\n  p: inf\n").params["p"] == math.inf
    assert parse_config("kind: gaussian\ngaussian:\n  p: .inf\n").params["p"] == math.inf
    assert parse_config("kind: gaussian\ngaussian:\n  p: 1.5\n").params["p"] == 1.5
    with pytest.raises(ConfigError):
        parse_config("kind: gaussian\ngaussian:\n  p: 0.5\n")


def test_cross_checks():
    with pytest.raises(ConfigError) as info:
        parse_config("kind: ridge\nridge:\n  k1: 5\n  k2: 10\n")
    assert info.value.field == "ridge.k1"
    with pytest.raises(ConfigError) as info:
        parse_config("kind: gaussian\ngaussian:\n  theta_minus: [0, 0]\n")
    assert info.value.field == "gaussian.theta_minus"
    with pytest.raises(ConfigError) as info:
        parse_config("kind: train\ntrain:\n  family: stable_ic\n")
    assert info.value.field == "train.alpha"
    with pytest.raises(ConfigError):
        parse_config("kind: train\ntrain:\n  family: stable_ec\n  alpha: 1.5\n")


def test_train_schedule_keys():
    cfg = parse_config("kind: train\ntrain:\n  lr_decay: 1\n")
    assert cfg.params["lr_decay"] == 1
    assert cfg.params["decay_patience"] == 10
    assert cfg.params["max_epochs"] == 500
    with pytest.raises(ConfigError) as info:
        parse_config("kind: train\ntrain:\n  lr_decay: 1.5\n")
    assert info.value.field == "train.lr_decay"


def test_booleans_are_not_numbers():
    with pytest.raises(ConfigError):
        parse_config("kind: toy\ntoy:\n  m: true\n")
    with pytest.raises(ConfigError):
        parse_config("kind: verify\nverify:\n  certificates: 1\n")


def test_environment_overrides_out_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path))
    assert parse_config("kind: toy\nout_dir: elsewhere\n").out_dir == str(tmp_path)


def test_with_overrides():
    cfg = parse_config("kind: toy\n").with_overrides(seed=9, fmt="csv")
    assert (cfg.seed, cfg.format, cfg.out_dir) == (9, "csv", "results")
    assert cfg.to_dict()["toy"]["n"] == 48


def test_load_config(tmp_path):
    path = tmp_path / "toy.yaml"
    path.write_text(render_config(get_default_config("toy")))
    assert load_config(str(path)).source == str(path)
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))


def test_interactive_config(monkeypatch):
    answers = iter(["toy", "7", "", "json", "5", "", "", "", "0.8", "", "my.yaml"])
    monkeypatch.setattr(builtins, "input", lambda prompt="": next(answers))
    config, save_path = run_interactive_config()
    assert save_path == "my.yaml"
    cfg = parse_config(render_config(config))
    assert (cfg.kind, cfg.seed, cfg.format) == ("toy", 7, "json")
    assert cfg.params["m"] == 5
    assert cfg.params["epsilon"] == 0.8
    assert cfg.params["n"] == 48


def test_interactive_retries_bad_answers(monkeypatch, capsys):
    answers = iter(["verify", "x", "3", "", "xml", "csv", "", "", "maybe", "n", ""])
    monkeypatch.setattr(builtins, "input", lambda prompt="": next(answers))
    config, save_path = run_interactive_config()
    assert config["seed"] == 3
    assert config["format"] == "csv"
    assert config["verify"]["certificates"] is False
    assert config["verify"]["scenarios"] is None
    assert save_path == "verify.yaml"
    out = capsys.readouterr().out
    assert "Please enter an integer value." in out
    assert "Please respond with 'y' or 'n'." in out
    assert experiment_config.DEFAULT_SECTIONS["verify"]["certificates"] is True
