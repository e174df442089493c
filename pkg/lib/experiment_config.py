"""Experiment configuration: default templates, YAML rendering, validation and interactive prompts."""

from __future__ import annotations

import math
import os
from copy import deepcopy
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml

from .errors import ConfigError


KINDS = ("gaussian", "toy", "stable_ic", "stable_ec", "cauchy", "ridge", "train", "verify")
FORMATS = ("csv", "json", "both")
OUT_DIR_ENV = "ROBUSTGAP_OUT_DIR"

EXAMPLE_CONFIG_HEADER = """# robustgap experiment configuration ({kind})
# Top-level keys select the scenario kind, the root seed and the output location;
# the section named after the kind holds the scenario parameters.
"""

EXAMPLE_CONFIG_FOOTER = """# Norm indices accept numbers >= 1 or .inf (YAML infinity).
# The output directory can be overridden with ROBUSTGAP_OUT_DIR or --out.
# Other kinds: gaussian, toy, stable_ic, stable_ec, cauchy, ridge, train, verify
#   (./robustgap.py --generate-config --kind <kind>)
"""

INF = float("inf")

DEFAULT_SECTIONS: Dict[str, Dict[str, Any]] = {
    "gaussian": {
        "theta_plus": [1.0, 0.5, 0.0],
        "theta_minus": [-1.0, -0.5, 0.0],
        "sigma": [[1.0, 0.2, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 1.0]],
        "imbalance": 5.0,
        "r_grid": [1.0, 1.5, 2.0, 5.0, 10.0],
        "p": INF,
        "epsilon": 0.1,
        "kappa": None,
    },
    "toy": {
        "m": 4,
        "n": 48,
        "eta": 1.0,
        "gamma": 0.5,
        "epsilon": 0.75,
        "imbalance": math.exp(2),
    },
    "stable_ic": {
        "alpha": 1.5,
        "theta_plus": [1.0, 0.5, 0.2],
        "theta_minus": [-1.0, -0.5, -0.2],
        "scales": None,
        "p": 2.0,
        "epsilon": 0.2,
        "kappa": None,
        "starts": 20,
    },
    "stable_ec": {
        "alpha": 1.5,
        "theta_plus": [0.8, 0.4, 0.2],
        "theta_minus": [-0.8, -0.4, -0.2],
        "shape": [[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 0.8]],
        "p": 2.0,
        "epsilon": 0.1,
    },
    "cauchy": {
        "theta_plus": [2.5, 0.5],
        "theta_minus": [-2.5, -0.5],
        "imbalance": 2.0,
        "epsilons": [0.0, 0.25, 0.5, 0.75, 1.0],
        "kappa": 0.5,
    },
    "ridge": {
        "mu1": [1.0, 0.0],
        "mu2": [0.0, 1.0],
        "k1": 100,
        "k2": 10,
        "lambda_prime": 1.0,
        "beta_star": [1.0, 1.0],
        "noise_var": 0.0,
        "noise_kind": "gaussian",
        "k1_grid": [100, 1000, 10000],
        "gram_samples": 0,
    },
    "train": {
        "family": "gaussian",
        "theta_plus": [1.0, 0.5],
        "theta_minus": [-1.0, -0.5],
        "sigma": None,
        "alpha": None,
        "n_major": 5000,
        "imbalances": [1.0, 10.0],
        "epsilons": [0.0, 0.2],
        "ps": [INF],
        "seeds": [0, 1, 2, 3, 4],
        "attack": "fgm",
        "lr": 0.1,
        "batch": None,
        "max_epochs": 500,
        "patience": 50,
        "lr_decay": 0.5,
        "decay_patience": 10,
        "pgd_steps": 10,
    },
    "verify": {
        "n_major": 1_000_000,
        "sigmas": 3.0,
        "scenarios": None,
        "certificates": True,
    },
}


def get_default_config(kind: str = "gaussian") -> Dict[str, Any]:
    """Return a deep copy of the default configuration for one scenario kind."""

    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", field="kind")
    return {
        "kind": kind,
        "seed": 0,
        "out_dir": "results",
        "format": "both",
        kind: deepcopy(DEFAULT_SECTIONS[kind]),
    }


def render_config(config: Dict[str, Any], include_comments: bool = True) -> str:
    """Render a configuration dictionary to YAML, optionally adding helpful comments."""

    yaml_body = yaml.safe_dump(config, default_flow_style=None, sort_keys=False)
    if not include_comments:
        return yaml_body

    header = EXAMPLE_CONFIG_HEADER.format(kind=config.get("kind", "gaussian")).rstrip()
    footer = EXAMPLE_CONFIG_FOOTER.rstrip()
    pieces = [header, yaml_body.rstrip(), footer]
    return "\n".join(piece for piece in pieces if piece) + "\n"


# -- field checkers ----------------------------------------------------------


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _number(value, path):
    if not _is_number(value) or math.isnan(value):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    return float(value)


def _finite(value, path):
    value = _number(value, path)
    if not math.isfinite(value):
        raise ConfigError("expected a finite number", field=path)
    return value


def _positive(value, path):
    value = _finite(value, path)
    if value <= 0:
        raise ConfigError(f"must be positive, got {value}", field=path)
    return value


def _non_negative(value, path):
    value = _finite(value, path)
    if value < 0:
        raise ConfigError(f"must be non-negative, got {value}", field=path)
    return value


def _ratio(value, path):
    value = _finite(value, path)
    if value < 1:
        raise ConfigError(f"imbalance ratio must be >= 1, got {value}", field=path)
    return value


def _alpha(value, path):
    value = _finite(value, path)
    if not 0 < value <= 2:
        raise ConfigError(f"alpha must lie in (0, 2], got {value}", field=path)
    return value


def _fraction(value, path):
    value = _finite(value, path)
    if not 0 < value < 1:
        raise ConfigError(f"must lie in (0, 1), got {value}", field=path)
    return value


def _unit_interval(value, path):
    value = _finite(value, path)
    if not 0 < value <= 1:
        raise ConfigError(f"must lie in (0, 1], got {value}", field=path)
    return value


def _norm(value, path):
    if isinstance(value, str) and value.strip().lower() in {"inf", "infinity"}:
        return INF
    value = _number(value, path)
    if value < 1:
        raise ConfigError(f"norm index must be >= 1 or inf, got {value}", field=path)
    return value


def _integer(value, path):
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    return value


def _count(value, path):
    value = _integer(value, path)
    if value < 1:
        raise ConfigError(f"must be at least 1, got {value}", field=path)
    return value


def _non_negative_int(value, path):
    value = _integer(value, path)
    if value < 0:
        raise ConfigError(f"must be non-negative, got {value}", field=path)
    return value


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigError(f"expected a non-empty string, got {value!r}", field=path)
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", field=path)
    return value


def _vector(value, path):
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of numbers", field=path)
    return [_finite(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(value, path):
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigError("expected a square matrix (list of rows)", field=path)
    rows = [_vector(row, f"{path}[{i}]") for i, row in enumerate(value)]
    if any(len(row) != len(rows) for row in rows):
        raise ConfigError("matrix must be square", field=path)
    return rows


def _list_of(check: Callable, allow_empty: bool = True):
    def checker(value, path):
        if not isinstance(value, list) or (not value and not allow_empty):
            raise ConfigError("expected a list", field=path)
        return [check(v, f"{path}[{i}]") for i, v in enumerate(value)]

    return checker


def _optional(check: Callable):
    def checker(value, path):
        return None if value is None else check(value, path)

    return checker


def _choice(*options: str):
    def checker(value, path):
        if value not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {value!r}", field=path)
        return value

    return checker


SCHEMAS: Dict[str, Dict[str, Callable]] = {
    "gaussian": {
        "theta_plus": _vector,
        "theta_minus": _vector,
        "sigma": _optional(_matrix),
        "imbalance": _ratio,
        "r_grid": _list_of(_ratio),
        "p": _norm,
        "epsilon": _non_negative,
        "kappa": _optional(_fraction),
    },
    "toy": {
        "m": _count,
        "n": _count,
        "eta": _finite,
        "gamma": _finite,
        "epsilon": _finite,
        "imbalance": _ratio,
    },
    "stable_ic": {
        "alpha": _alpha,
        "theta_plus": _vector,
        "theta_minus": _vector,
        "scales": _optional(_vector),
        "p": _norm,
        "epsilon": _non_negative,
        "kappa": _optional(_fraction),
        "starts": _non_negative_int,
    },
    "stable_ec": {
        "alpha": _alpha,
        "theta_plus": _vector,
        "theta_minus": _vector,
        "shape": _matrix,
        "p": _norm,
        "epsilon": _non_negative,
    },
    "cauchy": {
        "theta_plus": _vector,
        "theta_minus": _vector,
        "imbalance": _ratio,
        "epsilons": _list_of(_non_negative, allow_empty=False),
        "kappa": _optional(_fraction),
    },
    "ridge": {
        "mu1": _vector,
        "mu2": _vector,
        "k1": _count,
        "k2": _count,
        "lambda_prime": _positive,
        "beta_star": _vector,
        "noise_var": _non_negative,
        "noise_kind": _choice("gaussian", "rademacher"),
        "k1_grid": _list_of(_count),
        "gram_samples": _non_negative_int,
    },
    "train": {
        "family": _choice("gaussian", "stable_ic", "stable_ec", "cauchy"),
        "theta_plus": _vector,
        "theta_minus": _vector,
        "sigma": _optional(_matrix),
        "alpha": _optional(_alpha),
        "n_major": _count,
        "imbalances": _list_of(_ratio),
        "epsilons": _list_of(_non_negative),
        "ps": _list_of(_norm),
        "seeds": _list_of(_non_negative_int),
        "attack": _choice("none", "fgm", "pgd"),
        "lr": _positive,
        "batch": _optional(_count),
        "max_epochs": _count,
        "patience": _count,
        "lr_decay": _unit_interval,
        "decay_patience": _count,
        "pgd_steps": _count,
    },
    "verify": {
        "n_major": _count,
        "sigmas": _positive,
        "scenarios": _optional(_list_of(_string, allow_empty=False)),
        "certificates": _boolean,
    },
}

TOP_LEVEL = {"kind", "seed", "out_dir", "format"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out_dir: str
    format: str
    params: Dict[str, Any]
    source: Optional[str] = None

    def with_overrides(self, seed: Optional[int] = None, out_dir: Optional[str] = None, fmt: Optional[str] = None):
        return ExperimentConfig(
            kind=self.kind,
            seed=self.seed if seed is None else seed,
            out_dir=self.out_dir if out_dir is None else out_dir,
            format=self.format if fmt is None else fmt,
            params=self.params,
            source=self.source,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "seed": self.seed, "out_dir": self.out_dir, "format": self.format, self.kind: self.params}


def _key_lines(text: str) -> Dict[str, int]:
    """Map dotted key paths to 1-based YAML line numbers."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                lines[path] = key.start_mark.line + 1
                walk(value, path)

    walk(root, "")
    return lines


def _line_for(lines: Dict[str, int], path: str) -> Optional[int]:
    while path:
        if path in lines:
            return lines[path]
        path = path.rsplit("[", 1)[0] if path.endswith("]") else path.rpartition(".")[0]
    return None


def parse_config(text: str, source: Optional[str] = None) -> ExperimentConfig:
    """
    Parse and validate a YAML configuration.

    Raises:
        ConfigError: on malformed YAML, unknown keys, wrong types or out-of-range values
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {exc}", line=mark.line + 1 if mark else None) from exc
    lines = _key_lines(text)
    try:
        return _validate(raw, source)
    except ConfigError as exc:
        if exc.line is None and exc.field:
            raise ConfigError(exc.message, field=exc.field, line=_line_for(lines, exc.field)) from exc
        raise


def _validate(raw: Any, source: Optional[str]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", field="kind")
    unknown = set(raw) - TOP_LEVEL - {kind}
    if unknown:
        first = sorted(unknown)[0]
        raise ConfigError(f"unknown key {first!r}", field=first)

    seed = _non_negative_int(raw.get("seed", 0), "seed")
    out_dir = raw.get("out_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("out_dir must be a non-empty string", field="out_dir")
    out_dir = os.environ.get(OUT_DIR_ENV) or out_dir
    fmt = _choice(*FORMATS)(raw.get("format", "both"), "format")

    section = raw.get(kind)
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError("scenario section must be a mapping", field=kind)
    schema = SCHEMAS[kind]
    for key in section:
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", field=f"{kind}.{key}")
    params = {}
    defaults = DEFAULT_SECTIONS[kind]
    for key, check in schema.items():
        value = section.get(key, defaults[key])
        params[key] = check(value, f"{kind}.{key}")
    _cross_check(kind, params)
    return ExperimentConfig(kind=kind, seed=seed, out_dir=out_dir, format=fmt, params=params, source=source)


def _cross_check(kind: str, params: Dict[str, Any]) -> None:
    if "theta_plus" in params and len(params["theta_plus"]) != len(params["theta_minus"]):
        raise ConfigError("theta_plus and theta_minus must have the same length", field=f"{kind}.theta_minus")
    dim = len(params.get("theta_plus", []))
    for key in ("sigma", "shape"):
        if params.get(key) is not None and len(params[key]) != dim:
            raise ConfigError(f"{key} must be {dim} x {dim}", field=f"{kind}.{key}")
    if kind == "stable_ic" and params["scales"] is not None and len(params["scales"]) != dim:
        raise ConfigError(f"scales must have length {dim}", field=f"{kind}.scales")
    if kind == "ridge":
        if not len(params["mu1"]) == len(params["mu2"]) == len(params["beta_star"]):
            raise ConfigError("mu1, mu2 and beta_star must have the same length", field="ridge.beta_star")
        if params["k1"] < params["k2"]:
            raise ConfigError("k1 must be >= k2 (group 1 is the majority)", field="ridge.k1")
    if kind == "train" and params["family"] in ("stable_ic", "stable_ec") and params["alpha"] is None:
        raise ConfigError("stable families need alpha", field="train.alpha")
    if kind == "train" and params["family"] == "stable_ec" and params["sigma"] is None:
        raise ConfigError("the stable_ec family needs sigma as its shape matrix", field="train.sigma")


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, source=path)


# -- interactive generation --------------------------------------------------


def _prompt_with_default(prompt_text: str, default: str) -> str:
    response = input(f"{prompt_text} [{default}]: ").strip()
    return response or default


def _prompt_yes_no(prompt_text: str, default: bool) -> bool:
    default_hint = "Y/n" if default else "y/N"
    while True:
        response = input(f"{prompt_text} [{default_hint}]: ").strip().lower()
        if not response:
            return default
        if response in {"y", "yes"}:
            return True
        if response in {"n", "no"}:
            return False
        print("Please respond with 'y' or 'n'.")


def _prompt_int(prompt_text: str, default: int) -> int:
    while True:
        response = input(f"{prompt_text} [{default}]: ").strip()
        if not response:
            return default
        try:
            return int(response)
        except ValueError:
            print("Please enter an integer value.")


def _prompt_float(prompt_text: str, default: Optional[float]) -> Optional[float]:
    default_label = "null" if default is None else repr(default)
    while True:
        response = input(f"{prompt_text} [{default_label}]: ").strip()
        if not response:
            return default
        if response.lower() in {"null", "none"}:
            return None
        try:
            return float(response)
        except ValueError:
            print("Please enter a number, 'inf' or 'null'.")


def _prompt_choice(prompt_text: str, options: Tuple[str, ...], default: str) -> str:
    while True:
        response = _prompt_with_default(f"{prompt_text} ({'/'.join(options)})", default)
        if response in options:
            return response
        print(f"Please choose one of: {', '.join(options)}.")


def run_interactive_config(kind: Optional[str] = None) -> Tuple[Dict[str, Any], str]:
    """Interactively prompt the user for configuration values.

    Scalar fields of the scenario section are prompted for; vectors and
    matrices keep their defaults and are edited in the saved file.

    Returns:
        A tuple of (config_dict, save_path)
    """

    print("Interactive config generation. Press Enter to accept defaults.")
    kind = _prompt_choice("Scenario kind", KINDS, kind or "gaussian")
    config = get_default_config(kind)
    config["seed"] = _prompt_int("Root seed", config["seed"])
    config["out_dir"] = _prompt_with_default("Output directory", config["out_dir"])
    config["format"] = _prompt_choice("Report format", FORMATS, config["format"])

    section = config[kind]
    skipped: List[str] = []
    for key, value in section.items():
        if isinstance(value, bool):
            section[key] = _prompt_yes_no(key, value)
        elif isinstance(value, int):
            section[key] = _prompt_int(key, value)
        elif isinstance(value, float) or (value is None and key in {"kappa", "alpha"}):
            section[key] = _prompt_float(key, value)
        elif isinstance(value, str):
            section[key] = _prompt_with_default(key, value)
        else:
            skipped.append(key)
    if skipped:
        print(f"Keeping defaults for {', '.join(skipped)}; edit the file to change them.")

    # Ask for save location
    save_path = _prompt_with_default("Where to save the config file", f"{kind}.yaml")

    return config, save_path


__all__ = [
    "DEFAULT_SECTIONS",
    "ExperimentConfig",
    "KINDS",
    "get_default_config",
    "load_config",
    "parse_config",
    "render_config",
    "run_interactive_config",
]
