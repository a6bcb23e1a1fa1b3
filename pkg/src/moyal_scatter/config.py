"""Run configuration: JSON loading, schema validation and defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

DEFAULTS: dict[str, Any] = {
    "fock": {"kappa": 2, "box_length": 10.0, "points_per_dim": 32, "b_width": 3.0, "a_half_width": 3.0},
    "star": {"box_length": 16.0, "points_per_dim": 64, "width": 1.0},
    "scattering": {"courant": 0.25, "refinement_courant": 1.0, "dt_quad": 2e-3, "fd_lambda": 1e-3, "weak_amplitudes": [0.05, 0.1, 0.2]},
    "bogoliubov": {"lambdas": [1e-2, 1e-3], "step_dt": 0.01},
    "lm": {"nu_max": 2, "n_max": 2},
}


class ConfigError(ValueError):
    """Schema or consistency violation; ``path`` is a JSON path like ``$.model.p``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def schema() -> dict:
    return json.loads(resources.files("moyal_scatter").joinpath("schema.json").read_text())


def bundled_config_path(name: str) -> Path:
    """Filesystem path of a bundled config, e.g. ``"moyal-2d"``."""
    stem = name[:-5] if name.endswith(".json") else name
    path = Path(str(resources.files("moyal_scatter").joinpath("configs", f"{stem}.json")))
    if not path.exists():
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return path


@dataclass(frozen=True)
class RunConfig:
    raw: dict  # as given, used for the report echo
    data: dict  # with defaults filled in

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    @property
    def dim(self) -> int:
        m = self.data["model"]
        return m["q"] + m["p"] - 1

    @property
    def commutative(self) -> bool:
        return self.data["model"]["p"] == 0

    def default_refinements(self) -> list[int]:
        n = self.data["grid"]["points_per_dim"]
        if self.commutative:
            return [n // 2, (3 * n) // 4 // 2 * 2, n]
        return [16, 24, 32]


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def validate(raw: dict) -> RunConfig:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        first = errors[0]
        if first.validator == "required":
            missing = min(k for k in first.validator_value if k not in first.instance)
            raise ConfigError(f"{first.json_path}.{missing}", "required property is missing")
        raise ConfigError(first.json_path, first.message)
    model = raw["model"]
    if model["q"] + model["p"] not in (2, 3):
        raise ConfigError("$.model", f"unsupported spacetime dimension q+p={model['q'] + model['p']}; expected 2 or 3")
    if model["p"] > 0 and model["theta"] <= 0:
        raise ConfigError("$.model.theta", "theta must be positive when p > 0")
    s = model["q"] + model["p"] - 1
    center = raw["potential"]["b"].get("center")
    if center is not None and len(center) != s:
        raise ConfigError("$.potential.b.center", f"expected {s} coordinates, got {len(center)}")
    data = _merge(DEFAULTS, raw)
    data["potential"]["b"].setdefault("center", [0.0] * s)
    cfg = RunConfig(copy.deepcopy(raw), data)
    sc = data["scattering"]
    sc.setdefault("refinements", cfg.default_refinements())
    sc.setdefault("kinds", ["V0"] if cfg.commutative else ["Vi", "Vii"])
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a config file; raises ``ConfigError`` or ``OSError``."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    return validate(raw)
