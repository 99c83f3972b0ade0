"""Experiment configuration: flat ``key = value`` files with typed defaults.

A configuration file is TOML restricted to scalar and array values; dotted
keys such as ``mesh.diagonal`` may be written either flat or as tables.
Every key has a default for each experiment, and the resolved table (all
defaults included) is echoed into the report.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = (
    "ex1-noflow",
    "ex2-coriolis",
    "ex3-brinkman-smooth",
    "ex4-brinkman-layer",
    "ex5-ns-manufactured",
    "ex6-cavity",
    "verify-element",
    "verify-kernels",
    "verify-stability",
)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


_COMMON = {
    "element": ["npp"],
    "mesh.generator": "crisscross",
    "mesh.n": 2,
    "mesh.diagonal": "crisscross",
    "mesh.file": "",
    "mesh.perturb": 0.0,
    "mesh.seed": 0,
    "levels": 3,
    "output.dir": "",
    "output.vtk": False,
}

_SPECIFIC: dict[str, dict[str, Any]] = {
    "ex1-noflow": {
        "element": ["npp", "taylor-hood"],
        "mesh.n": 4,
        "levels": 3,
        "ra": [1.0, 100.0, 10000.0],
    },
    "ex2-coriolis": {
        "element": ["npp", "taylor-hood"],
        "mesh.generator": "forward-step",
        "mesh.n": 2,
        "levels": 3,
        "eps2": 0.01,
        "omega": [100.0, 1000.0],
    },
    "ex3-brinkman-smooth": {
        "mesh.n": 3,
        "levels": 4,
        "eps": [0.0625, 0.00390625, 0.0],
    },
    "ex4-brinkman-layer": {
        "mesh.n": 4,
        "levels": 5,
        "eps": [2.0**-4, 2.0**-6, 2.0**-8, 2.0**-10, 2.0**-12],
    },
    "ex5-ns-manufactured": {
        "element": ["npp", "taylor-hood"],
        "mesh.n": 2,
        "levels": 4,
        "eps2": 1e-6,
        "dt": 1e-3,
        "t_final": 1e-2,
        "scheme": "cn-newton",
        "nonlinear.tol": 1e-10,
        "nonlinear.max_iter": 50,
    },
    "ex6-cavity": {
        "mesh.generator": "structured",
        "mesh.n": 43,
        "mesh.diagonal": "same",
        "levels": 1,
        "eps2": 1e-3,
        "dt": 0.1,
        "t_final": 90.0,
        "scheme": "be-picard",
        "nonlinear.tol": 1e-10,
        "nonlinear.max_iter": 50,
        "steady_tol": 1e-8,
        "lattice": 257,
    },
    "verify-element": {
        "mesh.n": 1,
        "levels": 5,
        "samples": 1000,
        "seed": 0,
    },
    "verify-kernels": {
        "fans": [3, 4, 5, 6, 7, 8],
        "samples": 5,
        "seed": 0,
    },
    "verify-stability": {
        "mesh.n": 1,
        "levels": 3,
        "korn.boundary": "left",
    },
}

_CHOICES = {
    "mesh.generator": ("crisscross", "structured", "forward-step", "file"),
    "mesh.diagonal": ("same", "alternating", "crisscross"),
    "scheme": ("cn-newton", "be-picard", "cn-picard", "be-newton"),
}
_ELEMENTS = ("npp", "taylor-hood")
_POSITIVE = ("mesh.n", "levels", "dt", "t_final", "nonlinear.tol", "nonlinear.max_iter",
             "lattice", "samples", "steady_tol")


def defaults(experiment: str) -> dict[str, Any]:
    if experiment not in _SPECIFIC:
        raise ConfigError(f"unknown experiment {experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
    table = dict(_COMMON)
    table.update(_SPECIFIC[experiment])
    table["output.dir"] = f"results/{experiment}"
    return table


def _flatten(data: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Convert `value` to the type of `default` (strings come from --set)."""
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(default, list):
        if isinstance(value, str):
            value = [v for v in (s.strip() for s in value.strip("[]").split(",")) if v]
        if not isinstance(value, list):
            value = [value]
        proto = default[0] if default else ""
        return [_coerce(key, v, proto) for v in value]
    if isinstance(default, int):
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if isinstance(value, str):
        return value.strip().strip('"').strip("'")
    raise ConfigError(f"{key}: expected a string, got {value!r}")


@dataclass
class ExperimentConfig:
    """A resolved experiment configuration."""

    experiment: str
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def echo(self) -> dict[str, Any]:
        return {"experiment": self.experiment, **dict(sorted(self.values.items()))}


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    for key in _POSITIVE:
        if key in v and not v[key] > 0:
            raise ConfigError(f"{key} must be positive, got {v[key]!r}")
    for key, choices in _CHOICES.items():
        if key in v and v[key] not in choices:
            raise ConfigError(f"{key} must be one of {', '.join(choices)}; got {v[key]!r}")
    bad = [e for e in v["element"] if e not in _ELEMENTS]
    if bad or not v["element"]:
        raise ConfigError(f"element must be a list drawn from {', '.join(_ELEMENTS)}; got {v['element']!r}")
    if v["mesh.generator"] == "file" and not v["mesh.file"]:
        raise ConfigError("mesh.generator = file needs mesh.file")
    if v["mesh.perturb"] < 0:
        raise ConfigError("mesh.perturb must be nonnegative")
    for key in ("ra", "omega", "dt"):
        if key in v:
            vals = v[key] if isinstance(v[key], list) else [v[key]]
            if any(x < 0 for x in vals) or not vals:
                raise ConfigError(f"{key} must be nonnegative")
    for key in ("eps", "eps2"):
        if key in v:
            vals = v[key] if isinstance(v[key], list) else [v[key]]
            if any(x < 0 for x in vals) or not vals:
                raise ConfigError(f"{key} must be nonnegative")
    if "fans" in v and any(m < 3 for m in v["fans"]):
        raise ConfigError("fans must list macroelement sizes >= 3")


def make_config(experiment: str, settings: dict[str, Any] | None = None) -> ExperimentConfig:
    """Defaults of `experiment` overridden by `settings` (flat dotted keys)."""
    table = defaults(experiment)
    for key, value in (settings or {}).items():
        if key == "experiment":
            continue
        if key not in table:
            raise ConfigError(f"unknown key {key!r} for {experiment}")
        table[key] = _coerce(key, value, table[key])
    cfg = ExperimentConfig(experiment, table)
    _validate(cfg)
    return cfg


def parse_assignment(text: str) -> tuple[str, str]:
    """Split ``key=value`` from the command line."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def load_config(path: str | Path | None, overrides: list[str] | None = None,
                experiment: str | None = None) -> ExperimentConfig:
    """Read a configuration file and apply ``key=value`` overrides."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        try:
            data = _flatten(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides or []:
        key, value = parse_assignment(item)
        data[key] = value
    name = experiment or data.get("experiment")
    if not name:
        raise ConfigError("the configuration does not name an experiment")
    return make_config(str(name).strip('"'), data)
