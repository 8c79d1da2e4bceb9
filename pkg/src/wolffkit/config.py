"""YAML run configuration: named densities plus one section per subcommand."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .density import (
    BumpSum, Density, ZeroDensity, constant_density, log_power_density, power_density,
)


class ConfigError(ValueError):
    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = list(keys)


_DENSITY_KEYS = {
    "constant": ({"kind", "dim"}, {"c", "support", "center"}),
    "power": ({"kind", "dim", "s"}, {"c", "support", "center"}),
    "log_power": ({"kind", "dim", "s", "alpha"}, {"c", "support", "center"}),
    "bumps": ({"kind", "centers", "radii", "heights"}, set()),
    "zero": ({"kind", "dim"}, set()),
}

# allowed keys and defaults per subcommand
SECTIONS = {
    "wolff": {"density": "f", "points": [[0.0, 0.0, 0.0]], "radii": [1.0, "inf"], "beta": 1.0, "p": 2.0},
    "kato": {"density": "f", "points": [[0.0, 0.0, 0.0]], "radii": [1.0, 0.1, 0.01, 0.001], "beta": 1.0,
             "p": 2.0, "threshold": 0.1},
    "pk": {"density": "f", "R": 1.0, "center": None, "size": 24, "tiers": 4, "seed": 0},
    "classes": {"density": "f", "alpha": 1.0, "beta": 1.0, "p": 2.0, "q": 2.0, "kappa": 1.0,
                "points": [[0.0, 0.0, 0.0]], "radii": [1.0, 0.1, 0.01]},
    "elliptic": {"density": "f", "p": 2.0, "R": 1.0, "n_nodes": 257, "spacing": "uniform", "r_min": None},
    "hardy": {"density": "f", "p": 2.0, "R": 1.0, "n_nodes": 513, "spacing": "log", "r_min": 1e-12,
              "size": 20, "seed": 0},
    "solve": {"geometry": "interval", "a": 0.0, "b": 1.0, "R": 1.0, "n_nodes": 65, "dim": 1, "p": 2.0,
              "eps": 0.0, "t0": 0.0, "t1": 0.1, "dt": 0.01, "theta": 1.0, "initial": "sine",
              "forcing": None, "parity": "even", "tol": 1e-10},
    "verify": {"kind": "threshold", "alphas": [0.5, 1.5], "p_values": [2.0, 3.0], "levels": [0, 1, 2, 3],
               "q_grid": [4, 8], "model": "odd", "expect": None, "coefficients": {}, "points": [[0.0, 0.0, 0.0]],
               "radii": [0.1, 0.01, 0.001], "nu_main": 0.1, "nu_aposteriori": 0.1, "p": 2.0},
    "scale": {"lambda": 2.0, "p": 2.0, "coefficients": {}, "check_heat": True},
    "counterexample": {"N": 3, "p": 2.0, "rho0": 0.25, "q0": 0.25, "n_terms": 12, "half_width": 1.0},
}

TOP_KEYS = {"densities", "seed", "tol"} | set(SECTIONS)

DEFAULT_DENSITIES = {"f": {"kind": "constant", "c": 1.0, "support": 1.0, "dim": 3}}


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    bad = sorted(set(data) - TOP_KEYS)
    if bad:
        raise ConfigError("unknown top-level keys", bad)
    return data


def number(v) -> float:
    """Floats, with ``"inf"`` accepted as a string."""
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a number: {v!r}") from exc


def section(cfg: dict, name: str) -> dict:
    given = cfg.get(name) or {}
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be a mapping", [name])
    bad = sorted(set(given) - set(SECTIONS[name]))
    if bad:
        raise ConfigError(f"unknown keys in section {name!r}", [f"{name}.{k}" for k in bad])
    return {**SECTIONS[name], **given}


def build_density(name: str, spec: dict) -> Density:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"density {name!r} needs a kind", [f"densities.{name}.kind"])
    kind = spec["kind"]
    if kind not in _DENSITY_KEYS:
        raise ConfigError(f"unknown density kind {kind!r}", [f"densities.{name}.kind"])
    required, optional = _DENSITY_KEYS[kind]
    missing = sorted(required - set(spec))
    extra = sorted(set(spec) - required - optional)
    if missing or extra:
        raise ConfigError(f"density {name!r} has missing or unknown keys",
                          [f"densities.{name}.{k}" for k in missing + extra])
    try:
        if kind == "zero":
            return ZeroDensity(int(spec["dim"]))
        if kind == "bumps":
            return BumpSum(np.asarray(spec["centers"], float), np.asarray(spec["radii"], float),
                           np.asarray(spec["heights"], float), name)
        dim = int(spec["dim"])
        center = tuple(spec["center"]) if spec.get("center") is not None else None
        c = number(spec.get("c", 1.0))
        if kind == "constant":
            return constant_density(c, number(spec.get("support", 1.0)), dim, center)
        if kind == "power":
            return power_density(number(spec["s"]), number(spec.get("support", 1.0)), dim, c, center)
        return log_power_density(number(spec["s"]), number(spec["alpha"]), number(spec.get("support", 0.5)),
                                 dim, c, center)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"density {name!r}: {exc}", [f"densities.{name}"]) from exc


def densities(cfg: dict) -> dict:
    raw = cfg.get("densities") or DEFAULT_DENSITIES
    if not isinstance(raw, dict):
        raise ConfigError("densities must be a mapping", ["densities"])
    return {name: build_density(name, spec) for name, spec in raw.items()}


def lookup(dens: dict, name, where: str) -> Density:
    if name not in dens:
        raise ConfigError(f"{where} refers to undefined density {name!r}", [where])
    return dens[name]
