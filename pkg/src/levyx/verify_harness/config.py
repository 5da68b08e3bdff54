"""Experiment configuration: TOML (canonical) or JSON, strict schema."""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field

from ..levy_model import LevyTriplet, triplet_from_config

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = ["ExperimentConfig", "load_config", "ConfigError"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_name: str
    seed: int
    triplet: LevyTriplet
    triplet_raw: dict
    n_paths: int
    grid_step: float
    params: dict = field(default_factory=dict)
    output_dir: str | None = None

    def require(self, *names):
        missing = [n for n in names if n not in self.params]
        if missing:
            raise ConfigError(
                f"experiment {self.experiment_name!r} needs params "
                f"{missing}")
        return [self.params[n] for n in names]

    def get(self, name, default=None):
        return self.params.get(name, default)


_TOP_KEYS = {"experiment", "seed", "output_dir", "triplet", "params"}


def parse_config(raw: dict, experiment_names: set[str],
                 seed_override: int | None = None,
                 out_override: str | None = None) -> ExperimentConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    name = raw.get("experiment")
    if name not in experiment_names:
        raise ConfigError(f"unknown experiment {name!r}; registered: "
                          f"{sorted(experiment_names)}")
    if "triplet" not in raw:
        raise ConfigError("missing [triplet] block")
    try:
        triplet = triplet_from_config(raw["triplet"])
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad triplet: {exc}") from exc
    params = dict(raw.get("params", {}))
    n_paths = int(params.pop("n_paths", 0))
    grid_step = float(params.pop("grid_step", 0.0))
    if n_paths < 100:
        raise ConfigError("params.n_paths must be >= 100")
    if grid_step <= 0:
        raise ConfigError("params.grid_step must be positive")
    seed = int(raw.get("seed", 0)) if seed_override is None \
        else int(seed_override)
    out = raw.get("output_dir") if out_override is None else out_override
    return ExperimentConfig(experiment_name=name, seed=seed, triplet=triplet,
                            triplet_raw=dict(raw["triplet"]), n_paths=n_paths,
                            grid_step=grid_step, params=params,
                            output_dir=out)


def load_config(path: str, experiment_names: set[str],
                seed_override: int | None = None,
                out_override: str | None = None) -> ExperimentConfig:
    if path.endswith(".json"):
        with open(path) as fh:
            raw = json.load(fh)
    else:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    return parse_config(raw, experiment_names, seed_override, out_override)
