"""Experiment configuration: dataclasses plus a strict TOML loader.

Every table and key is optional (defaults give the desk-scale setup) but
unknown tables or keys raise :class:`ConfigError`.  See ``docs/config.md``.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field

from .algorithm import ALGORITHMS
from .scene import SceneConfig
from .sbl import Hyperparams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    window: int = 24
    pilot_length_range: tuple[int, int] = (20, 24)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    threshold: float = 1.0
    lsfc_error_db: float = 0.0
    p_max_sweep_mw: tuple[float, ...] = (100.0, 175.0, 250.0, 325.0, 400.0)
    trials_per_point: int = 200
    algorithms: tuple[str, ...] = ALGORITHMS
    master_seed: int = 20240601
    output_path: str = "results/desk_scale.csv"
    noise_scale: float = 1.0
    genie_prior_scale: float = 1.0

    def __post_init__(self):
        lo, hi = self.pilot_length_range
        if not 1 <= lo <= hi <= self.window:
            raise ConfigError(f"pilot lengths [{lo}, {hi}] must satisfy 1 <= min <= max <= window={self.window}")
        if not self.p_max_sweep_mw or any(not p > 0 for p in self.p_max_sweep_mw):
            raise ConfigError("p_max_sweep_mw must be a nonempty list of positive powers")
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ConfigError(f"algorithms must be a nonempty subset of {ALGORITHMS}, got {self.algorithms}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("duplicate algorithm names")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        if self.lsfc_error_db < 0 or self.noise_scale < 0 or not self.genie_prior_scale > 0:
            raise ConfigError("lsfc_error_db and noise_scale must be >= 0, genie_prior_scale > 0")


_SCENE_KEYS = {f.name for f in dataclasses.fields(SceneConfig)} - {"p_max_tx_mw", "seed"}
_HYPER_KEYS = {f.name for f in dataclasses.fields(Hyperparams)}
_SCHEMA = {
    "scene": _SCENE_KEYS,
    "pilots": {"window", "length_min", "length_max"},
    "hyper": _HYPER_KEYS,
    "detection": {"threshold", "lsfc_error_db"},
    "experiment": {"p_max_sweep_mw", "trials_per_point", "algorithms", "master_seed",
                   "output_path", "noise_scale", "genie_prior_scale"},
}


def _check_keys(raw):
    for table, values in raw.items():
        if table not in _SCHEMA:
            raise ConfigError(f"unknown table [{table}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{table}] must be a table")
        extra = set(values) - _SCHEMA[table]
        if extra:
            raise ConfigError(f"unknown key(s) in [{table}]: {', '.join(sorted(extra))}")


def from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw)
    pilots = raw.get("pilots", {})
    det = raw.get("detection", {})
    exp = dict(raw.get("experiment", {}))
    defaults = ExperimentConfig.__dataclass_fields__
    lo = pilots.get("length_min", defaults["pilot_length_range"].default[0])
    hi = pilots.get("length_max", defaults["pilot_length_range"].default[1])
    for key in ("p_max_sweep_mw", "algorithms"):
        if key in exp:
            exp[key] = tuple(exp[key])
    try:
        return ExperimentConfig(
            scene=SceneConfig(**raw.get("scene", {})),
            hyper=Hyperparams(**raw.get("hyper", {})),
            window=pilots.get("window", defaults["window"].default),
            pilot_length_range=(lo, hi),
            **det, **exp,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(raw)
