"""Experiment configuration: JSON schema, presets and conversion to module objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from ..errors import ConfigError, MfsTuneError
from ..geometry import DEFAULT_COUNTS, HeadModel, ThetaBounds
from ..mfs import ForwardModel, MetricOptions
from ..sampling import DipoleRegion, region_catalog
from ..synthetic import PeakObjective
from ..tuner import TunerConfig

__all__ = ["ExperimentConfig", "PRESETS", "SCHEMA", "load_config", "preset"]

_NUM = {"type": "number"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC5 = {"type": "array", "items": _NUM, "minItems": 5, "maxItems": 5}

_REGION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["ball", "shell-sector", "whole-brain"]},
        "center": _VEC3, "radius": _NUM, "r_min": _NUM, "r_max": _NUM,
        "polar": _PAIR, "azimuth": _PAIR, "depth_margin": _NUM,
        "name": {"type": "string"}, "index": {"type": "integer"},
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "head": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: _NUM for k in ("r_scalp", "r_skull", "r_brain", "sigma_scalp", "sigma_skull",
                                              "sigma_brain")},
        },
        "counts": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 5, "maxItems": 5},
        "n_colloc": {"type": "integer", "minimum": 1},
        "k_test": {"type": "integer", "minimum": 2},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lower", "upper"],
            "properties": {"lower": _VEC5, "upper": _VEC5},
        },
        "tuner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "j_max": {"type": "integer", "minimum": 1},
                "n_avg": {"type": "integer", "minimum": 1},
                "n_min": {"type": "integer", "minimum": 1},
                "j_init": {"type": "integer", "minimum": 1},
                "include_in_progress": {"type": "boolean"},
                "max_failures": {"type": "integer", "minimum": 0},
            },
        },
        "strategy": {"enum": ["sko", "random"]},
        "preemptive": {"type": "boolean"},
        "region": {"anyOf": [{"type": "integer", "minimum": 1, "maximum": 6}, _REGION,
                             {"type": "array", "minItems": 1,
                              "items": {"anyOf": [{"type": "integer", "minimum": 1, "maximum": 6}, _REGION]}}]},
        "oracle_tol": {"type": "number", "exclusiveMinimum": 0},
        "metric": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "log_base": {"enum": ["e", "10"]},
                "reference": {"enum": ["raw", "average"]},
                "q_cap": _NUM,
            },
        },
        "objective": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["mfs", "peak"]},
                "peak": _VEC5, "width": _NUM, "height": _NUM, "floor": _NUM, "noise_sd": _NUM,
            },
        },
        "repetitions": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "timestamps": {"type": "boolean"},
    },
}

_DEFAULTS: dict[str, Any] = {
    "head": {"r_scalp": 0.1, "r_skull": 0.092, "r_brain": 0.087,
             "sigma_scalp": 0.33, "sigma_skull": 0.0125, "sigma_brain": 0.33},
    "counts": list(DEFAULT_COUNTS),
    "n_colloc": 150,
    "k_test": 200,
    "bounds": {"lower": list(ThetaBounds().lower), "upper": list(ThetaBounds().upper)},
    "tuner": {"j_max": 200, "n_avg": 10, "n_min": 3, "j_init": 50, "include_in_progress": False,
              "max_failures": 1000},
    "strategy": "sko",
    "preemptive": True,
    "region": 1,
    "oracle_tol": 1e-10,
    "metric": {"log_base": "e", "reference": "raw", "q_cap": 40.0},
    "objective": {"kind": "mfs"},
    "repetitions": 10,
    "seed": 0,
    "output": "runs",
    "timestamps": False,
}

PRESETS: dict[str, dict] = {
    "desk": {},
    "full": {
        "n_colloc": 300,
        "k_test": 1000,
        "tuner": {"j_max": 800, "n_avg": 30, "n_min": 5, "j_init": 150},
        "repetitions": 30,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("objective",):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings; ``data`` is the full JSON document."""

    data: dict = field(default_factory=lambda: copy.deepcopy(_DEFAULTS))

    def __post_init__(self):
        try:
            jsonschema.validate(self.data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: "
                              f"{exc.message}") from None
        self.data = _merge(_DEFAULTS, self.data)
        try:
            # builds every module object once so invariant violations surface here
            self.head, self.bounds, self.regions, self.metric
            self.tuner_config()
        except MfsTuneError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: dict, preset_name: str | None = None) -> "ExperimentConfig":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"invalid config: {exc.message}") from None
        base = PRESETS[preset_name] if preset_name else {}
        return cls(_merge(_merge(_DEFAULTS, base), data))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def replace(self, **changes) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.data, changes))

    @property
    def head(self) -> HeadModel:
        return HeadModel(**self.data["head"])

    @property
    def bounds(self) -> ThetaBounds:
        b = self.data["bounds"]
        return ThetaBounds(tuple(b["lower"]), tuple(b["upper"]))

    @property
    def metric(self) -> MetricOptions:
        return MetricOptions(**self.data["metric"])

    @property
    def regions(self) -> list[DipoleRegion]:
        sel = self.data["region"]
        items = sel if isinstance(sel, list) else [sel]
        catalog = region_catalog(self.head)
        out = []
        for item in items:
            if isinstance(item, int):
                out.append(catalog[item - 1])
            else:
                out.append(DipoleRegion.from_dict(item))
        return out

    def tuner_config(self, strategy: str | None = None, preemptive: bool | None = None, seed: int | None = None,
                     region: DipoleRegion | None = None) -> TunerConfig:
        t = self.data["tuner"]
        preemptive = self.data["preemptive"] if preemptive is None else preemptive
        return TunerConfig(
            j_max=t["j_max"], n_avg=t["n_avg"], n_min=t["n_min"] if preemptive else t["n_avg"],
            j_init=t["j_init"], bounds=self.bounds, region=region or self.regions[0],
            strategy=strategy or self.data["strategy"], preemptive=preemptive,
            seed=self.data["seed"] if seed is None else seed,
            include_in_progress=t["include_in_progress"], max_failures=t["max_failures"],
        )

    def blackbox(self):
        obj = self.data["objective"]
        if obj["kind"] == "peak":
            kwargs = {k: v for k, v in obj.items() if k != "kind"}
            return PeakObjective(self.bounds, **kwargs)
        return ForwardModel(self.head, tuple(self.data["counts"]), self.data["n_colloc"], self.data["k_test"],
                            self.data["oracle_tol"], self.metric)


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(_merge(_merge(_DEFAULTS, PRESETS[name]), overrides))


def load_config(path: str | Path | None = None, preset_name: str | None = None) -> ExperimentConfig:
    """Read a JSON config file on top of an optional preset."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    return ExperimentConfig.from_dict(data, preset_name)
