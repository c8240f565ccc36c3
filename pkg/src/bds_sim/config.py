"""Experiment configuration: JSON schema, validation and model/environment builders."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .intensity import EnvironmentPath, IntensityModel, LinearModel, Regime, markov_switching_environment
from .rng import Streams
from .toymodel import ToyModel, ToyParams

EXPERIMENTS = (
    "domination-demo",
    "thinning-vs-oracle",
    "martingale-check",
    "two-timescale-sweep",
    "occupation-vs-invariant",
    "limit-process-convergence",
    "toy-verify",
)

_NONNEG = {"type": "number", "minimum": 0}
_RATE = {"oneOf": [_NONNEG, {"type": "array", "items": _NONNEG, "minItems": 1}]}

REGIME_SCHEMA = {
    "type": "object",
    "properties": {
        "k": _NONNEG,
        "d": _RATE,
        "b": _RATE,
        "lam": _NONNEG,
        "k12": _NONNEG,
        "k21": _NONNEG,
        "swap": {"type": "array", "items": {"type": "array", "items": _NONNEG}},
        "extras": {"type": "object", "additionalProperties": {"type": "number"}},
        "label": {"type": "string"},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["experiment", "seed"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"enum": ["toy", "linear"]}},
            "additionalProperties": False,
        },
        "environment": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["constant", "markov-switching"]},
                "regime": REGIME_SCHEMA,
                "regimes": {"type": "array", "items": REGIME_SCHEMA, "minItems": 1},
                "generator": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                "initial": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
            "allOf": [
                {"if": {"properties": {"type": {"const": "constant"}}},
                 "then": {"required": ["regime"]}},
                {"if": {"properties": {"type": {"const": "markov-switching"}}},
                 "then": {"required": ["regimes", "generator"]}},
            ],
        },
        "z0": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
        "thresholds": {"type": "object", "additionalProperties": {"type": "number"}},
        "options": {"type": "object"},
    },
    "additionalProperties": False,
}

DEFAULT_TOY = {"d": [1.0, 2.0], "b": 0.2, "lam": 0.3, "k12": 1.0, "k21": 1.0}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    model_spec: dict = field(default_factory=lambda: {"name": "toy"})
    env_spec: dict = field(default_factory=lambda: {"type": "constant", "regime": dict(DEFAULT_TOY)})
    z0: tuple = (1, 1)
    horizon: float = 2.0
    epsilons: tuple = (1.0,)
    replicates: int = 1000
    output_dir: str = "out"
    thresholds: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self._model = None
        self._regimes = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            pointer = _pointer(err.absolute_path)
            raise ConfigError(f"{pointer or '/'}: {err.message}", pointer)
        kw = {"experiment": data["experiment"], "seed": data["seed"]}
        if "model" in data:
            kw["model_spec"] = data["model"]
        if "environment" in data:
            kw["env_spec"] = data["environment"]
        for key in ("horizon", "replicates", "output_dir", "thresholds", "options"):
            if key in data:
                kw[key] = data[key]
        if "z0" in data:
            kw["z0"] = tuple(data["z0"])
        if "epsilons" in data:
            kw["epsilons"] = tuple(float(e) for e in data["epsilons"])
        cfg = cls(**kw)
        cfg.model()
        cfg.regimes()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def model(self) -> IntensityModel:
        if self._model is None:
            name = self.model_spec["name"]
            if name == "toy":
                if len(self.z0) != 2:
                    raise ConfigError("toy model needs a 2-entry z0", "/z0")
                self._model = ToyModel()
            else:
                self._model = LinearModel(len(self.z0))
        return self._model

    def _regime(self, spec: dict, pointer: str) -> Regime:
        spec = dict(spec)
        label = spec.pop("label", "")
        if self.model_spec["name"] == "toy":
            merged = {**DEFAULT_TOY, **spec}
            d = merged["d"]
            d1, d2 = (d, d) if not isinstance(d, list) else (d + d)[:2] if len(d) == 1 else d
            try:
                params = ToyParams(float(d1), float(d2), float(merged["b"]), float(merged["lam"]),
                                   float(merged["k12"]), float(merged["k21"]))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{pointer}: {exc}", pointer) from exc
            return params.regime(label)
        p = len(self.z0)
        for key in ("d", "b"):
            if isinstance(spec.get(key), list) and len(spec[key]) != p:
                raise ConfigError(f"{pointer}/{key}: expected {p} entries", f"{pointer}/{key}")
        if "swap" in spec and (len(spec["swap"]) != p or any(len(row) != p for row in spec["swap"])):
            raise ConfigError(f"{pointer}/swap: expected a {p}x{p} matrix", f"{pointer}/swap")
        return Regime.make(label=label, **spec)

    def regimes(self) -> tuple[Regime, ...]:
        if self._regimes is None:
            env = self.env_spec
            if env["type"] == "constant":
                self._regimes = (self._regime(env["regime"], "/environment/regime"),)
            else:
                self._regimes = tuple(self._regime(r, f"/environment/regimes/{i}")
                                      for i, r in enumerate(env["regimes"]))
                gen = env["generator"]
                m = len(self._regimes)
                if len(gen) != m or any(len(row) != m for row in gen):
                    raise ConfigError(f"/environment/generator: expected a {m}x{m} matrix",
                                      "/environment/generator")
                if env.get("initial", 0) >= m:
                    raise ConfigError("/environment/initial: out of range", "/environment/initial")
        return self._regimes

    @property
    def is_constant_env(self) -> bool:
        return self.env_spec["type"] == "constant"

    def environment(self, streams: Streams) -> EnvironmentPath:
        regimes = self.regimes()
        if self.is_constant_env:
            return EnvironmentPath.constant(regimes[0])
        try:
            return markov_switching_environment(regimes, self.env_spec["generator"], self.horizon,
                                                streams("environment"), self.env_spec.get("initial", 0))
        except ValueError as exc:
            raise ConfigError(f"/environment/generator: {exc}", "/environment/generator") from exc

    def threshold(self, name: str, default: float) -> float:
        return float(self.thresholds.get(name, default))

    def option(self, name: str, default):
        return self.options.get(name, default)
