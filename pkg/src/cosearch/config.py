"""Experiment configuration: YAML file, then ``COSEARCH_*`` environment
variables, then command-line flags, each layer overriding the last.

Nested keys use a double underscore in the environment, e.g.
``COSEARCH_WORLD__WIDTH=48`` or ``COSEARCH_DETECTOR__RANGE=1.5``.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .gat import ModelConfig
from .search import POLICIES
from .train import TrainConfig
from .world import DetectorConfig

ENV_PREFIX = "COSEARCH_"

BENCH_TARGETS = ["knife", "apple", "mug", "book", "pillow", "remotecontrol", "soapbar", "cellphone"]

DEFAULTS = {
    "corpus": None,
    "ontology": None,
    "checkpoint": None,
    "out": "results",
    "train": {"lr": 1e-2, "epochs": 300, "neg_ratio": 1, "seed": 0, "train_fraction": 0.8,
              "weight_decay": 0.0, "edge_dropout": 0.0},
    "model": {"feature_dim": 64, "embed_dim": 16, "layers": 2, "heads": 4, "hidden": 32,
              "predictor_hidden": 32, "negative_slope": 0.2, "hash_seed": 0},
    "world": {"seeds": 25, "width": 40, "height": 40, "n_stationary": 14, "n_movable": 12,
              "targets": BENCH_TARGETS, "partitions": True, "receptacle_prob": 0.5},
    "policies": list(POLICIES),
    "limit": 400,
    "detector": {"range": 2.0, "fov": 90.0, "noise": 0.1, "p_fn": 0.0, "seed": 0},
    "jobs": 1,
    "traces": False,
}


class ConfigError(ValueError):
    pass


def bundled(name):
    return resources.files("cosearch.data").joinpath(name)


def _merge(base, extra, where="config"):
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"{where}: unknown key {k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            _merge(base[k], v, f"{where}.{k}")
        else:
            base[k] = v
    return base


def env_overrides(environ):
    """Nested dict from ``COSEARCH_A__B=value`` variables (values parsed as YAML scalars)."""
    out = {}
    for key in sorted(environ):
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = yaml.safe_load(environ[key])
    return out


def seed_list(value):
    """``25`` -> 0..24, ``"3-7"`` -> 3..7, list -> itself."""
    if isinstance(value, bool):
        raise ConfigError("world.seeds must be a count, a range 'a-b' or a list")
    if isinstance(value, int):
        seeds = list(range(value))
    elif isinstance(value, str) and "-" in value:
        a, b = value.split("-", 1)
        seeds = list(range(int(a), int(b) + 1))
    elif isinstance(value, list):
        seeds = [int(s) for s in value]
    else:
        raise ConfigError(f"world.seeds: cannot interpret {value!r}")
    if not seeds:
        raise ConfigError("world.seeds must be non-empty")
    return seeds


@dataclass
class ExperimentConfig:
    raw: dict

    @property
    def corpus_path(self):
        return self.raw["corpus"]

    @property
    def ontology_path(self):
        return self.raw["ontology"]

    @property
    def checkpoint(self):
        """Explicit path, else ``model.ckpt`` inside the output directory."""
        ck = self.raw["checkpoint"]
        return Path(ck) if ck else self.out / "model.ckpt"

    @property
    def out(self):
        return Path(self.raw["out"])

    @property
    def train(self):
        return TrainConfig(**self.raw["train"])

    @property
    def model(self):
        return ModelConfig(init_seed=int(self.raw["train"]["seed"]), **self.raw["model"])

    @property
    def detector(self):
        return DetectorConfig(**self.raw["detector"])

    @property
    def seeds(self):
        return seed_list(self.raw["world"]["seeds"])

    @property
    def world(self):
        return self.raw["world"]

    @property
    def policies(self):
        return list(self.raw["policies"])

    @property
    def limit(self):
        return int(self.raw["limit"])

    def validate(self):
        r = self.raw
        try:
            self.train.validate()
        except ValueError as e:
            raise ConfigError(f"train: {e}") from None
        seed_list(r["world"]["seeds"])
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}; expected one of {', '.join(POLICIES)}")
        if not self.policies:
            raise ConfigError("policies must be non-empty")
        if self.limit < 0:
            raise ConfigError("limit must be >= 0")
        w = r["world"]
        if w["width"] < 4 or w["height"] < 4:
            raise ConfigError("world must be at least 4x4 cells")
        if w["n_movable"] < 1 or w["n_stationary"] < 1:
            raise ConfigError("world needs at least one stationary and one movable object")
        d = r["detector"]
        if d["range"] <= 0 or not 0 < d["fov"] <= 360 or d["noise"] < 0 or not 0 <= d["p_fn"] < 1:
            raise ConfigError("detector: need range > 0, 0 < fov <= 360, noise >= 0, 0 <= p_fn < 1")
        if int(r["jobs"]) < 1:
            raise ConfigError("jobs must be >= 1")
        for key in ("corpus", "ontology"):
            if r[key] is not None and not Path(r[key]).exists():
                raise FileNotFoundError(f"{key} file not found: {r[key]}")
        return self


def load_config(path=None, environ=None, overrides=None):
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(raw, data, str(path))
    _merge(raw, env_overrides(os.environ if environ is None else environ), "environment")
    if overrides:
        _merge(raw, overrides, "flags")
    return ExperimentConfig(raw)
