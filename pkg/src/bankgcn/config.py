"""Dotted key-value run configuration.

A config file holds one ``key = value`` pair per line (``#`` starts a
comment)::

    dataset.kind = tu
    dataset.dir = data/PROTEINS
    dataset.name = PROTEINS
    model.s = 8
    train.gamma = 0.1

Command-line ``--set key=value`` overrides use the same names.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from bankgcn.errors import ConfigError
from bankgcn.training import LRDecay, TrainConfig


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    return tuple(int(p) for p in str(text).replace(" ", "").split(",") if p)


SCHEMA = {
    "seed": (int, 0),
    "runs": (int, 1),
    "out": (str, "bankgcn-out"),
    "dataset.kind": (str, "synthetic"),
    "dataset.dir": (str, ""),
    "dataset.name": (str, ""),
    "dataset.normalize": (str, "auto"),
    "dataset.n_graphs": (int, 200),
    "dataset.nodes_per_graph": (int, 16),
    "dataset.channels": (int, 4),
    "dataset.seed": (int, 0),
    "model.widths": (_ints, (64, 64, 64, 64)),
    "model.s": (int, 8),
    "model.K": (int, 2),
    "model.frozen_lowpass": (_bool, False),
    "train.learning_rate": (float, 1e-3),
    "train.batch_size": (int, 64),
    "train.max_epochs": (int, 500),
    "train.patience": (int, 30),
    "train.weight_decay": (float, 0.0),
    "train.gamma": (float, 0.0),
    "train.lr_decay": (_bool, False),
    "train.lr_decay_factor": (float, 0.1),
    "train.lr_decay_patience": (int, 20),
    "train.min_lr": (float, 1e-5),
    "eval.split": (str, "test"),
    "export.layer": (int, 0),
    "export.points": (int, 101),
}


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines into a raw string mapping."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = value
    return raw


def coerce(raw):
    """Apply the schema: reject unknown keys, convert types, fill defaults."""
    values = {k: default for k, (_, default) in SCHEMA.items()}
    for key, text in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return values


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @property
    def widths(self):
        return self.values["model.widths"]

    def train_config(self, run=0):
        v = self.values
        decay = None
        if v["train.lr_decay"]:
            decay = LRDecay(v["train.lr_decay_factor"], v["train.lr_decay_patience"], v["train.min_lr"])
        return TrainConfig(
            learning_rate=v["train.learning_rate"],
            batch_size=v["train.batch_size"],
            max_epochs=v["train.max_epochs"],
            patience=v["train.patience"],
            weight_decay=v["train.weight_decay"],
            gamma=v["train.gamma"],
            seed=v["seed"] + run,
            lr_decay=decay,
        )

    def validate(self):
        v = self.values
        if v["dataset.kind"] not in ("synthetic", "tu"):
            raise ConfigError("dataset.kind must be 'synthetic' or 'tu'")
        if v["dataset.kind"] == "tu" and not (v["dataset.dir"] and v["dataset.name"]):
            raise ConfigError("tu datasets need dataset.dir and dataset.name")
        if v["dataset.normalize"] not in ("auto", "true", "false"):
            raise ConfigError("dataset.normalize must be auto, true or false")
        if v["dataset.nodes_per_graph"] < 8:
            raise ConfigError("dataset.nodes_per_graph must be at least 8")
        if v["dataset.n_graphs"] < 2:
            raise ConfigError("dataset.n_graphs must be at least 2")
        if v["runs"] < 1:
            raise ConfigError("runs must be at least 1")
        if v["seed"] < 0:
            raise ConfigError("seed must be non-negative")
        if v["model.s"] < 1 or v["model.K"] < 0:
            raise ConfigError("model.s must be >= 1 and model.K >= 0")
        if any(w < 1 for w in self.widths):
            raise ConfigError("model.widths must be positive")
        if not v["model.frozen_lowpass"]:
            for w in self.widths:
                if w % v["model.s"]:
                    raise ConfigError(f"width {w} is not divisible by model.s={v['model.s']}")
        if v["eval.split"] not in ("train", "val", "test", "all"):
            raise ConfigError("eval.split must be train, val, test or all")
        if v["export.points"] < 2:
            raise ConfigError("export.points must be at least 2")
        self.train_config()
        return self


def load_run_config(path=None, overrides=()):
    raw = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            raw.update(parse_config_text(fh.read(), path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (p.strip() for p in item.split("=", 1))
        raw[key] = value
    return RunConfig(coerce(raw)).validate()
