"""Run configuration: flat key=value files with command-line overrides."""

import os
from dataclasses import dataclass, fields

from .core import NetworkTopology
from .data import DEFAULT_BINARIZE_THRESHOLD
from .train import Hyperparams


class ConfigError(ValueError):
    """A configuration key is missing, malformed, or inconsistent."""


_TASK_INPUT_SIZES = {"xor": 2, "mnist": 784}


@dataclass
class RunConfig:
    task: str = "xor"
    topology: str = ""
    reference_neuron: bool = False
    lr_start: float = 0.01
    lr_end: float = 0.0001
    epochs: int = 100
    batch_size: int = 10
    weight_sum_k: float = 100.0
    l2_lambda: float = 0.001
    clip_threshold: float = 10.0
    input_noise: bool = False
    seed: int = 0
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    encode_threshold: int = DEFAULT_BINARIZE_THRESHOLD
    train_limit: int = 0
    outdir: str = "run"
    sim_dt: float = 1e-4

    def layer_sizes(self):
        try:
            return tuple(int(s) for s in self.topology.split("-"))
        except ValueError as exc:
            raise ConfigError(f"topology: cannot parse {self.topology!r}") from exc

    def to_topology(self):
        return NetworkTopology(self.layer_sizes(), use_reference_neuron=self.reference_neuron)

    def to_hyperparams(self):
        try:
            return Hyperparams(
                lr_start=self.lr_start,
                lr_end=self.lr_end,
                epochs=self.epochs,
                batch_size=self.batch_size,
                weight_sum_k=self.weight_sum_k,
                l2_lambda=self.l2_lambda,
                clip_threshold=self.clip_threshold,
                input_noise=self.input_noise,
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        if self.task not in _TASK_INPUT_SIZES:
            raise ConfigError(f"task: expected xor or mnist, got {self.task!r}")
        if not self.topology:
            self.topology = "2-4-2" if self.task == "xor" else "784-100-10"
        sizes = self.layer_sizes()
        if sizes[0] != _TASK_INPUT_SIZES[self.task]:
            raise ConfigError(
                f"topology: input size {sizes[0]} does not match task {self.task} "
                f"(needs {_TASK_INPUT_SIZES[self.task]})"
            )
        if self.task == "mnist":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                path = getattr(self, key)
                if not path:
                    raise ConfigError(f"{key}: required for the mnist task")
                if not os.path.exists(path):
                    raise ConfigError(f"{key}: no such file: {path}")
        self.to_hyperparams()
        return self

    def as_items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


def _coerce(name, raw, target_type):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: expected {target_type.__name__}, got {raw!r}") from exc


def _apply(config, name, raw):
    field_types = {f.name: f.type for f in fields(RunConfig)}
    if name not in field_types:
        raise ConfigError(f"unknown configuration key {name!r}")
    current = getattr(config, name)
    setattr(config, name, _coerce(name, raw, type(current)))


def load_config(path=None, overrides=()):
    """Build a RunConfig from an optional key=value file plus overrides.

    Lines are `key = value`; blank lines and `#` comments are skipped.
    Overrides are `key=value` strings and win over the file.
    """
    config = RunConfig()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
                key, raw = line.split("=", 1)
                _apply(config, key.strip(), raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        _apply(config, key.strip(), raw)
    return config.validate()
