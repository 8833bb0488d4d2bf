"""Experiment configuration: JSON schema, parsing, validation, echo.

A run config is a JSON object with these sections (all keys optional
unless noted; unknown keys are rejected)::

    {
      "algorithm": "epd" | "eb-epd" | "deb-epd" | "sgd-const" |
                   "sgd-decay" | "adam" | "amsgrad",
      "seed": 1,
      "out_dir": "results",
      "scenario": "auto" | "classical" | "event-cyclic",
      "run_name": null,
      "dataset": {
        "kind": "blobs" | "image-bin",
        "t_train": 2000, "v_test": 400, "c_classes": 4,
        "b_batches": 5, "s_batch": 400, "n_epochs": 30,
        "n_features": 16, "cluster_std": 2.0, "center_span": 4.0,
        "seed": 7,
        "path": null            # directory with train.bin/test.bin (image-bin)
      },
      "controller": {"lambda0": 0.01, "kp": 1.0, "kd": 10.0,
                     "feed": "validation" | "training"},
      "governor":   {"m": 4, "alpha_thld": -0.001},
      "optimizer":  {"beta1": 0.9, "beta2": 0.999, "epsilon": 1e-8},
      "network":    {"hidden": [64, 32], "minibatch_size": 32},
      "sgd":        {"decay": 0.1}
    }

A sweep config nests a run config under "base" and lists the grid::

    {"algorithms": [...], "lr0": [...], "seeds": [...],
     "workers": 2, "base": {...}}

The resolved config is echoed next to every result CSV so a run can be
reproduced from its outputs alone.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

ALGORITHMS = ("epd", "eb-epd", "deb-epd", "sgd-const", "sgd-decay", "adam", "amsgrad")
CONTROLLER_ALGORITHMS = ("epd", "eb-epd", "deb-epd")
SCENARIOS = ("auto", "classical", "event-cyclic")
DATASET_KINDS = ("blobs", "image-bin")
FEEDS = ("validation", "training")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class DatasetConfig:
    kind: str = "blobs"
    t_train: int = 2000
    v_test: int = 400
    c_classes: int = 4
    b_batches: int = 5
    s_batch: int = 400
    n_epochs: int = 30
    n_features: int = 16
    cluster_std: float = 2.0
    center_span: float = 4.0
    seed: int = 7
    path: str | None = None


@dataclass
class ControllerSection:
    lambda0: float = 0.01
    kp: float = 1.0
    kd: float = 10.0
    feed: str = "validation"


@dataclass
class GovernorSection:
    m: int = 4
    alpha_thld: float = -0.001


@dataclass
class OptimizerSection:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class NetworkSection:
    hidden: tuple[int, ...] = (64, 32)
    minibatch_size: int = 32


@dataclass
class SgdSection:
    decay: float = 0.1


@dataclass
class ExperimentConfig:
    algorithm: str = "epd"
    seed: int = 1
    out_dir: str = "results"
    scenario: str = "auto"
    run_name: str | None = None
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    controller: ControllerSection = field(default_factory=ControllerSection)
    governor: GovernorSection = field(default_factory=GovernorSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    sgd: SgdSection = field(default_factory=SgdSection)

    def resolved_scenario(self) -> str:
        if self.scenario != "auto":
            return self.scenario
        return "event-cyclic" if self.algorithm == "deb-epd" else "classical"

    def resolved_run_name(self) -> str:
        if self.run_name:
            return self.run_name
        return f"{self.algorithm}_lr{self.controller.lambda0:g}_seed{self.seed}"


@dataclass
class SweepConfig:
    algorithms: list[str]
    lr0: list[float]
    seeds: list[int]
    workers: int = 2
    base: ExperimentConfig = field(default_factory=ExperimentConfig)


def _build_section(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = dict(data)
    if cls is NetworkSection and "hidden" in kwargs:
        kwargs["hidden"] = tuple(kwargs["hidden"])
    return cls(**kwargs)


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "controller": ControllerSection,
    "governor": GovernorSection,
    "optimizer": OptimizerSection,
    "network": NetworkSection,
    "sgd": SgdSection,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["network"]["hidden"] = list(cfg.network.hidden)
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config_echo(cfg: ExperimentConfig, path: str | Path) -> None:
    """Write the fully resolved config (run_name included) next to results."""
    data = config_to_dict(cfg)
    data["run_name"] = cfg.resolved_run_name()
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_config_echo(path: str | Path) -> ExperimentConfig:
    return load_config(path)


def sweep_from_dict(data: dict) -> SweepConfig:
    if not isinstance(data, dict):
        raise ConfigError("sweep config root must be an object")
    unknown = set(data) - {"algorithms", "lr0", "seeds", "workers", "base"}
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")
    for key in ("algorithms", "lr0", "seeds"):
        if key not in data or not isinstance(data[key], list) or not data[key]:
            raise ConfigError(f"sweep requires a nonempty list {key!r}")
    base = config_from_dict(data.get("base", {}))
    return SweepConfig(
        algorithms=list(data["algorithms"]),
        lr0=[float(v) for v in data["lr0"]],
        seeds=[int(v) for v in data["seeds"]],
        workers=int(data.get("workers", 2)),
        base=base,
    )


def load_sweep_config(path: str | Path) -> SweepConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read sweep config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep config {path} is not valid JSON: {exc}") from exc
    return sweep_from_dict(data)


def validate(cfg: ExperimentConfig) -> None:
    """Reject inconsistent configs with a diagnostic; returns None if valid."""
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}; choose from {ALGORITHMS}")
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; choose from {SCENARIOS}")
    ds = cfg.dataset
    if ds.kind not in DATASET_KINDS:
        raise ConfigError(f"unknown dataset kind {ds.kind!r}; choose from {DATASET_KINDS}")
    for name in ("t_train", "v_test", "c_classes", "b_batches", "s_batch", "n_epochs"):
        if getattr(ds, name) <= 0:
            raise ConfigError(f"dataset.{name} must be positive")
    if ds.b_batches * ds.s_batch > ds.t_train:
        raise ConfigError(
            f"b_batches*s_batch = {ds.b_batches * ds.s_batch} exceeds t_train = {ds.t_train}"
        )
    if ds.kind == "blobs" and ds.n_features <= 0:
        raise ConfigError("dataset.n_features must be positive for blobs")
    if ds.kind == "image-bin" and not ds.path:
        raise ConfigError("dataset.path is required for kind 'image-bin'")
    ctl = cfg.controller
    if not ctl.lambda0 > 0:
        raise ConfigError(f"controller.lambda0 must be positive, got {ctl.lambda0}")
    if not ctl.kp > 0:
        raise ConfigError(f"controller.kp must be positive, got {ctl.kp}")
    if ctl.kd < 0:
        raise ConfigError(f"controller.kd must be nonnegative, got {ctl.kd}")
    if ctl.feed not in FEEDS:
        raise ConfigError(f"controller.feed must be one of {FEEDS}, got {ctl.feed!r}")
    gov = cfg.governor
    if gov.m < 1:
        raise ConfigError(f"governor.m must be >= 1, got {gov.m}")
    if gov.alpha_thld > 0:
        raise ConfigError(
            f"governor.alpha_thld must not be positive, got {gov.alpha_thld}"
        )
    if cfg.resolved_scenario() == "event-cyclic" and ds.n_epochs <= gov.m:
        raise ConfigError(
            f"event-cyclic runs need n_epochs > governor.m, got "
            f"n_epochs={ds.n_epochs} m={gov.m}"
        )
    opt = cfg.optimizer
    if not (0 <= opt.beta1 < 1 and 0 <= opt.beta2 < 1):
        raise ConfigError("optimizer betas must lie in [0, 1)")
    if not opt.epsilon > 0:
        raise ConfigError("optimizer.epsilon must be positive")
    if cfg.sgd.decay < 0:
        raise ConfigError(f"sgd.decay must be nonnegative, got {cfg.sgd.decay}")
    net = cfg.network
    if net.minibatch_size < 1:
        raise ConfigError("network.minibatch_size must be >= 1")
    if any(h < 1 for h in net.hidden):
        raise ConfigError("network.hidden sizes must be >= 1")


def validate_sweep(sweep: SweepConfig) -> None:
    if sweep.workers < 1:
        raise ConfigError("sweep.workers must be >= 1")
    for algo in sweep.algorithms:
        if algo not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {algo!r} in sweep")
    for lr0 in sweep.lr0:
        if not lr0 > 0:
            raise ConfigError(f"sweep lr0 values must be positive, got {lr0}")
    for cfg in iter_sweep_cells(sweep):
        validate(cfg)


def iter_sweep_cells(sweep: SweepConfig):
    """Yield one resolved ExperimentConfig per (algorithm, lr0, seed) cell."""
    for algo in sweep.algorithms:
        for lr0 in sweep.lr0:
            for seed in sweep.seeds:
                cfg = dataclasses.replace(
                    sweep.base,
                    algorithm=algo,
                    seed=seed,
                    run_name=None,
                    controller=dataclasses.replace(sweep.base.controller, lambda0=lr0),
                )
                yield cfg
