"""Run configuration: one master seed plus overrides, YAML round-trippable.

Precedence when assembling a run is command-line flags over the config
file over the defaults below.  Every random decision in a run derives
from ``master_seed`` through the named sub-streams in ``rng``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .data import SplitSpec, TIMESTEP_GROUPS
from .entropy import EntropyConfig, ThresholdMethod
from .experiment import (CONDITIONS, DEFAULT_TRAIN_CONFIGS, ExperimentPlan)
from .nn import ModelFamily, ModelSpec, TrainConfig, default_spec
from .sim import SimConfig


@dataclass(frozen=True)
class RunConfig:
    master_seed: int = 0
    out_dir: str = "runs/default"
    n_per_class: int = 100
    jobs: int = 1
    sim: dict = field(default_factory=dict)       # SimConfig overrides
    split: dict = field(default_factory=dict)     # SplitSpec overrides
    entropy: dict = field(default_factory=dict)   # EntropyConfig overrides
    families: tuple[str, ...] = tuple(f.value for f in ModelFamily)
    baselines: tuple[str, ...] = tuple(b.value for b in ThresholdMethod)
    timesteps: tuple[int, ...] = TIMESTEP_GROUPS
    conditions: tuple[str, ...] = CONDITIONS
    # per-family {"epochs":…, "learning_rate":…, "batch_size":…,
    #             "hidden_sizes":…, "input_stride":…}
    models: dict = field(default_factory=dict)

    def sim_config(self) -> SimConfig:
        return SimConfig(seed=self.master_seed, **self.sim)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(seed=self.master_seed, **self.split)

    def entropy_config(self) -> EntropyConfig:
        return EntropyConfig(**self.entropy)

    def plan(self) -> ExperimentPlan:
        model_specs, train_configs = {}, {}
        for name, overrides in self.models.items():
            family = ModelFamily(name)
            spec = default_spec(family)
            if "hidden_sizes" in overrides:
                spec = replace(spec,
                               hidden_sizes=tuple(overrides["hidden_sizes"]))
            if "input_stride" in overrides:
                spec = replace(spec, input_stride=int(overrides["input_stride"]))
            model_specs[family] = spec
            tc = DEFAULT_TRAIN_CONFIGS[family]
            tc_fields = {f.name for f in fields(TrainConfig)}
            tc_overrides = {k: v for k, v in overrides.items() if k in tc_fields}
            if tc_overrides:
                tc = replace(tc, **tc_overrides)
            train_configs[family] = tc
        return ExperimentPlan(
            families=tuple(ModelFamily(f) for f in self.families),
            baselines=tuple(ThresholdMethod(b) for b in self.baselines),
            timestep_groups=tuple(int(t) for t in self.timesteps),
            conditions=tuple(self.conditions),
            seed=self.master_seed,
            k_folds=self.split_spec().k_folds,
            entropy=self.entropy_config(),
            model_specs=model_specs,
            train_configs=train_configs,
        )


def load_config(path) -> RunConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("families", "baselines", "timesteps", "conditions"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return RunConfig(**raw)


def save_config(config: RunConfig, path) -> None:
    data = asdict(config)
    for key in ("families", "baselines", "timesteps", "conditions"):
        data[key] = list(data[key])
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))
