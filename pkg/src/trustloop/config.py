"""One declarative YAML document configuring the whole pipeline: network
shape, both training stages, query synthesis, the synthetic rater, scenario
bounds, demarcations, and interactive-session knobs."""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .model import DEFAULT_DEMARCATIONS, DemarcationSet
from .nn import NetworkSpec
from .queries import FeasibleBox, QueryConfig
from .rater import OracleSpec
from .sim import ScenarioConfig
from .training import StlConfig


@dataclass(frozen=True)
class SessionConfig:
    """Interactive labeling session knobs used by the HTTP service."""

    out_dir: str = "session-data"
    initial_trajectories: int = 4
    heldout_levels: int = 40
    heldout_pairs: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.initial_trajectories < 0:
            raise ValueError("initial_trajectories must be >= 0")
        if self.heldout_levels < 1 or self.heldout_pairs < 1:
            raise ValueError("held-out sizes must be >= 1")

    def to_dict(self) -> dict:
        return {
            "out_dir": self.out_dir,
            "initial_trajectories": self.initial_trajectories,
            "heldout_levels": self.heldout_levels,
            "heldout_pairs": self.heldout_pairs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        return cls(**data)


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkSpec = field(default_factory=lambda: NetworkSpec(input_dim=3))
    stl: StlConfig = field(default_factory=StlConfig)
    query: QueryConfig = field(default_factory=QueryConfig)
    oracle: OracleSpec = field(default_factory=OracleSpec)
    demarcations: DemarcationSet = field(default_factory=DemarcationSet)
    feature_box: FeasibleBox = field(default_factory=FeasibleBox.default)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    session: SessionConfig = field(default_factory=SessionConfig)

    def to_dict(self) -> dict:
        return {
            "network": self.network.to_dict(),
            "stl": self.stl.to_dict(),
            "query": self.query.to_dict(),
            "oracle": self.oracle.to_dict(),
            "demarcations": list(self.demarcations.values),
            "feature_box": self.feature_box.to_dict(),
            "scenario": self.scenario.to_dict(),
            "session": self.session.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {
            "network": lambda d: NetworkSpec.from_dict(d),
            "stl": lambda d: StlConfig.from_dict(d),
            "query": lambda d: QueryConfig.from_dict(d),
            "oracle": lambda d: OracleSpec.from_dict(d),
            "demarcations": lambda d: DemarcationSet(tuple(float(v) for v in d)),
            "feature_box": lambda d: FeasibleBox.from_dict(d),
            "scenario": lambda d: ScenarioConfig.from_dict(d),
            "session": lambda d: SessionConfig.from_dict(d),
        }
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {key: build(data[key]) for key, build in known.items() if key in data}
        return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return ExperimentConfig()
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config root must be a mapping, got {type(data).__name__}")
    return ExperimentConfig.from_dict(data)


def save_config(path, config: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)


__all__ = [
    "DEFAULT_DEMARCATIONS",
    "ExperimentConfig",
    "SessionConfig",
    "load_config",
    "save_config",
]
