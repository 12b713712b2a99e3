"""Seeded multi-run experiment harness.

Each setting fixes a labeling budget and pipeline shape; each run of a
setting draws its data, labels it with the synthetic rater, trains from the
same seed-determined initialization, and scores a held-out set shared by
every setting at that seed.  Budgets are nested (the 40-sample settings use
the first 40 of the 60-sample draw) so comparisons are paired.

Settings:

  random-40     level training on 40 uniformly sampled labeled features
  random-60     level training on 60
  active-40-20  level training on 40, then 20 synthesized queries labeled
                and the model retrained from the same initialization on 60
  pref-60-40    level training on 60, then preference training on 40 pairs
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ._util import fmt_float, rng_for
from .config import ExperimentConfig
from .datasets import LevelDataset, PreferenceDataset
from .model import InputScale, TrustModel, snap_to_level
from .nn import init_params
from .queries import TrainingPool, synthesize_queries
from .rater import Oracle
from .training import evaluate, train_level, train_preference

SETTINGS = ("random-40", "random-60", "active-40-20", "pref-60-40")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    level_accuracy: float
    preference_accuracy: float


@dataclass
class ExperimentReport:
    setting: str
    runs: list[RunRecord]
    config_snapshot: dict

    def _values(self, metric: str) -> np.ndarray:
        return np.array([getattr(run, metric) for run in self.runs])

    @property
    def mean_level(self) -> float:
        return float(self._values("level_accuracy").mean())

    @property
    def std_level(self) -> float:
        return float(self._values("level_accuracy").std())

    @property
    def mean_preference(self) -> float:
        return float(self._values("preference_accuracy").mean())

    @property
    def std_preference(self) -> float:
        return float(self._values("preference_accuracy").std())

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "runs": [
                {
                    "seed": run.seed,
                    "level_accuracy": run.level_accuracy,
                    "preference_accuracy": run.preference_accuracy,
                }
                for run in self.runs
            ],
            "mean_level": self.mean_level,
            "std_level": self.std_level,
            "mean_preference": self.mean_preference,
            "std_preference": self.std_preference,
            "config": self.config_snapshot,
        }


def heldout_sets(
    config: ExperimentConfig, seed: int
) -> tuple[LevelDataset, PreferenceDataset]:
    """Noiseless ground-truth evaluation sets, shared by all settings at a
    given seed and disjoint by construction from every training draw."""
    oracle = Oracle(config.oracle)
    box = config.feature_box
    rng = rng_for(seed, "heldout")
    levels = LevelDataset()
    for i in range(config.session.heldout_levels):
        psi = box.sample(rng)
        label = snap_to_level(oracle.true_trust(psi), config.demarcations)
        levels.add(f"s{seed}-heldout-{i:03d}", psi, label)
    pairs = PreferenceDataset()
    for i in range(config.session.heldout_pairs):
        psi_p, psi_q = box.sample(rng), box.sample(rng)
        tp, tq = oracle.true_trust(psi_p), oracle.true_trust(psi_q)
        if tp == tq:
            label = (1, 0) if tuple(psi_p) <= tuple(psi_q) else (0, 1)
        else:
            label = (1, 0) if tp > tq else (0, 1)
        pairs.add(f"s{seed}-heldout-pair-{i:03d}", psi_p, psi_q, label)
    return levels, pairs


def _fresh_model(config: ExperimentConfig, seed: int) -> TrustModel:
    params = init_params(config.network, seed=seed)
    scale = InputScale.from_bounds(config.feature_box.lower, config.feature_box.upper)
    return TrustModel(config.network, params, config.demarcations, scale)


def _label_levels(oracle, features, demarcs, prefix: str) -> LevelDataset:
    dataset = LevelDataset()
    for i, psi in enumerate(features):
        dataset.add(f"{prefix}-{i:03d}", psi, oracle.rate_level(psi, demarcs))
    return dataset


def run_single(config: ExperimentConfig, setting: str, seed: int) -> RunRecord:
    """One seeded end-to-end run of one setting."""
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}, expected one of {SETTINGS}")
    oracle = Oracle(dataclasses.replace(config.oracle, seed=seed))
    box = config.feature_box
    demarcs = config.demarcations
    rng = rng_for(seed, "train-data")
    base60 = [box.sample(rng) for _ in range(60)]
    raw_pairs = [(box.sample(rng), box.sample(rng)) for _ in range(40)]
    model = _fresh_model(config, seed)
    train_cfg = dataclasses.replace(config.stl.train, seed=seed)

    if setting == "random-40":
        data = _label_levels(oracle, base60[:40], demarcs, f"s{seed}-rand")
        trained = train_level(model, data, train_cfg).model
    elif setting == "random-60":
        data = _label_levels(oracle, base60, demarcs, f"s{seed}-rand")
        trained = train_level(model, data, train_cfg).model
    elif setting == "active-40-20":
        data = _label_levels(oracle, base60[:40], demarcs, f"s{seed}-rand")
        warm = train_level(model, data, train_cfg).model
        query_cfg = dataclasses.replace(config.query, seed=seed)
        synthesized = synthesize_queries(
            warm, TrainingPool(base60[:40]), box, query_cfg, count=20
        )
        for i, psi in enumerate(synthesized):
            data.add(f"s{seed}-active-{i:03d}", psi, oracle.rate_level(psi, demarcs))
        trained = train_level(model, data, train_cfg).model
    else:  # pref-60-40
        data = _label_levels(oracle, base60, demarcs, f"s{seed}-rand")
        warm = train_level(model, data, train_cfg).model
        pairs = PreferenceDataset()
        for i, (psi_p, psi_q) in enumerate(raw_pairs):
            pairs.add(f"s{seed}-pair-{i:03d}", psi_p, psi_q, oracle.rate_preference(psi_p, psi_q))
        trained = train_preference(
            warm, pairs, train_cfg, lwf_weight=config.stl.lwf_weight
        ).model

    ho_levels, ho_pairs = heldout_sets(config, seed)
    report = evaluate(trained, ho_levels, ho_pairs)
    return RunRecord(seed, report.level_accuracy, report.preference_accuracy)


def run_ablation(config: ExperimentConfig, setting: str, seeds) -> ExperimentReport:
    """Run one setting across seeds; any failing run aborts with its seed."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    runs = []
    for seed in seeds:
        try:
            runs.append(run_single(config, setting, seed))
        except Exception as exc:
            raise RuntimeError(f"setting {setting!r} failed at seed {seed}: {exc}") from exc
    return ExperimentReport(setting, runs, config.to_dict())


def write_report_records(path, report: ExperimentReport) -> None:
    """Line-delimited per-run records: seed, level acc, preference acc."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# trustloop-ablation v1 setting={report.setting}\n")
        for run in report.runs:
            fh.write(
                f"{run.seed} {fmt_float(run.level_accuracy)} "
                f"{fmt_float(run.preference_accuracy)}\n"
            )


def write_csv(path, reports: list[ExperimentReport]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("setting,seed,level_accuracy,preference_accuracy\n")
        for report in reports:
            for run in report.runs:
                fh.write(
                    f"{report.setting},{run.seed},{fmt_float(run.level_accuracy)},"
                    f"{fmt_float(run.preference_accuracy)}\n"
                )


def summary_table(reports: list[ExperimentReport]) -> str:
    """Human-readable fixed-width comparison of settings."""
    lines = [
        f"{'setting':<14} {'runs':>4} {'level acc':>18} {'preference acc':>18}",
        "-" * 58,
    ]
    for report in reports:
        lines.append(
            f"{report.setting:<14} {len(report.runs):>4} "
            f"{report.mean_level:>9.4f} ±{report.std_level:<7.4f} "
            f"{report.mean_preference:>9.4f} ±{report.std_preference:<7.4f}"
        )
    return "\n".join(lines) + "\n"
