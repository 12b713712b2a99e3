"""Two-stage trust model training.

Stage one fits scalar trust levels with a summed squared-error loss.  Stage
two continues training on pairwise preferences: each pair contributes a
cross-entropy term on the two-way softmax of the pair's outputs plus a
retention penalty pulling the new outputs toward those of a frozen copy of
the stage-one network, weighted by ``lwf_weight``.  Both stages run plain
minibatch SGD with exact analytic gradients; losses are sums over the batch,
not means, and the stage learning rates account for that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import rng_for
from .datasets import LevelDataset, PreferenceDataset, PreferenceRecord
from .model import TrustModel, param_gradient, predict_raw, snap_to_level, softmax_pair
from .nn import ParamVector, TrainConfig, TrainingError, sgd_step, zeros_params


@dataclass(frozen=True)
class StlConfig:
    """Both training stages in one bundle: shared loop config plus the
    retention weight used by the preference stage."""

    train: TrainConfig = field(default_factory=TrainConfig)
    lwf_weight: float = 1.0

    def __post_init__(self):
        if self.lwf_weight < 0:
            raise ValueError(f"lwf_weight must be >= 0, got {self.lwf_weight}")

    def to_dict(self) -> dict:
        return {"train": self.train.to_dict(), "lwf_weight": self.lwf_weight}

    @classmethod
    def from_dict(cls, data: dict) -> "StlConfig":
        return cls(
            train=TrainConfig.from_dict(data.get("train", {})),
            lwf_weight=float(data.get("lwf_weight", 1.0)),
        )


def level_loss(model: TrustModel, records) -> float:
    """Sum of squared errors between raw outputs and target levels."""
    total = 0.0
    for record in records:
        err = predict_raw(model, record.features) - record.label
        total += err * err
    return total


def level_loss_and_gradient(model: TrustModel, records) -> tuple[float, ParamVector]:
    if not len(records):
        raise ValueError("level loss needs at least one record")
    total = 0.0
    grad = zeros_params(model.spec)
    for record in records:
        raw = predict_raw(model, record.features)
        err = raw - record.label
        total += err * err
        grad.values += param_gradient(model, record.features, upstream=2.0 * err).values
    return total, grad


def preference_loss_parts(
    model: TrustModel,
    anchor: TrustModel,
    record: PreferenceRecord,
    lwf_weight: float,
) -> tuple[float, float]:
    """(cross-entropy, weighted retention penalty) for one labeled pair."""
    fp = predict_raw(model, record.features_p)
    fq = predict_raw(model, record.features_q)
    p, q = softmax_pair(fp, fq)
    ip, iq = record.label
    ce = -(ip * math.log(p) + iq * math.log(q))
    ap = predict_raw(anchor, record.features_p)
    aq = predict_raw(anchor, record.features_q)
    retention = lwf_weight * ((fp - ap) ** 2 + (fq - aq) ** 2)
    return ce, retention


def preference_loss(
    model: TrustModel,
    anchor: TrustModel,
    records,
    lwf_weight: float,
) -> float:
    total = 0.0
    for record in records:
        ce, retention = preference_loss_parts(model, anchor, record, lwf_weight)
        total += ce + retention
    return total


def preference_loss_and_gradient(
    model: TrustModel,
    anchor: TrustModel,
    records,
    lwf_weight: float,
) -> tuple[float, ParamVector]:
    """Loss and exact gradient; the anchor network receives no gradient."""
    if not len(records):
        raise ValueError("preference loss needs at least one record")
    if anchor.spec != model.spec:
        raise ValueError("anchor network layout does not match the model")
    total = 0.0
    grad = zeros_params(model.spec)
    for record in records:
        fp = predict_raw(model, record.features_p)
        fq = predict_raw(model, record.features_q)
        p, q = softmax_pair(fp, fq)
        ip, iq = record.label
        ap = predict_raw(anchor, record.features_p)
        aq = predict_raw(anchor, record.features_q)
        total += -(ip * math.log(p) + iq * math.log(q))
        total += lwf_weight * ((fp - ap) ** 2 + (fq - aq) ** 2)
        up = (p - ip) + 2.0 * lwf_weight * (fp - ap)
        uq = (q - iq) + 2.0 * lwf_weight * (fq - aq)
        grad.values += param_gradient(model, record.features_p, upstream=up).values
        grad.values += param_gradient(model, record.features_q, upstream=uq).values
    return total, grad


@dataclass
class TrainResult:
    model: TrustModel
    losses: list[float]  # losses[0] before training, losses[k] after epoch k

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


def _check_finite(loss: float, model: TrustModel, epoch: int, stage: str) -> None:
    if not math.isfinite(loss):
        raise TrainingError(f"{stage} diverged at epoch {epoch}: loss={loss!r}")
    if not np.all(np.isfinite(model.params.values)):
        raise TrainingError(f"{stage} diverged at epoch {epoch}: non-finite parameters")


def _batches(n: int, batch_size: int, rng):
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_level(
    model: TrustModel,
    dataset: LevelDataset,
    config: TrainConfig,
) -> TrainResult:
    """Minibatch SGD on the summed level loss at ``learning_rate_a``."""
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty level dataset")
    model = model.replace_params(model.params.copy())
    rng = rng_for(config.seed, "train-level")
    records = dataset.records
    losses = [level_loss(model, records)]
    for epoch in range(config.epochs):
        rate = config.rate_at(config.learning_rate_a, epoch)
        for idx in _batches(len(records), config.batch_size, rng):
            _, grad = level_loss_and_gradient(model, [records[i] for i in idx])
            model = model.replace_params(sgd_step(model.params, grad, rate))
        loss = level_loss(model, records)
        _check_finite(loss, model, epoch, "level training")
        losses.append(loss)
    return TrainResult(model, losses)


def train_preference(
    model: TrustModel,
    dataset: PreferenceDataset,
    config: TrainConfig,
    lwf_weight: float = 1.0,
    anchor: TrustModel | None = None,
) -> TrainResult:
    """Continue training on preference pairs at ``learning_rate_b``.

    ``anchor`` defaults to a frozen copy of ``model`` as passed in; the input
    model is left untouched on any failure.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty preference dataset")
    if lwf_weight < 0:
        raise ValueError(f"lwf_weight must be >= 0, got {lwf_weight}")
    if anchor is None:
        anchor = model.replace_params(model.params.copy())
    model = model.replace_params(model.params.copy())
    rng = rng_for(config.seed, "train-preference")
    records = dataset.records
    losses = [preference_loss(model, anchor, records, lwf_weight)]
    for epoch in range(config.epochs):
        rate = config.rate_at(config.learning_rate_b, epoch)
        for idx in _batches(len(records), config.batch_size, rng):
            _, grad = preference_loss_and_gradient(
                model, anchor, [records[i] for i in idx], lwf_weight
            )
            model = model.replace_params(sgd_step(model.params, grad, rate))
        loss = preference_loss(model, anchor, records, lwf_weight)
        _check_finite(loss, model, epoch, "preference training")
        losses.append(loss)
    return TrainResult(model, losses)


@dataclass
class EvalReport:
    level_accuracy: float
    preference_accuracy: float
    n_levels: int
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "level_accuracy": self.level_accuracy,
            "preference_accuracy": self.preference_accuracy,
            "n_levels": self.n_levels,
            "n_pairs": self.n_pairs,
        }


def level_accuracy(model: TrustModel, dataset: LevelDataset) -> float:
    if len(dataset) == 0:
        return float("nan")
    hits = 0
    for record in dataset:
        snapped = snap_to_level(predict_raw(model, record.features), model.demarcations)
        if snapped == record.label:
            hits += 1
    return hits / len(dataset)


def preference_accuracy(model: TrustModel, dataset: PreferenceDataset) -> float:
    """Fraction of pairs whose higher-output side matches the label.

    Exactly equal outputs count as wrong: the model expressed no preference.
    """
    if len(dataset) == 0:
        return float("nan")
    hits = 0
    for record in dataset:
        fp = predict_raw(model, record.features_p)
        fq = predict_raw(model, record.features_q)
        if fp == fq:
            continue
        predicted = (1, 0) if fp > fq else (0, 1)
        if predicted == record.label:
            hits += 1
    return hits / len(dataset)


def evaluate(
    model: TrustModel,
    levels: LevelDataset | None = None,
    prefs: PreferenceDataset | None = None,
) -> EvalReport:
    """Snap-equality level accuracy plus strict-argmax preference accuracy."""
    return EvalReport(
        level_accuracy=level_accuracy(model, levels) if levels is not None else float("nan"),
        preference_accuracy=preference_accuracy(model, prefs) if prefs is not None else float("nan"),
        n_levels=len(levels) if levels is not None else 0,
        n_pairs=len(prefs) if prefs is not None else 0,
    )
