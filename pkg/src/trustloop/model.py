"""Trust function over trajectory features.

Wraps the dense net with the discrete trust vocabulary: demarcation snapping,
two-way preference probabilities, and the distinction degree used both for
reporting and for query synthesis. Physical features are standardized by an
optional per-dimension affine input scale (stored in checkpoints) so the tanh
net sees inputs of order one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn

DEFAULT_DEMARCATIONS = (-1.0, -0.5, 0.0, 0.5, 1.0)

# raw_delta buckets for the three distinction levels (0.0 / 0.5 / 1.0)
DEFAULT_DISTINCTION_THRESHOLDS = (0.05, 0.15)


@dataclass(frozen=True)
class DemarcationSet:
    """Strictly increasing trust values in [-1, 1] that ratings snap to."""

    values: tuple[float, ...] = DEFAULT_DEMARCATIONS

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 2:
            raise ValueError("need at least 2 demarcation values")
        if any(v < -1.0 or v > 1.0 for v in vals):
            raise ValueError(f"demarcations must lie in [-1, 1], got {vals}")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"demarcations must be strictly increasing, got {vals}")

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def midpoints(self) -> tuple[float, ...]:
        return tuple((a + b) / 2.0 for a, b in zip(self.values, self.values[1:]))


def ensure_level(value: float, demarcs: DemarcationSet) -> float:
    """Validate that a label is a member of the demarcation set."""
    value = float(value)
    if value not in demarcs.values:
        raise ValueError(f"trust level {value} is not one of {demarcs.values}")
    return value


def ensure_preference_label(label) -> tuple[int, int]:
    """Validate a one-hot (I, I') pair."""
    first, second = label
    first, second = int(first), int(second)
    if {first, second} != {0, 1}:
        raise ValueError(f"preference label must be one-hot, got {(first, second)}")
    return first, second


@dataclass(frozen=True)
class InputScale:
    """Per-dimension affine map applied before the net: (psi - offset) * scale."""

    offset: tuple[float, ...]
    scale: tuple[float, ...]

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return (np.asarray(psi, dtype=np.float64) - self.offset) * self.scale

    def to_dict(self) -> dict:
        return {"offset": list(self.offset), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "InputScale":
        return cls(tuple(float(v) for v in d["offset"]), tuple(float(v) for v in d["scale"]))

    @classmethod
    def from_bounds(cls, lower, upper) -> "InputScale":
        """Map a feature box onto [-1, 1] per dimension."""
        lower = np.asarray(lower, dtype=np.float64)
        upper = np.asarray(upper, dtype=np.float64)
        mid = (lower + upper) / 2.0
        half = (upper - lower) / 2.0
        return cls(tuple(mid), tuple(1.0 / half))


@dataclass
class TrustModel:
    """Current trust function: net spec + parameters + trust vocabulary."""

    spec: nn.NetworkSpec
    params: nn.ParamVector
    demarcations: DemarcationSet = field(default_factory=DemarcationSet)
    input_scale: InputScale | None = None

    def replace_params(self, params: nn.ParamVector) -> "TrustModel":
        return TrustModel(self.spec, params, self.demarcations, self.input_scale)

    def save(self, path) -> None:
        nn.save_params(
            path,
            self.params,
            self.spec,
            demarcations=self.demarcations.values,
            input_scale=self.input_scale.to_dict() if self.input_scale else None,
        )

    @classmethod
    def load(cls, path) -> "TrustModel":
        params, spec, header = nn.load_params(path)
        demarcs = DemarcationSet(tuple(header["demarcations"])) if header.get("demarcations") else DemarcationSet()
        scale = InputScale.from_dict(header["input_scale"]) if header.get("input_scale") else None
        return cls(spec, params, demarcs, scale)


def predict_raw(model: TrustModel, psi: np.ndarray) -> float:
    """Continuous trust estimate in (-1, 1)."""
    x = np.asarray(psi, dtype=np.float64)
    if model.input_scale is not None:
        x = model.input_scale.apply(x)
    return nn.forward(model.params, model.spec, x)


def input_gradient(model: TrustModel, psi: np.ndarray) -> tuple[float, np.ndarray]:
    """(raw output, d output / d psi), chained through the input scale."""
    x = np.asarray(psi, dtype=np.float64)
    if model.input_scale is not None:
        x = model.input_scale.apply(x)
    grad_params, dx = nn.backward(model.params, model.spec, x, upstream=1.0)
    del grad_params
    if model.input_scale is not None:
        dx = dx * np.asarray(model.input_scale.scale)
    return nn.forward(model.params, model.spec, x), dx


def param_gradient(model: TrustModel, psi: np.ndarray, upstream: float) -> nn.ParamVector:
    """Gradient of (upstream * raw output) wrt parameters."""
    x = np.asarray(psi, dtype=np.float64)
    if model.input_scale is not None:
        x = model.input_scale.apply(x)
    grad, _ = nn.backward(model.params, model.spec, x, upstream=upstream)
    return grad


def snap_to_level(raw: float, demarcs: DemarcationSet | None = None) -> float:
    """Nearest demarcation value; exact ties resolve to the smaller value."""
    demarcs = demarcs or DemarcationSet()
    best = demarcs.values[0]
    best_gap = abs(raw - best)
    for d in demarcs.values[1:]:
        gap = abs(raw - d)
        if gap < best_gap:
            best, best_gap = d, gap
    return best


def softmax_pair(a: float, b: float) -> tuple[float, float]:
    """Numerically stable two-way softmax."""
    m = max(a, b)
    ea = math.exp(a - m)
    eb = math.exp(b - m)
    total = ea + eb
    return ea / total, eb / total


def preference_prob(model: TrustModel, psi_p, psi_q) -> tuple[float, float]:
    """Probability the first trajectory is preferred: softmax over raw outputs."""
    return softmax_pair(predict_raw(model, psi_p), predict_raw(model, psi_q))


def distinction_degree(
    model: TrustModel,
    psi,
    demarcs: DemarcationSet | None = None,
    thresholds: tuple[float, float] = DEFAULT_DISTINCTION_THRESHOLDS,
) -> tuple[float, float]:
    """Gap to the nearest demarcation, bucketed into levels {0.0, 0.5, 1.0}.

    Small gaps mean the raw output sits on a trust category boundary value;
    the level scales the gap into three coarse bins.
    """
    demarcs = demarcs or model.demarcations
    raw = predict_raw(model, psi)
    raw_delta = min(abs(raw - d) for d in demarcs.values)
    low, mid = thresholds
    if raw_delta < low:
        level = 0.0
    elif raw_delta < mid:
        level = 0.5
    else:
        level = 1.0
    return raw_delta, level
