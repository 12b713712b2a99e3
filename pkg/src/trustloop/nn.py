"""Minimal dense-net substrate.

Fixed family: fully connected layers, tanh or relu hidden activations, a
single tanh output unit so predictions stay inside [-1, 1]. Parameters live
in one flat float64 vector plus a layout describing the per-layer matrices,
which keeps optimizer steps, finite-difference checks, and checkpointing
trivial.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._util import rng_for

Layout = tuple[tuple[str, tuple[int, ...]], ...]

_MAGIC = b"TLOOPNET"
_FORMAT_VERSION = 1

_ACTIVATIONS = {"tanh": _kernels.ACT_TANH, "relu": _kernels.ACT_RELU}


class ShapeMismatchError(ValueError):
    """Input or parameter shapes disagree with the network spec."""


class TrainingError(RuntimeError):
    """Optimizer step or training run hit a non-finite quantity."""


class CheckpointError(ValueError):
    """Checkpoint file is corrupt, wrong version, or self-inconsistent."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description; output layer is fixed to one tanh unit.

    relu hidden units are the default: the trust surfaces this models are
    plateau-and-ramp shaped, which piecewise-linear nets fit cleanly.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (32, 32)
    hidden_activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be positive, got {self.hidden_dims}")
        if self.hidden_activation not in _ACTIVATIONS:
            raise ValueError(
                f"hidden_activation must be one of {sorted(_ACTIVATIONS)}, "
                f"got {self.hidden_activation!r}"
            )

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, 1)

    def layout(self) -> Layout:
        dims = self.layer_dims
        entries = []
        for i in range(len(dims) - 1):
            entries.append((f"w{i}", (dims[i + 1], dims[i])))
            entries.append((f"b{i}", (dims[i + 1],)))
        return tuple(entries)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "hidden_activation": self.hidden_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(int(h) for h in d["hidden_dims"]),
            hidden_activation=str(d["hidden_activation"]),
        )


@dataclass
class ParamVector:
    """Flat parameter vector plus the layout mapping it to layer tensors."""

    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.layout = tuple((name, tuple(shape)) for name, shape in self.layout)
        expected = sum(int(np.prod(shape)) for _, shape in self.layout)
        if self.values.ndim != 1 or self.values.size != expected:
            raise ShapeMismatchError(
                f"layout expects {expected} parameters, vector has {self.values.size}"
            )

    @property
    def size(self) -> int:
        return int(self.values.size)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout)

    def unpack(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per-layer (weights, biases) views into the flat vector."""
        ws, bs = [], []
        offset = 0
        for name, shape in self.layout:
            count = int(np.prod(shape))
            block = self.values[offset : offset + count].reshape(shape)
            if name.startswith("w"):
                ws.append(block)
            else:
                bs.append(block)
            offset += count
        return ws, bs


@dataclass(frozen=True)
class TrainConfig:
    """Learning rates for the two training stages plus loop bookkeeping.

    The effective rate decays linearly from the stage rate to
    ``lr_floor`` times it at the last epoch; constant-rate SGD stalls at a
    minibatch-noise floor that the decay walks under.
    """

    learning_rate_a: float = 0.02
    learning_rate_b: float = 0.01
    epochs: int = 400
    batch_size: int = 8
    lr_floor: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate_a <= 0 or self.learning_rate_b <= 0:
            raise ValueError("learning rates must be strictly positive")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.lr_floor <= 1.0:
            raise ValueError(f"lr_floor must be in (0, 1], got {self.lr_floor}")

    def rate_at(self, base_rate: float, epoch: int) -> float:
        if self.epochs == 1:
            return base_rate
        frac = epoch / (self.epochs - 1)
        return base_rate * (1.0 - (1.0 - self.lr_floor) * frac)

    def to_dict(self) -> dict:
        return {
            "learning_rate_a": self.learning_rate_a,
            "learning_rate_b": self.learning_rate_b,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr_floor": self.lr_floor,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(
            learning_rate_a=float(d.get("learning_rate_a", 0.02)),
            learning_rate_b=float(d.get("learning_rate_b", 0.01)),
            epochs=int(d.get("epochs", 400)),
            batch_size=int(d.get("batch_size", 8)),
            lr_floor=float(d.get("lr_floor", 0.05)),
            seed=int(d.get("seed", 0)),
        )


def zeros_params(spec: NetworkSpec) -> ParamVector:
    layout = spec.layout()
    total = sum(int(np.prod(shape)) for _, shape in layout)
    return ParamVector(np.zeros(total), layout)


def init_params(spec: NetworkSpec, seed: int) -> ParamVector:
    """Seeded uniform init with per-layer scale sqrt(6 / (fan_in + fan_out))."""
    rng = rng_for(seed, "init")
    blocks = []
    dims = spec.layer_dims
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        s = np.sqrt(6.0 / (fan_in + fan_out))
        blocks.append(rng.uniform(-s, s, size=fan_out * fan_in))
        blocks.append(np.zeros(fan_out))
    return ParamVector(np.concatenate(blocks), spec.layout())


def _check_compat(params: ParamVector, spec: NetworkSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.input_dim,):
        raise ShapeMismatchError(
            f"input has shape {x.shape}, spec expects ({spec.input_dim},)"
        )
    if params.layout != spec.layout():
        raise ShapeMismatchError(
            f"parameter layout {params.layout} does not match spec layout {spec.layout()}"
        )
    return x


def forward(params: ParamVector, spec: NetworkSpec, x: np.ndarray) -> float:
    """Scalar net output in (-1, 1)."""
    x = _check_compat(params, spec, x)
    ws, bs = params.unpack()
    return _kernels.forward_value(ws, bs, x, _ACTIVATIONS[spec.hidden_activation])


def backward(
    params: ParamVector, spec: NetworkSpec, x: np.ndarray, upstream: float = 1.0
) -> tuple[ParamVector, np.ndarray]:
    """Gradients of (upstream * output) wrt parameters and wrt the input."""
    x = _check_compat(params, spec, x)
    ws, bs = params.unpack()
    _, dws, dbs, dx = _kernels.forward_backward(
        ws, bs, x, _ACTIVATIONS[spec.hidden_activation], float(upstream)
    )
    flat = np.empty(params.size)
    offset = 0
    for i in range(len(dws)):
        n = dws[i].size
        flat[offset : offset + n] = dws[i].ravel()
        offset += n
        n = dbs[i].size
        flat[offset : offset + n] = dbs[i]
        offset += n
    return ParamVector(flat, params.layout), np.asarray(dx)


def _first_nonfinite_layer(values: np.ndarray, layout: Layout) -> str:
    offset = 0
    for name, shape in layout:
        count = int(np.prod(shape))
        if not np.all(np.isfinite(values[offset : offset + count])):
            return name
        offset += count
    return "<unknown>"


def sgd_step(params: ParamVector, gradient: ParamVector, learning_rate: float) -> ParamVector:
    """One plain gradient step: params - learning_rate * gradient."""
    if gradient.layout != params.layout:
        raise ShapeMismatchError("gradient layout does not match parameter layout")
    if not np.all(np.isfinite(gradient.values)):
        layer = _first_nonfinite_layer(gradient.values, gradient.layout)
        raise TrainingError(f"non-finite gradient in layer {layer}")
    return ParamVector(params.values - learning_rate * gradient.values, params.layout)


def save_params(
    path,
    params: ParamVector,
    spec: NetworkSpec,
    demarcations: tuple[float, ...] | None = None,
    input_scale: dict | None = None,
) -> None:
    """Write a checkpoint: magic, version, JSON header, float64-LE payload."""
    header = {
        "spec": spec.to_dict(),
        "layout": [[name, list(shape)] for name, shape in params.layout],
        "count": params.size,
        "demarcations": list(demarcations) if demarcations is not None else None,
        "input_scale": input_scale,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _FORMAT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(params.values.astype("<f8").tobytes())


def load_params(path) -> tuple[ParamVector, NetworkSpec, dict]:
    """Read a checkpoint; returns (params, spec, header)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_MAGIC) + 8 or raw[: len(_MAGIC)] != _MAGIC:
        raise CheckpointError(f"{path}: not a trustloop checkpoint (bad magic)")
    pos = len(_MAGIC)
    (version,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if version != _FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version}, expected {_FORMAT_VERSION}"
        )
    (hlen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if len(raw) < pos + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(raw[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    pos += hlen
    payload = raw[pos:]
    count = int(header["count"])
    if len(payload) != count * 8:
        raise CheckpointError(
            f"{path}: payload holds {len(payload) // 8} parameters, header says {count}"
        )
    spec = NetworkSpec.from_dict(header["spec"])
    layout = tuple((name, tuple(shape)) for name, shape in header["layout"])
    if layout != spec.layout():
        raise CheckpointError(f"{path}: layout table disagrees with the stored spec")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ParamVector(values, layout), spec, header
