"""Active query synthesis over the feasible feature box.

A query is a feature vector the current model is least sure how to label
(its output sits far from every demarcation, or near a decision midpoint)
and that differs most from the data already owned (low cosine similarity to
the pool).  Candidates are optimized by multi-start projected descent in
box-normalized [-1, 1] coordinates using the network's analytic input
gradient, with backtracking line search so the objective never increases
along the iterate sequence.  Accepted queries join the pool, so later
queries in a batch diversify against earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import rng_for
from .model import TrustModel, input_gradient, predict_raw
from .sim import FEATURE_LOWER, FEATURE_UPPER

CONFIDENCE_MODES = ("nearest_demarcation", "midpoint")


@dataclass(frozen=True)
class FeasibleBox:
    """Axis-aligned bounds on realizable feature vectors."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError(
                f"bounds must be 1-d and aligned, got {self.lower.shape} vs {self.upper.shape}"
            )
        if not np.all(np.isfinite(self.lower)) or not np.all(np.isfinite(self.upper)):
            raise ValueError("box bounds must be finite")
        if not np.all(self.lower < self.upper):
            raise ValueError(
                f"lower must be < upper per dimension, got {self.lower} vs {self.upper}"
            )

    @classmethod
    def default(cls) -> "FeasibleBox":
        return cls(FEATURE_LOWER.copy(), FEATURE_UPPER.copy())

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def half_range(self) -> np.ndarray:
        return (self.upper - self.lower) / 2.0

    def contains(self, psi, tol: float = 1e-9) -> bool:
        psi = np.asarray(psi, dtype=np.float64)
        return bool(np.all(psi >= self.lower - tol) and np.all(psi <= self.upper + tol))

    def project(self, psi) -> np.ndarray:
        return np.clip(np.asarray(psi, dtype=np.float64), self.lower, self.upper)

    def normalize(self, psi) -> np.ndarray:
        return (np.asarray(psi, dtype=np.float64) - self.lower) / self.half_range - 1.0

    def denormalize(self, z) -> np.ndarray:
        return self.lower + (np.asarray(z, dtype=np.float64) + 1.0) * self.half_range

    def sample(self, rng) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FeasibleBox":
        return cls(np.asarray(data["lower"]), np.asarray(data["upper"]))


class TrainingPool:
    """Feature vectors already labeled or queued for labeling."""

    def __init__(self, features=None):
        self.features: list[np.ndarray] = []
        for psi in features if features is not None else []:
            self.add(psi)

    @classmethod
    def from_dataset(cls, dataset) -> "TrainingPool":
        return cls(record.features for record in dataset)

    def add(self, psi) -> None:
        psi = np.asarray(psi, dtype=np.float64)
        if self.features and psi.shape != self.features[0].shape:
            raise ValueError(
                f"feature shape {psi.shape} does not match pool {self.features[0].shape}"
            )
        self.features.append(psi)

    def __len__(self):
        return len(self.features)

    def matrix(self) -> np.ndarray:
        if not self.features:
            raise ValueError("pool is empty")
        return np.array(self.features)


@dataclass(frozen=True)
class QueryConfig:
    diversity_weight: float = 0.7
    restarts: int = 32
    steps: int = 200
    step_size: float = 0.1
    confidence_mode: str = "nearest_demarcation"
    normalize: bool = True  # map features to [-1,1] per dim before cosine
    seed: int = 0

    def __post_init__(self):
        if self.diversity_weight < 0:
            raise ValueError(f"diversity_weight must be >= 0, got {self.diversity_weight}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.confidence_mode not in CONFIDENCE_MODES:
            raise ValueError(
                f"confidence_mode must be one of {CONFIDENCE_MODES}, got {self.confidence_mode!r}"
            )

    def to_dict(self) -> dict:
        return {
            "diversity_weight": self.diversity_weight,
            "restarts": self.restarts,
            "steps": self.steps,
            "step_size": self.step_size,
            "confidence_mode": self.confidence_mode,
            "normalize": self.normalize,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QueryConfig":
        return cls(**data)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors; zero-norm inputs score 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(a @ b / (na * nb))


def pool_similarity(psi, pool: TrainingPool) -> float:
    """Maximum cosine similarity between psi and any pool member."""
    if len(pool) == 0:
        raise ValueError("pool similarity needs a non-empty pool")
    return max(cosine_similarity(psi, member) for member in pool.features)


def _confidence_targets(model: TrustModel, mode: str) -> np.ndarray:
    demarcs = np.asarray(model.demarcations.values)
    if mode == "midpoint":
        return (demarcs[:-1] + demarcs[1:]) / 2.0
    return demarcs


def _pool_units(pool_rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(pool_rows, axis=1, keepdims=True)
    return np.where(norms > 1e-12, pool_rows / np.maximum(norms, 1e-300), 0.0)


def _similarity_and_grad(cand: np.ndarray, units: np.ndarray):
    norm = float(np.linalg.norm(cand))
    if len(units) == 0 or norm < 1e-12:
        return 0.0, np.zeros_like(cand)
    unit_c = cand / norm
    sims = units @ unit_c
    k = int(np.argmax(sims))
    sim = float(sims[k])
    grad = (units[k] - sim * unit_c) / norm
    return sim, grad


def query_objective(
    model: TrustModel,
    psi,
    pool: TrainingPool,
    config: QueryConfig,
    box: FeasibleBox | None = None,
) -> float:
    """Distance of the model output to the nearest confidence target plus
    the weighted maximum cosine similarity to the pool."""
    box = box or FeasibleBox.default()
    psi = np.asarray(psi, dtype=np.float64)
    if not box.contains(psi):
        raise ValueError(f"query {psi.tolist()} lies outside the feasible box")
    raw = predict_raw(model, psi)
    targets = _confidence_targets(model, config.confidence_mode)
    value = float(np.min(np.abs(raw - targets)))
    if config.diversity_weight > 0 and len(pool) > 0:
        cand = box.normalize(psi) if config.normalize else psi
        rows = pool.matrix()
        units = _pool_units(box.normalize(rows) if config.normalize else rows)
        sim, _ = _similarity_and_grad(cand, units)
        value += config.diversity_weight * sim
    return value


def _objective_value(model, z, units, targets, box, config) -> float:
    psi = box.denormalize(z)
    raw = predict_raw(model, psi)
    value = float(np.min(np.abs(raw - targets)))
    cand = z if config.normalize else psi
    sim, _ = _similarity_and_grad(cand, units)
    return value + config.diversity_weight * sim


def _objective_and_grad(model, z, units, targets, box, config):
    psi = box.denormalize(z)
    raw, dpsi = input_gradient(model, psi)
    gaps = raw - targets
    k = int(np.argmin(np.abs(gaps)))
    value = abs(float(gaps[k]))
    # subgradient of |raw - d| is 0 exactly at the kink
    sign = 0.0 if gaps[k] == 0 else (1.0 if gaps[k] > 0 else -1.0)
    grad_z = sign * dpsi * box.half_range
    cand = z if config.normalize else psi
    sim, dsim = _similarity_and_grad(cand, units)
    value += config.diversity_weight * sim
    if config.normalize:
        grad_z = grad_z + config.diversity_weight * dsim
    else:
        grad_z = grad_z + config.diversity_weight * dsim * box.half_range
    return value, grad_z


def _descend(model, z0, units, targets, box, config):
    """Projected descent with backtracking; returns (objective, z) or None
    when the objective goes non-finite."""
    z = np.clip(z0, -1.0, 1.0)
    value, grad = _objective_and_grad(model, z, units, targets, box, config)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return None
    for _ in range(config.steps):
        step = config.step_size
        accepted = False
        for _ in range(20):
            candidate = np.clip(z - step * grad, -1.0, 1.0)
            cand_value = _objective_value(model, candidate, units, targets, box, config)
            if not np.isfinite(cand_value):
                return None
            if cand_value <= value + 1e-12:
                accepted = True
                break
            step *= 0.5
        if not accepted or np.allclose(candidate, z, atol=1e-12):
            break
        z, value = candidate, cand_value
        _, grad = _objective_and_grad(model, z, units, targets, box, config)
        if not np.all(np.isfinite(grad)):
            return None
    return value, z


def synthesize_queries(
    model: TrustModel,
    pool: TrainingPool,
    box: FeasibleBox | None = None,
    config: QueryConfig | None = None,
    count: int = 1,
) -> list[np.ndarray]:
    """Generate ``count`` feasible queries sequentially, each the best of
    ``config.restarts`` descent runs, each joining the pool before the next
    is synthesized."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    box = box or FeasibleBox.default()
    config = config or QueryConfig()
    rng = rng_for(config.seed, "synthesize")
    targets = _confidence_targets(model, config.confidence_mode)
    working = TrainingPool(pool.features)
    results = []
    for _ in range(count):
        if len(working) > 0:
            rows = working.matrix()
            units = _pool_units(box.normalize(rows) if config.normalize else rows)
        else:
            units = np.zeros((0, box.dim))
        best = None
        for _ in range(config.restarts):
            z0 = rng.uniform(-1.0, 1.0, size=box.dim)
            outcome = _descend(model, z0, units, targets, box, config)
            if outcome is None:
                continue
            if best is None or outcome[0] < best[0]:
                best = outcome
        if best is None:
            raise RuntimeError(
                "query synthesis failed: every restart hit a non-finite objective"
            )
        psi = box.denormalize(best[1])
        working.add(psi)
        results.append(psi)
    return results


def sample_random_queries(
    box: FeasibleBox | None = None, count: int = 1, seed: int = 0
) -> list[np.ndarray]:
    """Uniform feasible samples, the baseline active synthesis is judged
    against."""
    box = box or FeasibleBox.default()
    rng = rng_for(seed, "random-queries")
    return [box.sample(rng) for _ in range(count)]
