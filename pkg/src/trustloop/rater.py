"""Synthetic trust rater: a closed-form ground-truth trust function over
features, handing out level labels and pairwise preferences with optional
noise.  Stands in for a human operator so experiments are reproducible.

Three function families:

  affine     clamp(bias + w . psi)
  radial     clamp(floor + (peak - floor) * exp(-sum(((psi - c) / width)^2)))
  piecewise  clamp(sum of per-dimension linear interpolations (tent curves))

Preferences compare pre-clamp-free continuous trust, so two features that
snap to the same level still have a defined preference ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import rng_for
from .model import DemarcationSet, snap_to_level

FAMILIES = ("affine", "radial", "piecewise")

# Benchmark rater: trust peaks at moderate speed and moderate spacing and
# falls off with heading variance, spreading labels across all five levels
# under uniform sampling of the feasible box.  Per-dimension plateaus are
# quarter-multiples whose sums land exactly on the demarcations, so most of
# the box rates an unambiguous level and only the ramp bands are boundary
# cases.
DEFAULT_TRUST_PARAMS = {
    "knots": [
        [1.0, 4.0, 5.0, 8.0, 9.0, 12.0],
        [2.0, 5.0, 6.0, 13.0, 14.0, 20.0],
        [0.0, 0.25, 0.35, 0.6],
    ],
    "values": [
        [-0.5, -0.5, 0.5, 0.5, 0.0, 0.0],
        [-0.25, -0.25, 0.25, 0.25, -0.25, -0.25],
        [0.25, 0.25, -0.75, -0.75],
    ],
}


@dataclass(frozen=True)
class OracleSpec:
    """Defaults model a human rater: level ratings wobble about a quarter of
    a demarcation gap and one preference in ten comes back reversed."""

    family: str = "piecewise"
    params: dict = field(default_factory=lambda: DEFAULT_TRUST_PARAMS)
    level_noise_std: float = 0.25
    preference_noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown trust function family {self.family!r}, "
                             f"expected one of {FAMILIES}")
        if self.level_noise_std < 0:
            raise ValueError(f"level_noise_std must be >= 0, got {self.level_noise_std}")
        if not 0.0 <= self.preference_noise < 0.5:
            raise ValueError(
                f"preference_noise must be in [0, 0.5), got {self.preference_noise}"
            )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "level_noise_std": self.level_noise_std,
            "preference_noise": self.preference_noise,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OracleSpec":
        data = dict(data)
        if "level_noise_std" in data:
            data["level_noise_std"] = float(data["level_noise_std"])
        if "preference_noise" in data:
            data["preference_noise"] = float(data["preference_noise"])
        if "seed" in data:
            data["seed"] = int(data["seed"])
        return cls(**data)


def _clamp(value: float) -> float:
    return max(-1.0, min(1.0, value))


def true_trust(spec: OracleSpec, psi) -> float:
    """Deterministic ground-truth trust in [-1, 1]."""
    psi = np.asarray(psi, dtype=np.float64)
    if spec.family == "affine":
        weights = np.asarray(spec.params["weights"], dtype=np.float64)
        if weights.shape != psi.shape:
            raise ValueError(f"affine weights shape {weights.shape} != input {psi.shape}")
        return _clamp(float(spec.params.get("bias", 0.0)) + float(weights @ psi))
    if spec.family == "radial":
        center = np.asarray(spec.params["center"], dtype=np.float64)
        width = np.asarray(spec.params["width"], dtype=np.float64)
        peak = float(spec.params.get("peak", 1.0))
        floor = float(spec.params.get("floor", -1.0))
        r2 = float(np.sum(((psi - center) / width) ** 2))
        return _clamp(floor + (peak - floor) * math.exp(-r2))
    knots = spec.params["knots"]
    values = spec.params["values"]
    if len(knots) != psi.size or len(values) != psi.size:
        raise ValueError(
            f"piecewise needs one knot/value list per dimension ({psi.size}), "
            f"got {len(knots)}/{len(values)}"
        )
    total = 0.0
    for x, xk, yk in zip(psi, knots, values):
        total += float(np.interp(x, xk, yk))
    return _clamp(total)


class Oracle:
    """Stateful rater: one seeded noise stream per instance, pure trust."""

    def __init__(self, spec: OracleSpec | None = None):
        self.spec = spec or OracleSpec()
        self._rng = rng_for(self.spec.seed, "oracle")

    def true_trust(self, psi) -> float:
        return true_trust(self.spec, psi)

    def rate_level(self, psi, demarcs: DemarcationSet | None = None) -> float:
        """Noisy snapped level: snap(clamp(true + N(0, level_noise_std)))."""
        demarcs = demarcs or DemarcationSet()
        noisy = self.true_trust(psi) + self._rng.normal(0.0, self.spec.level_noise_std)
        return snap_to_level(_clamp(noisy), demarcs)

    def rate_preference(self, psi_p, psi_q) -> tuple[int, int]:
        """One-hot preference for the higher-trust side; exact ties go to the
        lexicographically smaller feature vector; label flips with
        probability preference_noise."""
        tp = self.true_trust(psi_p)
        tq = self.true_trust(psi_q)
        if tp == tq:
            label = (1, 0) if tuple(np.asarray(psi_p)) <= tuple(np.asarray(psi_q)) else (0, 1)
        else:
            label = (1, 0) if tp > tq else (0, 1)
        if self._rng.uniform() < self.spec.preference_noise:
            label = (label[1], label[0])
        return label
