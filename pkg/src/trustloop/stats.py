"""Two-sample statistics over feature distributions.

The 2-D test follows Fasano and Franceschini: around every observed point,
compare the fraction of each sample in the four open quadrants, take the
worst disagreement, and average the statistic obtained conditioning on each
sample's points in turn.  The p-value uses the asymptotic Kolmogorov
distribution with the usual effective-n and correlation adjustment; it is an
approximation, good to a few percent for n >= 20.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import kstwobign

from ._kernels import ks2d_stat
from ._util import rng_for
from .model import (
    DEFAULT_DISTINCTION_THRESHOLDS,
    TrustModel,
    distinction_degree,
)

AXIS_PAIRS = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


@dataclass(frozen=True)
class Ks2dResult:
    d_statistic: float
    p_value: float
    sample_sizes: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "d_statistic": self.d_statistic,
            "p_value": self.p_value,
            "sample_sizes": list(self.sample_sizes),
        }


def _as_2d(sample, name: str) -> np.ndarray:
    arr = np.asarray(sample, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < 10:
        raise ValueError(f"{name} needs at least 10 points, got {arr.shape[0]}")
    return arr


def _safe_pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def ks2d(sample1, sample2) -> Ks2dResult:
    """Two-sample 2-D Kolmogorov-Smirnov test (quadrant statistic)."""
    a = _as_2d(sample1, "sample1")
    b = _as_2d(sample2, "sample2")
    d = float(ks2d_stat(a, b))
    n1, n2 = a.shape[0], b.shape[0]
    sqen = np.sqrt(n1 * n2 / (n1 + n2))
    r1 = _safe_pearson(a[:, 0], a[:, 1])
    r2 = _safe_pearson(b[:, 0], b[:, 1])
    r = np.sqrt(max(0.0, 1.0 - 0.5 * (r1 * r1 + r2 * r2)))
    adjusted = d * sqen / (1.0 + r * (0.25 - 0.75 / sqen))
    p = float(kstwobign.sf(adjusted))
    return Ks2dResult(d, min(1.0, max(0.0, p)), (n1, n2))


def pairwise_axis_tests(
    features,
    reference="uniform_box",
    box=None,
    seed: int = 0,
    n_reference: int | None = None,
) -> dict[str, Ks2dResult]:
    """ks2d on each coordinate-pair projection (xy, xz, yz) of 3-d features
    against either a fresh uniform draw from the box or a second sample."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != 3:
        raise ValueError(f"features must have shape (n, 3), got {features.shape}")
    if isinstance(reference, str):
        if reference != "uniform_box":
            raise ValueError(f"unknown reference {reference!r}")
        from .queries import FeasibleBox

        box = box or FeasibleBox.default()
        rng = rng_for(seed, "ks-reference")
        count = n_reference if n_reference is not None else features.shape[0]
        ref = np.array([box.sample(rng) for _ in range(count)])
    else:
        ref = np.asarray(reference, dtype=np.float64)
        if ref.ndim != 2 or ref.shape[1] != 3:
            raise ValueError(f"reference must have shape (n, 3), got {ref.shape}")
    return {
        name: ks2d(features[:, list(cols)], ref[:, list(cols)])
        for name, cols in AXIS_PAIRS.items()
    }


def distinction_deltas(model: TrustModel, features) -> np.ndarray:
    """Per-feature min distance of the model output to any demarcation."""
    return np.array([distinction_degree(model, psi)[0] for psi in features])


def distinction_histogram(
    model: TrustModel,
    features,
    thresholds: tuple[float, float] = DEFAULT_DISTINCTION_THRESHOLDS,
) -> dict[float, int]:
    """Counts of distinction levels {1.0, 0.5, 0.0} over a feature batch."""
    features = list(features)
    if not features:
        raise ValueError("need at least one feature vector")
    counts = {1.0: 0, 0.5: 0, 0.0: 0}
    for psi in features:
        _, level = distinction_degree(model, psi, thresholds=thresholds)
        counts[level] += 1
    return counts
