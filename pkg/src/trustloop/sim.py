"""Kinematic multi-UAV formation simulator with feature extraction.

A virtual leader flies waypoint legs from a start position through one or
two randomly drawn targets at the commanded speed.  Robots hold fixed
line-abreast world-frame offsets around the leader, scaled by the commanded
spacing; each step they head for their slot with an optional yaw
perturbation, moving at most ``catchup`` times the commanded step length
(1 by default, a hard speed limit, which keeps measured speed pinned to the
command even when noise makes robots trail their slots).  With zero noise
the team tracks its slots exactly and per-step displacement equals speed*dt
during cruise.

Extracted features (the model inputs):

  avg_speed          mean step-displacement magnitude / dt over robots
  formation_spacing  time-mean of the mean adjacent-pair distance
  heading_variance   1 - mean resultant length of per-step yaw increments,
                     pooled over robots (circular variance; 0 when straight)
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import fmt_float, rng_for


class SimulationError(RuntimeError):
    """Flight could not be completed within the step cap."""


class CalibrationError(ValueError):
    """Requested feature lies outside the calibrated response range."""


class TrajectoryFormatError(ValueError):
    """Malformed trajectory file; message carries line and byte offset."""


# Realizable feature ranges (avg_speed m/s, formation_spacing m, heading
# variance): the box active synthesis searches and the oracle is tuned for.
FEATURE_LOWER = np.array([1.0, 2.0, 0.0])
FEATURE_UPPER = np.array([12.0, 20.0, 0.6])

# Control sampling ranges for random task generation.
CONTROL_LOWER = np.array([1.0, 2.0, 0.0])
CONTROL_UPPER = np.array([12.0, 20.0, 1.0])


@dataclass(frozen=True)
class ControlParams:
    """Commanded knobs: cruise speed, slot spacing, per-step yaw noise."""

    commanded_speed: float = 6.0
    formation_spacing: float = 8.0
    heading_noise_std: float = 0.0

    def __post_init__(self):
        if not (self.commanded_speed > 0 and math.isfinite(self.commanded_speed)):
            raise ValueError(f"commanded_speed must be > 0, got {self.commanded_speed}")
        if not (self.formation_spacing > 0 and math.isfinite(self.formation_spacing)):
            raise ValueError(f"formation_spacing must be > 0, got {self.formation_spacing}")
        if not (self.heading_noise_std >= 0 and math.isfinite(self.heading_noise_std)):
            raise ValueError(f"heading_noise_std must be >= 0, got {self.heading_noise_std}")

    def to_dict(self) -> dict:
        return {
            "commanded_speed": self.commanded_speed,
            "formation_spacing": self.formation_spacing,
            "heading_noise_std": self.heading_noise_std,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ControlParams":
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario bounds: team size, timing, target box, and step cap."""

    team_size: int = 6
    dt: float = 0.1
    n_targets: int | None = None  # None: 1 or 2 with equal probability
    start: tuple[float, float, float] = (0.0, 0.0, 10.0)
    xy_halfwidth: float = 100.0
    z_range: tuple[float, float] = (2.0, 32.0)
    min_leg: float = 20.0
    max_steps: int = 60000
    catchup: float = 1.0

    def __post_init__(self):
        if self.team_size < 2:
            raise ValueError(f"team_size must be >= 2, got {self.team_size}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_targets is not None and self.n_targets not in (1, 2):
            raise ValueError(f"n_targets must be 1 or 2, got {self.n_targets}")
        if self.catchup < 1.0:
            raise ValueError(f"catchup must be >= 1, got {self.catchup}")

    def to_dict(self) -> dict:
        return {
            "team_size": self.team_size,
            "dt": self.dt,
            "n_targets": self.n_targets,
            "start": list(self.start),
            "xy_halfwidth": self.xy_halfwidth,
            "z_range": list(self.z_range),
            "min_leg": self.min_leg,
            "max_steps": self.max_steps,
            "catchup": self.catchup,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        if "start" in data:
            data["start"] = tuple(float(v) for v in data["start"])
        if "z_range" in data:
            data["z_range"] = tuple(float(v) for v in data["z_range"])
        if data.get("n_targets") is not None:
            data["n_targets"] = int(data["n_targets"])
        return cls(**data)


@dataclass
class RobotState:
    position: np.ndarray  # meters
    velocity: np.ndarray  # m/s
    orientation: np.ndarray  # yaw, pitch, roll in radians; yaw in (-pi, pi]


@dataclass
class Trajectory:
    """Time-ordered per-robot states plus the scenario that produced them.

    Arrays are indexed [step, robot, component]; ``steps`` materializes the
    per-step RobotState tuples on demand.
    """

    trajectory_id: str
    team_size: int
    dt: float
    targets: np.ndarray  # (k, 3)
    positions: np.ndarray  # (T, n, 3)
    velocities: np.ndarray  # (T, n, 3)
    orientations: np.ndarray  # (T, n, 3)

    def __post_init__(self):
        if self.positions.shape[0] < 2:
            raise ValueError("trajectory needs at least 2 steps")
        if not (
            self.positions.shape
            == self.velocities.shape
            == self.orientations.shape
            == (self.positions.shape[0], self.team_size, 3)
        ):
            raise ValueError(
                f"state arrays must share shape (T, {self.team_size}, 3), got "
                f"{self.positions.shape}/{self.velocities.shape}/{self.orientations.shape}"
            )
        if self.targets.ndim != 2 or self.targets.shape[1] != 3 or not 1 <= len(self.targets) <= 2:
            raise ValueError(f"expected 1 or 2 targets of dim 3, got shape {self.targets.shape}")

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0]

    @property
    def steps(self) -> list[tuple[RobotState, ...]]:
        return [
            tuple(
                RobotState(self.positions[t, i], self.velocities[t, i], self.orientations[t, i])
                for i in range(self.team_size)
            )
            for t in range(self.n_steps)
        ]

    def to_dict(self) -> dict:
        """JSON-friendly playback payload (targets, dt, full state arrays)."""
        return {
            "trajectory_id": self.trajectory_id,
            "team_size": self.team_size,
            "dt": self.dt,
            "n_steps": self.n_steps,
            "targets": self.targets.tolist(),
            "positions": self.positions.tolist(),
            "velocities": self.velocities.tolist(),
            "orientations": self.orientations.tolist(),
        }


def _wrap_yaw(yaw: np.ndarray) -> np.ndarray:
    wrapped = np.mod(yaw + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + np.pi * 2.0, wrapped)


def _draw_targets(rng, scenario: ScenarioConfig) -> np.ndarray:
    count = scenario.n_targets or int(rng.integers(1, 3))
    targets = []
    anchor = np.asarray(scenario.start, dtype=np.float64)
    for i in range(count):
        for _ in range(1000):
            candidate = np.array(
                [
                    rng.uniform(-scenario.xy_halfwidth, scenario.xy_halfwidth),
                    rng.uniform(-scenario.xy_halfwidth, scenario.xy_halfwidth),
                    rng.uniform(scenario.z_range[0], scenario.z_range[1]),
                ]
            )
            if np.linalg.norm(candidate - anchor) >= scenario.min_leg:
                targets.append(candidate)
                anchor = candidate
                break
        else:
            raise SimulationError(f"could not place target {i} at least "
                                  f"{scenario.min_leg} m from the previous waypoint")
    return np.array(targets)


def _line_abreast_offsets(first_leg: np.ndarray, spacing: float, n: int) -> np.ndarray:
    horiz = first_leg.copy()
    horiz[2] = 0.0
    norm = np.linalg.norm(horiz)
    if norm < 1e-9:
        perp = np.array([1.0, 0.0, 0.0])
    else:
        perp = np.array([-horiz[1], horiz[0], 0.0]) / norm
    ranks = np.arange(n) - (n - 1) / 2.0
    return ranks[:, None] * spacing * perp[None, :]


def simulate(
    params: ControlParams,
    scenario: ScenarioConfig | None = None,
    seed: int = 0,
    trajectory_id: str | None = None,
) -> Trajectory:
    """Fly the commanded task; (params, seed, scenario) fully determine it."""
    scenario = scenario or ScenarioConfig()
    rng = rng_for(seed, "sim")
    n = scenario.team_size
    dt = scenario.dt
    start = np.asarray(scenario.start, dtype=np.float64)
    targets = _draw_targets(rng, scenario)
    offsets = _line_abreast_offsets(targets[0] - start, params.formation_spacing, n)

    step_len = params.commanded_speed * dt
    budget = scenario.catchup * step_len
    leader = start.copy()

    first_leg = targets[0] - start
    yaw0 = math.atan2(first_leg[1], first_leg[0]) if np.linalg.norm(first_leg[:2]) > 1e-9 else 0.0
    pitch0 = math.atan2(first_leg[2], np.linalg.norm(first_leg[:2]))

    positions = [start[None, :] + offsets]
    velocities = [np.zeros((n, 3))]
    orientations = [np.tile([yaw0, pitch0, 0.0], (n, 1))]

    target_idx = 0
    while target_idx < len(targets):
        if len(positions) - 1 >= scenario.max_steps:
            tx, ty, tz = targets[target_idx]
            raise SimulationError(
                f"target {target_idx} at ({tx:.1f}, {ty:.1f}, {tz:.1f}) "
                f"unreachable within {scenario.max_steps} steps"
            )
        to_target = targets[target_idx] - leader
        dist = np.linalg.norm(to_target)
        if dist <= step_len:
            leader = targets[target_idx].copy()
            target_idx += 1
        else:
            leader = leader + to_target * (step_len / dist)

        prev = positions[-1]
        slots = leader[None, :] + offsets
        v = slots - prev
        # one shared gust per step: a per-robot draw would let neighbor lags
        # random-walk apart and wreck the commanded spacing at high noise
        eps = rng.normal(0.0, params.heading_noise_std)
        cos_e, sin_e = math.cos(eps), math.sin(eps)
        rotated = np.empty_like(v)
        rotated[:, 0] = cos_e * v[:, 0] - sin_e * v[:, 1]
        rotated[:, 1] = sin_e * v[:, 0] + cos_e * v[:, 1]
        rotated[:, 2] = v[:, 2]
        norms = np.linalg.norm(rotated, axis=1)
        move = np.minimum(budget, norms)
        scale = np.where(norms > 1e-12, move / np.maximum(norms, 1e-300), 0.0)
        nxt = prev + rotated * scale[:, None]

        disp = nxt - prev
        horiz = np.linalg.norm(disp[:, :2], axis=1)
        prev_ori = orientations[-1]
        yaw = np.where(horiz > 1e-9, np.arctan2(disp[:, 1], disp[:, 0]), prev_ori[:, 0])
        total = np.linalg.norm(disp, axis=1)
        pitch = np.where(total > 1e-12, np.arctan2(disp[:, 2], horiz), prev_ori[:, 1])

        positions.append(nxt)
        velocities.append(disp / dt)
        orientations.append(np.column_stack([_wrap_yaw(yaw), pitch, np.zeros(n)]))

    return Trajectory(
        trajectory_id=trajectory_id or f"traj-{seed}",
        team_size=n,
        dt=dt,
        targets=targets,
        positions=np.array(positions),
        velocities=np.array(velocities),
        orientations=np.array(orientations),
    )


def extract_features(traj: Trajectory) -> np.ndarray:
    """(avg_speed, formation_spacing, heading_variance) from the state arrays."""
    if traj.n_steps < 2:
        raise ValueError(f"need at least 2 steps to extract features, got {traj.n_steps}")
    # velocities[0] is the at-rest initial state, not a flown step
    speeds = np.linalg.norm(traj.velocities[1:], axis=2)
    avg_speed = float(speeds.mean())

    adjacent = traj.positions[:, 1:, :] - traj.positions[:, :-1, :]
    spacing = float(np.linalg.norm(adjacent, axis=2).mean())

    yaw = traj.orientations[:, :, 0]
    increments = yaw[1:] - yaw[:-1]  # cos/sin make wrapping irrelevant
    resultant = math.hypot(float(np.cos(increments).mean()), float(np.sin(increments).mean()))
    heading_variance = min(1.0, max(0.0, 1.0 - resultant))

    return np.array([avg_speed, spacing, heading_variance])


def formation_error(traj: Trajectory) -> float:
    """Time-mean absolute deviation of all pairwise distances from the
    commanded pattern (the distances at the initial in-formation state)."""
    iu = np.triu_indices(traj.team_size, k=1)
    diffs = traj.positions[:, :, None, :] - traj.positions[:, None, :, :]
    dists = np.linalg.norm(diffs, axis=3)[:, iu[0], iu[1]]
    return float(np.abs(dists - dists[0]).mean())


@dataclass(frozen=True)
class HeadingCalibration:
    """Monotone response curve from commanded yaw-noise std to extracted
    heading variance, measured on seeded sweeps and inverted by
    interpolation."""

    noise_levels: tuple[float, ...]
    variances: tuple[float, ...]  # non-decreasing, same length

    def __post_init__(self):
        if len(self.noise_levels) != len(self.variances) or len(self.noise_levels) < 2:
            raise ValueError("calibration needs >= 2 aligned sweep points")
        if any(b < a for a, b in zip(self.variances, self.variances[1:])):
            raise ValueError("calibrated variances must be non-decreasing")

    @property
    def max_variance(self) -> float:
        return self.variances[-1]

    def variance_for(self, noise_std: float) -> float:
        return float(np.interp(noise_std, self.noise_levels, self.variances))

    def noise_for(self, variance: float) -> float:
        if variance < 0:
            raise CalibrationError(f"heading variance must be >= 0, got {variance}")
        if variance <= self.variances[0]:
            return self.noise_levels[0]
        if variance > self.max_variance + 1e-9:
            raise CalibrationError(
                f"heading variance {variance:.4f} above calibrated maximum "
                f"{self.max_variance:.4f}"
            )
        # invert on the strictly increasing envelope
        xs, ys = [self.variances[0]], [self.noise_levels[0]]
        for s, v in zip(self.noise_levels[1:], self.variances[1:]):
            if v > xs[-1]:
                xs.append(v)
                ys.append(s)
        return float(np.interp(min(variance, xs[-1]), xs, ys))

    @classmethod
    def from_sweep(
        cls,
        noise_levels=None,
        seeds=(0, 1, 2),
        speed: float = 6.0,
        spacing: float = 8.0,
        scenario: ScenarioConfig | None = None,
    ) -> "HeadingCalibration":
        if noise_levels is None:
            noise_levels = np.linspace(0.0, 1.2, 13)
        noise_levels = tuple(float(s) for s in noise_levels)
        scenario = scenario or ScenarioConfig(n_targets=2)
        measured = []
        for sigma in noise_levels:
            params = ControlParams(speed, spacing, sigma)
            values = [
                extract_features(simulate(params, scenario, seed=seed))[2] for seed in seeds
            ]
            measured.append(float(np.mean(values)))
        envelope = np.maximum.accumulate(measured)
        return cls(noise_levels, tuple(float(v) for v in envelope))


@functools.lru_cache(maxsize=1)
def default_calibration() -> HeadingCalibration:
    return HeadingCalibration.from_sweep()


def params_for_features(
    features,
    bounds: tuple[np.ndarray, np.ndarray] | None = None,
    calibration: HeadingCalibration | None = None,
) -> ControlParams:
    """Invert feature targets to control knobs: identity on speed and
    spacing, calibrated curve inversion for heading variance."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (3,):
        raise ValueError(f"expected 3 features, got shape {features.shape}")
    lower, upper = bounds if bounds is not None else (FEATURE_LOWER, FEATURE_UPPER)
    if np.any(features < np.asarray(lower) - 1e-9) or np.any(features > np.asarray(upper) + 1e-9):
        raise CalibrationError(
            f"features {features.tolist()} outside the feasible box "
            f"[{np.asarray(lower).tolist()}, {np.asarray(upper).tolist()}]"
        )
    calibration = calibration or default_calibration()
    return ControlParams(
        commanded_speed=float(features[0]),
        formation_spacing=float(features[1]),
        heading_noise_std=calibration.noise_for(float(features[2])),
    )


def save_trajectory(path, traj: Trajectory) -> None:
    """Write the line-delimited text encoding; round-trips bit-exactly."""
    lines = [
        "# trustloop-trajectory v1",
        f"id {traj.trajectory_id}",
        f"team_size {traj.team_size}",
        f"dt {fmt_float(traj.dt)}",
        f"targets {len(traj.targets)}",
    ]
    for target in traj.targets:
        lines.append("target " + " ".join(fmt_float(v) for v in target))
    lines.append(f"steps {traj.n_steps}")
    for t in range(traj.n_steps):
        row = np.column_stack(
            [traj.positions[t], traj.velocities[t], traj.orientations[t]]
        ).ravel()
        lines.append("step " + " ".join(fmt_float(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    """Sequential line access that tracks byte offsets for error messages."""

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            self.raw = fh.read()
        self.lines = self.raw.decode("utf-8").splitlines()
        self.lineno = 0
        self.offset = 0

    def fail(self, message: str):
        raise TrajectoryFormatError(
            f"{self.path}:{self.lineno} (byte {self.offset}): {message}"
        )

    def next_line(self, what: str) -> str:
        if self.lineno >= len(self.lines):
            self.offset = len(self.raw)
            self.fail(f"file truncated, expected {what}")
        line = self.lines[self.lineno]
        self.lineno += 1
        self.offset += len(line.encode("utf-8")) + 1
        return line

    def next_field(self, name: str) -> list[str]:
        line = self.next_line(f"'{name}' line")
        parts = line.split()
        if not parts or parts[0] != name:
            self.fail(f"expected '{name}' line, found {line!r}")
        return parts[1:]


def load_trajectory(path) -> Trajectory:
    reader = _LineReader(path)
    if reader.next_line("header").strip() != "# trustloop-trajectory v1":
        reader.fail("missing '# trustloop-trajectory v1' header")
    trajectory_id = " ".join(reader.next_field("id"))
    try:
        team_size = int(reader.next_field("team_size")[0])
        dt = float(reader.next_field("dt")[0])
        n_targets = int(reader.next_field("targets")[0])
        targets = np.array(
            [[float(v) for v in reader.next_field("target")] for _ in range(n_targets)]
        )
        n_steps = int(reader.next_field("steps")[0])
        states = np.empty((n_steps, team_size, 9))
        for t in range(n_steps):
            row = reader.next_field("step")
            if len(row) != 9 * team_size:
                reader.fail(f"expected {9 * team_size} floats per step, found {len(row)}")
            states[t] = np.array([float(v) for v in row]).reshape(team_size, 9)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, TrajectoryFormatError):
            raise
        reader.fail(f"bad field value ({exc})")
    return Trajectory(
        trajectory_id=trajectory_id,
        team_size=team_size,
        dt=dt,
        targets=targets,
        positions=states[:, :, 0:3].copy(),
        velocities=states[:, :, 3:6].copy(),
        orientations=states[:, :, 6:9].copy(),
    )
