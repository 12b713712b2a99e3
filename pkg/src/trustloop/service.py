"""Interactive labeling service: the HTTP face of the pipeline.

One session, one model, one rater.  Queries are synthesized on demand,
realized as simulated trajectories, and parked as pending until a label
arrives; labels are appended durably to the same line-delimited dataset
files the offline tools use before they are acknowledged.  Every mutation
bumps a revision counter carried on all responses; retraining holds the
single writer lock, so concurrent retrain requests queue.
"""

from __future__ import annotations

import dataclasses
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from ._kernels import backend_name
from ._util import rng_for
from .ablation import heldout_sets
from .config import ExperimentConfig
from .datasets import (
    LevelDataset,
    LevelRecord,
    PreferenceDataset,
    PreferenceRecord,
    append_level_record,
    append_preference_record,
)
from .model import InputScale, TrustModel, ensure_level, ensure_preference_label, predict_raw, preference_prob
from .nn import init_params
from .queries import TrainingPool, synthesize_queries
from .sim import (
    CONTROL_LOWER,
    CONTROL_UPPER,
    ControlParams,
    Trajectory,
    default_calibration,
    extract_features,
    params_for_features,
    save_trajectory,
    simulate,
)
from .stats import distinction_histogram
from .training import evaluate, train_level, train_preference


class PendingQuery:
    def __init__(self, query_id: str, kind: str, trajectory_ids: list[str]):
        self.query_id = query_id
        self.kind = kind
        self.trajectory_ids = trajectory_ids


class SessionState:
    """All mutable state behind the API, guarded by one writer lock."""

    def __init__(self, config: ExperimentConfig, out_dir: str | Path | None = None):
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.session.out_dir)
        (self.out_dir / "trajectories").mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.revision = 0

        self.levels = LevelDataset()
        self.prefs = PreferenceDataset()
        self.trajectories: dict[str, Trajectory] = {}
        self.features: dict[str, np.ndarray] = {}
        self.unpaired: list[str] = []
        self.pending: dict[str, PendingQuery] = {}
        self.completed: set[str] = set()
        self._query_counter = 0
        self._traj_counter = 0
        self._sim_seeds = rng_for(config.session.seed, "session-sim-seeds")

        self.calibration = default_calibration()
        box = config.feature_box
        self.model = TrustModel(
            config.network,
            init_params(config.network, seed=config.session.seed),
            config.demarcations,
            InputScale.from_bounds(box.lower, box.upper),
        )
        self.initial_model = self.model
        self.anchor: TrustModel | None = None
        self.heldout_levels, self.heldout_pairs = heldout_sets(config, config.session.seed)

        rng = rng_for(config.session.seed, "session-init")
        for _ in range(config.session.initial_trajectories):
            params = ControlParams(
                commanded_speed=rng.uniform(CONTROL_LOWER[0], CONTROL_UPPER[0]),
                formation_spacing=rng.uniform(CONTROL_LOWER[1], CONTROL_UPPER[1]),
                heading_noise_std=rng.uniform(CONTROL_LOWER[2], CONTROL_UPPER[2]),
            )
            self._register_trajectory(self._simulate(params))

    # -- internals -----------------------------------------------------

    def _simulate(self, params: ControlParams) -> Trajectory:
        self._traj_counter += 1
        return simulate(
            params,
            self.config.scenario,
            seed=int(self._sim_seeds.integers(2**31)),
            trajectory_id=f"traj-{self._traj_counter:05d}",
        )

    def _register_trajectory(self, traj: Trajectory) -> np.ndarray:
        save_trajectory(self.out_dir / "trajectories" / f"{traj.trajectory_id}.txt", traj)
        self.trajectories[traj.trajectory_id] = traj
        psi = extract_features(traj)
        self.features[traj.trajectory_id] = psi
        self.unpaired.append(traj.trajectory_id)
        return psi

    def _next_query_id(self) -> str:
        self._query_counter += 1
        return f"query-{self._query_counter:05d}"

    def _pool(self) -> TrainingPool:
        return TrainingPool(self.features.values())

    # -- api operations ------------------------------------------------

    def next_query(self, kind: str) -> dict:
        with self.lock:
            if kind == "level":
                return self._next_level_query()
            if kind == "preference":
                return self._next_preference_query()
            raise HTTPException(400, detail=f"unknown query kind {kind!r}")

    def _next_level_query(self) -> dict:
        cfg = dataclasses.replace(
            self.config.query, seed=self.config.query.seed + self._query_counter
        )
        psi_target = synthesize_queries(
            self.model, self._pool(), self.config.feature_box, cfg, count=1
        )[0]
        params = params_for_features(
            psi_target,
            (self.config.feature_box.lower, self.config.feature_box.upper),
            self.calibration,
        )
        traj = self._simulate(params)
        psi = self._register_trajectory(traj)
        query_id = self._next_query_id()
        self.pending[query_id] = PendingQuery(query_id, "level", [traj.trajectory_id])
        self.revision += 1
        return {
            "query_id": query_id,
            "kind": "level",
            "trajectory_ids": [traj.trajectory_id],
            "features": psi.tolist(),
            "target_features": psi_target.tolist(),
            "prediction": predict_raw(self.model, psi),
            "demarcations": list(self.config.demarcations.values),
            "revision": self.revision,
        }

    def _next_preference_query(self) -> dict:
        pending_ids = {tid for q in self.pending.values() for tid in q.trajectory_ids}
        available = [tid for tid in self.unpaired if tid not in pending_ids]
        if len(available) < 2:
            raise HTTPException(
                409,
                detail={
                    "error": "exhausted",
                    "reason": "need at least 2 trajectories not yet used in a pair",
                },
            )
        best = None
        for i in range(len(available)):
            for j in range(i + 1, len(available)):
                p, _ = preference_prob(
                    self.model, self.features[available[i]], self.features[available[j]]
                )
                gap = abs(p - 0.5)
                if best is None or gap < best[0]:
                    best = (gap, available[i], available[j], p)
        _, tid_a, tid_b, p = best
        query_id = self._next_query_id()
        self.pending[query_id] = PendingQuery(query_id, "preference", [tid_a, tid_b])
        self.revision += 1
        return {
            "query_id": query_id,
            "kind": "preference",
            "trajectory_ids": [tid_a, tid_b],
            "features": [self.features[tid_a].tolist(), self.features[tid_b].tolist()],
            "prediction": [p, 1.0 - p],
            "revision": self.revision,
        }

    def submit_label(self, query_id: str, payload, rater: str) -> dict:
        with self.lock:
            if query_id in self.completed:
                raise HTTPException(
                    409, detail={"error": "duplicate", "query_id": query_id}
                )
            query = self.pending.get(query_id)
            if query is None:
                raise HTTPException(
                    404, detail={"error": "unknown query", "query_id": query_id}
                )
            if query.kind == "level":
                try:
                    label = ensure_level(float(payload), self.config.demarcations)
                except (TypeError, ValueError) as exc:
                    raise HTTPException(422, detail=f"bad level payload: {exc}")
                tid = query.trajectory_ids[0]
                record = LevelRecord(tid, self.features[tid], label)
                append_level_record(self.out_dir / "levels.txt", record)
                self.levels.records.append(record)
            else:
                try:
                    label = ensure_preference_label(payload)
                except (TypeError, ValueError) as exc:
                    raise HTTPException(422, detail=f"bad preference payload: {exc}")
                tid_a, tid_b = query.trajectory_ids
                record = PreferenceRecord(
                    f"{tid_a}:{tid_b}", self.features[tid_a], self.features[tid_b], label
                )
                append_preference_record(self.out_dir / "prefs.txt", record)
                self.prefs.records.append(record)
                self.unpaired = [t for t in self.unpaired if t not in (tid_a, tid_b)]
            del self.pending[query_id]
            self.completed.add(query_id)
            self.revision += 1
            return {
                "query_id": query_id,
                "rater": rater,
                "revision": self.revision,
                "pool_sizes": {"levels": len(self.levels), "preferences": len(self.prefs)},
            }

    def retrain(self, task: str) -> dict:
        with self.lock:
            train_cfg = self.config.stl.train
            if task == "a":
                if len(self.levels) == 0:
                    raise HTTPException(
                        409, detail={"error": "empty pool", "task": "a"}
                    )
                result = train_level(self.initial_model, self.levels, train_cfg)
                self.model = result.model
                self.anchor = result.model
            elif task == "b":
                if self.anchor is None:
                    raise HTTPException(
                        409, detail={"error": "train task a first", "task": "b"}
                    )
                if len(self.prefs) == 0:
                    raise HTTPException(
                        409, detail={"error": "empty pool", "task": "b"}
                    )
                result = train_preference(
                    self.anchor,
                    self.prefs,
                    train_cfg,
                    lwf_weight=self.config.stl.lwf_weight,
                    anchor=self.anchor,
                )
                self.model = result.model
            else:
                raise HTTPException(400, detail=f"unknown task {task!r}, expected 'a' or 'b'")
            self.model.save(self.out_dir / "model.bin")
            self.revision += 1
            return {
                "task": task,
                "revision": self.revision,
                "initial_loss": result.initial_loss,
                "final_loss": result.final_loss,
                "epochs": train_cfg.epochs,
            }

    def metrics(self) -> dict:
        report = evaluate(self.model, self.heldout_levels, self.heldout_pairs)
        histogram = distinction_histogram(
            self.model, [r.features for r in self.heldout_levels]
        )
        return {
            "revision": self.revision,
            "level_accuracy": report.level_accuracy,
            "preference_accuracy": report.preference_accuracy,
            "heldout_sizes": {"levels": report.n_levels, "pairs": report.n_pairs},
            "pool_sizes": {"levels": len(self.levels), "preferences": len(self.prefs)},
            "distinction_histogram": {str(k): v for k, v in histogram.items()},
            "trained": self.anchor is not None,
        }


class LabelBody(BaseModel):
    query_id: str
    payload: float | list[int]
    rater: str = "human"
    timestamp: float | None = None  # informational; never persisted


class RetrainBody(BaseModel):
    task: str


def create_app(
    config: ExperimentConfig | None = None,
    out_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    config = config or ExperimentConfig()
    app = FastAPI(title="trustloop")
    session = SessionState(config, out_dir)
    app.state.session = session

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "revision": session.revision,
            "kernel_backend": backend_name,
        }

    @app.get("/api/query")
    def next_query(kind: str = "level"):
        return session.next_query(kind)

    @app.post("/api/label")
    def submit_label(body: LabelBody):
        return session.submit_label(body.query_id, body.payload, body.rater)

    @app.post("/api/retrain")
    def retrain(body: RetrainBody):
        return session.retrain(body.task)

    @app.get("/api/metrics")
    def metrics():
        return session.metrics()

    @app.get("/api/trajectory/{trajectory_id}")
    def trajectory(trajectory_id: str):
        traj = session.trajectories.get(trajectory_id)
        if traj is None:
            raise HTTPException(404, detail=f"unknown trajectory {trajectory_id!r}")
        payload = traj.to_dict()
        payload["revision"] = session.revision
        return payload

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


def drive_session(http, oracle, n_level_labels: int = 10, retrain_task: str = "a") -> dict:
    """Scripted oracle-driven labeling loop against a live (or test) client.

    Fetches level queries, labels each with the rater, retrains, and returns
    the metrics before and after.  ``http`` needs requests-style get/post.
    """
    before = http.get("/api/metrics").json()
    for _ in range(n_level_labels):
        query = http.get("/api/query", params={"kind": "level"}).json()
        label = oracle.rate_level(np.asarray(query["features"]))
        ack = http.post(
            "/api/label",
            json={"query_id": query["query_id"], "payload": label, "rater": "oracle"},
        )
        ack.raise_for_status()
    http.post("/api/retrain", json={"task": retrain_task}).raise_for_status()
    after = http.get("/api/metrics").json()
    return {"before": before, "after": after}
