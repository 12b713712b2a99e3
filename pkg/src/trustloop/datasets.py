"""Labeled feature datasets and their line-delimited text formats.

One record per line, space-separated, UTF-8, floats written in shortest
round-trip form so files are byte-stable across reruns:

  levels file    header ``# trustloop-levels v1 dim=D``
                 record ``<trajectory_id> <psi[0..D-1]> <label>``
  prefs file     header ``# trustloop-prefs v1 dim=D``
                 record ``<pair_id> <psi_p[0..D-1]> <psi_q[0..D-1]> <I> <I'>``
  queries file   header ``# trustloop-queries v1 dim=D``
                 record ``<query_id> <origin> <psi[0..D-1]>``
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ._util import fmt_float
from .model import DemarcationSet, ensure_level, ensure_preference_label


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries path and line number."""


@dataclass
class LevelRecord:
    trajectory_id: str
    features: np.ndarray
    label: float


@dataclass
class PreferenceRecord:
    pair_id: str
    features_p: np.ndarray
    features_q: np.ndarray
    label: tuple[int, int]


@dataclass
class LevelDataset:
    records: list[LevelRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def dim(self) -> int:
        if not self.records:
            raise ValueError("empty dataset has no feature dimension")
        return int(self.records[0].features.size)

    def add(self, trajectory_id: str, features, label: float, demarcs: DemarcationSet | None = None):
        features = np.asarray(features, dtype=np.float64)
        if self.records and features.size != self.dim:
            raise ValueError(
                f"feature dim {features.size} does not match dataset dim {self.dim}"
            )
        if demarcs is not None:
            label = ensure_level(label, demarcs)
        self.records.append(LevelRecord(str(trajectory_id), features, float(label)))

    def feature_matrix(self) -> np.ndarray:
        return np.array([r.features for r in self.records])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records])


@dataclass
class PreferenceDataset:
    records: list[PreferenceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def dim(self) -> int:
        if not self.records:
            raise ValueError("empty dataset has no feature dimension")
        return int(self.records[0].features_p.size)

    def add(self, pair_id: str, features_p, features_q, label):
        label = ensure_preference_label(label)
        fp = np.asarray(features_p, dtype=np.float64)
        fq = np.asarray(features_q, dtype=np.float64)
        if fp.size != fq.size:
            raise ValueError(f"pair feature dims differ: {fp.size} vs {fq.size}")
        if self.records and fp.size != self.dim:
            raise ValueError(f"feature dim {fp.size} does not match dataset dim {self.dim}")
        self.records.append(PreferenceRecord(str(pair_id), fp, fq, label))


def _floats(parts: list[str], path, lineno: int) -> list[float]:
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:{lineno}: bad float field ({exc})") from exc


def _read_header(line: str, kind: str, path) -> int:
    parts = line.strip().split()
    if len(parts) != 4 or parts[0] != "#" or not parts[1].startswith("trustloop-"):
        raise DatasetFormatError(f"{path}:1: missing '# trustloop-{kind} v1 dim=D' header")
    if parts[1] != f"trustloop-{kind}":
        raise DatasetFormatError(f"{path}:1: expected a {kind} file, found {parts[1]!r}")
    if parts[2] != "v1":
        raise DatasetFormatError(f"{path}:1: unsupported format version {parts[2]!r}")
    if not parts[3].startswith("dim="):
        raise DatasetFormatError(f"{path}:1: malformed dim field {parts[3]!r}")
    try:
        return int(parts[3][4:])
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:1: malformed dim field {parts[3]!r}") from exc


def _header_line(kind: str, dim: int) -> str:
    return f"# trustloop-{kind} v1 dim={dim}"


def level_record_line(record: LevelRecord) -> str:
    fields = [record.trajectory_id]
    fields += [fmt_float(v) for v in record.features]
    fields.append(fmt_float(record.label))
    return " ".join(fields)


def save_level_dataset(path, dataset: LevelDataset, dim: int | None = None) -> None:
    dim = dim if dim is not None else dataset.dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_line("levels", dim) + "\n")
        for record in dataset:
            fh.write(level_record_line(record) + "\n")


def load_level_dataset(path) -> LevelDataset:
    dataset = LevelDataset()
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}:1: empty file")
    dim = _read_header(lines[0], "levels", path)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != dim + 2:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {dim + 2} fields, found {len(parts)}"
            )
        values = _floats(parts[1:], path, lineno)
        dataset.add(parts[0], values[:dim], values[dim])
    return dataset


def append_level_record(path, record: LevelRecord, dim: int | None = None) -> None:
    """Append one record, creating the file with a header when absent.

    The write is flushed and fsynced before returning, so an acknowledged
    label survives a crash.
    """
    dim = dim if dim is not None else record.features.size
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(_header_line("levels", dim) + "\n")
        fh.write(level_record_line(record) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def append_preference_record(path, record: PreferenceRecord, dim: int | None = None) -> None:
    """Preference-file counterpart of append_level_record."""
    dim = dim if dim is not None else record.features_p.size
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(_header_line("prefs", dim) + "\n")
        fh.write(preference_record_line(record) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def preference_record_line(record: PreferenceRecord) -> str:
    fields = [record.pair_id]
    fields += [fmt_float(v) for v in record.features_p]
    fields += [fmt_float(v) for v in record.features_q]
    fields += [str(record.label[0]), str(record.label[1])]
    return " ".join(fields)


def save_preference_dataset(path, dataset: PreferenceDataset, dim: int | None = None) -> None:
    dim = dim if dim is not None else dataset.dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_line("prefs", dim) + "\n")
        for record in dataset:
            fh.write(preference_record_line(record) + "\n")


def load_preference_dataset(path) -> PreferenceDataset:
    dataset = PreferenceDataset()
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}:1: empty file")
    dim = _read_header(lines[0], "prefs", path)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 * dim + 3:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {2 * dim + 3} fields, found {len(parts)}"
            )
        values = _floats(parts[1 : 1 + 2 * dim], path, lineno)
        try:
            label = ensure_preference_label((parts[-2], parts[-1]))
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{lineno}: {exc}") from exc
        dataset.add(parts[0], values[:dim], values[dim:], label)
    return dataset


def save_query_batch(path, queries: list[np.ndarray], origins: list[str], ids: list[str] | None = None) -> None:
    """Feature batches flagged by origin ('active' or 'random')."""
    if len(queries) != len(origins):
        raise ValueError("queries and origins must align")
    dim = int(np.asarray(queries[0]).size) if queries else 0
    ids = ids or [f"q-{i:04d}" for i in range(len(queries))]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_header_line("queries", dim) + "\n")
        for qid, origin, psi in zip(ids, origins, queries):
            fields = [qid, origin] + [fmt_float(v) for v in np.asarray(psi)]
            fh.write(" ".join(fields) + "\n")


def load_query_batch(path) -> list[tuple[str, str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}:1: empty file")
    dim = _read_header(lines[0], "queries", path)
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != dim + 2:
            raise DatasetFormatError(
                f"{path}:{lineno}: expected {dim + 2} fields, found {len(parts)}"
            )
        out.append((parts[0], parts[1], np.array(_floats(parts[2:], path, lineno))))
    return out
