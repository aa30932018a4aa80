"""Dataset container and preprocessing: splits, rotation, truncation, CSV.

Label mapping is fixed across the workbench: 0 = random walk, 1 = chasing,
2 = following.  Datasets hold both boats' paths; classifiers and the
entropy baseline consume boat U's path only, boat V is kept for the CSV
interchange and plotting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .rng import STREAM_SPLIT, STREAM_ROTATION, substream

GRID_SIZE = 4096
TIMESTEP_GROUPS = tuple(range(500, 6001, 500))
VALID_LABELS = (0, 1, 2)

CSV_COLUMNS = ["traj_id", "label", "t", "ux", "uy", "vx", "vy"]
# Real-valued coordinates are written with 9 significant digits; parsing and
# re-writing an emitted file reproduces it byte for byte.
FLOAT_FORMAT = "%.9g"


class CsvFormatError(ValueError):
    """Raised when an interchange CSV fails validation."""


@dataclass(frozen=True)
class SplitSpec:
    test_per_class: int = 15
    k_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.test_per_class < 1:
            raise ValueError("test_per_class must be >= 1")
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")


@dataclass(frozen=True)
class Dataset:
    """Labeled trajectory collection with stable per-trajectory ids.

    ``terminations`` and ``active_lens`` are simulation metadata; they are
    not part of the CSV interchange and are dropped by round trips.
    """

    u: np.ndarray                 # (n, length, 2)
    v: np.ndarray                 # (n, length, 2)
    labels: np.ndarray            # (n,) int64
    ids: np.ndarray               # (n,) int64
    terminations: Optional[tuple] = None
    active_lens: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.labels)
        if not (self.u.shape[0] == self.v.shape[0] == len(self.ids) == n):
            raise ValueError("inconsistent dataset array lengths")
        if self.u.shape != self.v.shape or self.u.ndim != 3 or self.u.shape[2] != 2:
            raise ValueError(f"paths must be (n, length, 2), got {self.u.shape}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def length(self) -> int:
        return self.u.shape[1]

    def take(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            u=self.u[indices], v=self.v[indices],
            labels=self.labels[indices], ids=self.ids[indices],
            terminations=None if self.terminations is None
            else tuple(self.terminations[i] for i in indices),
            active_lens=None if self.active_lens is None
            else self.active_lens[indices],
        )

    def class_counts(self) -> dict[int, int]:
        return {lbl: int(np.sum(self.labels == lbl)) for lbl in VALID_LABELS}


def split_test(dataset: Dataset, spec: SplitSpec,
               rng: np.random.Generator | None = None) -> tuple[Dataset, Dataset]:
    """Draw ``test_per_class`` trajectories per class; the rest is train.

    Both halves are shuffled.  Raises if any class has fewer trajectories
    than requested.
    """
    if rng is None:
        rng = substream(spec.seed, STREAM_SPLIT)
    test_idx, train_idx = [], []
    for lbl in VALID_LABELS:
        members = np.flatnonzero(dataset.labels == lbl)
        if len(members) < spec.test_per_class:
            raise ValueError(
                f"class {lbl} has {len(members)} trajectories, "
                f"needs >= {spec.test_per_class} for the test split")
        order = rng.permutation(len(members))
        test_idx.extend(members[order[:spec.test_per_class]])
        train_idx.extend(members[order[spec.test_per_class:]])
    train_idx = np.array(train_idx, dtype=np.int64)
    test_idx = np.array(test_idx, dtype=np.int64)
    return (dataset.take(rng.permutation(train_idx)),
            dataset.take(rng.permutation(test_idx)))


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.float64)


def rotate_points(points: np.ndarray, theta: float) -> np.ndarray:
    """Rotate (…, 2) coordinates by ``theta`` radians about the origin."""
    return np.asarray(points, dtype=np.float64) @ rotation_matrix(theta).T


def augment_rotations(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    """Rotate every trajectory by its own uniform angle in [0, 2*pi).

    The rotated copy replaces the original; both boats' paths share the
    trajectory's angle.
    """
    n = len(dataset)
    thetas = rng.uniform(0.0, 2.0 * math.pi, size=n)
    u = np.empty(dataset.u.shape, dtype=np.float64)
    v = np.empty(dataset.v.shape, dtype=np.float64)
    for i in range(n):
        u[i] = rotate_points(dataset.u[i], thetas[i])
        v[i] = rotate_points(dataset.v[i], thetas[i])
    return replace(dataset, u=u, v=v)


def normalize(dataset: Dataset, grid_size: int = GRID_SIZE) -> Dataset:
    """Scale all coordinates by 1/grid_size.  No translation is applied."""
    scale = 1.0 / grid_size
    return replace(dataset, u=dataset.u * scale, v=dataset.v * scale)


def truncate(dataset: Dataset, timesteps: int) -> Dataset:
    """Keep the first ``timesteps`` points of every trajectory."""
    if not (1 <= timesteps <= dataset.length):
        raise ValueError(
            f"timesteps must be in [1, {dataset.length}], got {timesteps}")
    return replace(dataset, u=dataset.u[:, :timesteps], v=dataset.v[:, :timesteps],
                   active_lens=None if dataset.active_lens is None
                   else np.minimum(dataset.active_lens, timesteps))


def kfold_split(dataset: Dataset, k: int,
                rng: np.random.Generator) -> list[tuple[Dataset, Dataset]]:
    """Shuffle, partition into k near-equal folds, yield (train, val) pairs."""
    n = len(dataset)
    if k > n:
        raise ValueError(f"cannot split {n} trajectories into {k} folds")
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    pairs = []
    for i in range(k):
        val = folds[i]
        train = np.concatenate([folds[j] for j in range(k) if j != i])
        pairs.append((dataset.take(train), dataset.take(val)))
    return pairs


def _coordinate_frame(dataset: Dataset) -> pd.DataFrame:
    n, length = len(dataset), dataset.length
    frame = pd.DataFrame({
        "traj_id": np.repeat(dataset.ids, length),
        "label": np.repeat(dataset.labels, length),
        "t": np.tile(np.arange(length, dtype=np.int64), n),
        "ux": dataset.u[:, :, 0].reshape(-1),
        "uy": dataset.u[:, :, 1].reshape(-1),
        "vx": dataset.v[:, :, 0].reshape(-1),
        "vy": dataset.v[:, :, 1].reshape(-1),
    })
    return frame


def export_csv(dataset: Dataset, path) -> None:
    """Write the long-format interchange CSV (one row per trajectory step)."""
    frame = _coordinate_frame(dataset)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT,
                 lineterminator="\n")


def import_csv(path) -> Dataset:
    """Read an interchange CSV back into a Dataset, validating the schema.

    Raises CsvFormatError naming the offending data row (1-based, excluding
    the header) for unknown labels, ragged trajectories, or bad time
    indices.
    """
    try:
        frame = pd.read_csv(path, dtype={"traj_id": np.int64, "label": np.int64,
                                         "t": np.int64, "ux": np.float64,
                                         "uy": np.float64, "vx": np.float64,
                                         "vy": np.float64})
    except (ValueError, pd.errors.ParserError) as exc:
        raise CsvFormatError(f"{path}: {exc}") from exc
    if list(frame.columns) != CSV_COLUMNS:
        raise CsvFormatError(
            f"{path}: expected columns {CSV_COLUMNS}, got {list(frame.columns)}")
    if len(frame) == 0:
        raise CsvFormatError(f"{path}: no data rows")

    bad = ~frame["label"].isin(VALID_LABELS)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 1
        raise CsvFormatError(
            f"{path}: unknown label {frame['label'].iloc[row - 1]} at data row {row}")

    ids = frame["traj_id"].to_numpy()
    # Rows must be grouped by trajectory with t = 0..length-1 in each group.
    boundaries = np.flatnonzero(np.diff(ids) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(frame)]))
    lengths = ends - starts
    if len(np.unique(ids[starts])) != len(starts):
        raise CsvFormatError(f"{path}: trajectory rows are not contiguous")
    if len(np.unique(lengths)) != 1:
        row = int(starts[int(np.argmin(lengths))]) + 1
        raise CsvFormatError(
            f"{path}: inconsistent trajectory lengths near data row {row}")
    length = int(lengths[0])
    t = frame["t"].to_numpy()
    expected_t = np.tile(np.arange(length, dtype=np.int64), len(starts))
    if not np.array_equal(t, expected_t):
        row = int(np.flatnonzero(t != expected_t)[0]) + 1
        raise CsvFormatError(f"{path}: bad time index at data row {row}")
    labels_per_traj = frame["label"].to_numpy().reshape(-1, length)
    if (labels_per_traj != labels_per_traj[:, :1]).any():
        raise CsvFormatError(f"{path}: label changes within a trajectory")

    n = len(starts)
    u = np.stack([frame["ux"].to_numpy(), frame["uy"].to_numpy()], axis=1)
    v = np.stack([frame["vx"].to_numpy(), frame["vy"].to_numpy()], axis=1)
    return Dataset(u=u.reshape(n, length, 2), v=v.reshape(n, length, 2),
                   labels=labels_per_traj[:, 0].astype(np.int64),
                   ids=ids[starts].astype(np.int64))
