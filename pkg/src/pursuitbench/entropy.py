"""Entropy-threshold clustering baseline.

Each trajectory is turned into a stream of movement symbols (8 compass
directions plus STAY, from the sign of the per-step displacement), a
sliding buffer of symbols is scored by Shannon entropy in bits, and the
per-trajectory mean buffer entropy is classified against three fitted
centroids: chasing sits near zero entropy, following in the middle,
random walk at the top.

Thresholds come either from per-class means (supervised) or from 1-D
k-means (Lloyd's algorithm); classification is by nearest centroid
("voronoi") or by dispersion-weighted boundaries ("weighted").
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset

N_SYMBOLS = 9
MAX_ENTROPY_BITS = math.log2(N_SYMBOLS)

# Symbol codes are (sign(dx)+1)*3 + (sign(dy)+1); STAY = 4.
SYMBOL_NAMES = {
    0: "SW", 1: "W", 2: "NW",
    3: "S", 4: "STAY", 5: "N",
    6: "SE", 7: "E", 8: "NE",
}
STAY = 4

_SIGMA_FLOOR = 1e-6


class ThresholdMethod(Enum):
    SUPERVISED_WEIGHTED = "supervised_weighted"
    SUPERVISED_VORONOI = "supervised_voronoi"
    KMEANS_WEIGHTED = "kmeans_weighted"
    KMEANS_VORONOI = "kmeans_voronoi"

    @property
    def is_supervised(self) -> bool:
        return self in (ThresholdMethod.SUPERVISED_WEIGHTED,
                        ThresholdMethod.SUPERVISED_VORONOI)

    @property
    def is_weighted(self) -> bool:
        return self in (ThresholdMethod.SUPERVISED_WEIGHTED,
                        ThresholdMethod.KMEANS_WEIGHTED)


@dataclass(frozen=True)
class EntropyConfig:
    buffer_size: int = 64
    # Displacement components with magnitude <= symbol_eps count as zero, so
    # float data (rotated/quantized coordinates) symbolizes robustly.  The
    # value is in grid units; symbolize unnormalized coordinates.
    symbol_eps: float = 1e-3

    def __post_init__(self):
        if self.buffer_size < 2:
            raise ValueError("buffer_size must be >= 2")


@dataclass(frozen=True)
class EntropyThresholds:
    """Sorted centroids (t1 <= t2 <= t3), their dispersions, and label order.

    ``class_order[i]`` is the label owned by centroid i in ascending
    order; the expected order is chasing, following, random walk.
    """

    t1: float
    t2: float
    t3: float
    sigmas: tuple[float, float, float]
    method: ThresholdMethod
    class_order: tuple[int, int, int] = (1, 2, 0)

    def __post_init__(self):
        if not (self.t1 <= self.t2 <= self.t3):
            raise ValueError("thresholds must be sorted ascending")
        if not (0.0 <= self.t1 and self.t3 <= MAX_ENTROPY_BITS + 1e-12):
            raise ValueError(f"thresholds must lie in [0, {MAX_ENTROPY_BITS:.4f}]")

    @property
    def centroids(self) -> np.ndarray:
        return np.array([self.t1, self.t2, self.t3])


def direction_symbol(p, q, eps: float = 1e-3) -> int:
    """Symbol code for the move p -> q (see SYMBOL_NAMES)."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    sx = 0 if abs(dx) <= eps else (1 if dx > 0 else -1)
    sy = 0 if abs(dy) <= eps else (1 if dy > 0 else -1)
    return (sx + 1) * 3 + (sy + 1)


def symbol_stream(points: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Vectorized direction_symbol over consecutive points of an (L, 2) path."""
    d = np.diff(np.asarray(points, dtype=np.float64), axis=0)
    sx = np.where(d[:, 0] > eps, 1, np.where(d[:, 0] < -eps, -1, 0))
    sy = np.where(d[:, 1] > eps, 1, np.where(d[:, 1] < -eps, -1, 0))
    return ((sx + 1) * 3 + (sy + 1)).astype(np.int8)


def buffer_entropy(window: np.ndarray) -> float:
    """Shannon entropy in bits of the empirical symbol distribution."""
    if len(window) == 0:
        raise ValueError("window must be non-empty")
    counts = np.bincount(np.asarray(window), minlength=N_SYMBOLS)
    p = counts[counts > 0] / len(window)
    return float(-np.sum(p * np.log2(p)))


def window_entropies(points: np.ndarray, cfg: EntropyConfig) -> np.ndarray:
    """Entropy of every sliding buffer over the path's symbol stream.

    Returns (L - 1 - b + 1,) values for an (L, 2) path and buffer size b.
    """
    s = symbol_stream(points, cfg.symbol_eps)
    b = cfg.buffer_size
    if len(s) < b:
        raise ValueError(f"need more than {b} points, got {len(points)}")
    onehot = np.zeros((len(s) + 1, N_SYMBOLS))
    onehot[np.arange(1, len(s) + 1), s] = 1.0
    cum = np.cumsum(onehot, axis=0)
    p = (cum[b:] - cum[:-b]) / b
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log2(p), 0.0)
    return -np.sum(terms, axis=1)


def trajectory_entropy(points: np.ndarray, cfg: EntropyConfig,
                       timesteps: int | None = None) -> float:
    """Mean buffer entropy over the first ``timesteps`` points."""
    points = np.asarray(points)
    T = len(points) if timesteps is None else timesteps
    if not (cfg.buffer_size < T <= len(points)):
        raise ValueError(
            f"timesteps must be in ({cfg.buffer_size}, {len(points)}], got {T}")
    return float(np.mean(window_entropies(points[:T], cfg)))


def dataset_entropies(dataset: Dataset, cfg: EntropyConfig,
                      timesteps: int | None = None) -> np.ndarray:
    """trajectory_entropy of boat U's path for every trajectory."""
    return np.array([trajectory_entropy(dataset.u[i], cfg, timesteps)
                     for i in range(len(dataset))])


def _prefix_mean_entropies(dataset: Dataset, cfg: EntropyConfig,
                           timestep_groups) -> dict[int, np.ndarray]:
    """dataset_entropies at several prefix lengths, sharing the symbol pass."""
    out = {T: np.empty(len(dataset)) for T in timestep_groups}
    for i in range(len(dataset)):
        we = window_entropies(dataset.u[i], cfg)
        sums = np.concatenate(([0.0], np.cumsum(we)))
        for T in timestep_groups:
            n = T - cfg.buffer_size
            if not (0 < n <= len(we)):
                raise ValueError(f"timestep group {T} out of range")
            out[T][i] = sums[n] / n
    return out


def fit_supervised(entropies: np.ndarray, labels: np.ndarray,
                   method: ThresholdMethod) -> EntropyThresholds:
    """Per-class mean entropies as centroids, sorted ascending."""
    if not method.is_supervised:
        raise ValueError(f"{method} is not a supervised variant")
    entropies = np.asarray(entropies, dtype=np.float64)
    labels = np.asarray(labels)
    means, stds, classes = [], [], []
    for lbl in sorted(set(int(l) for l in labels)):
        members = entropies[labels == lbl]
        means.append(float(np.mean(members)))
        stds.append(float(np.std(members)))
        classes.append(lbl)
    if len(classes) != 3:
        raise ValueError(f"need samples from 3 classes, got {classes}")
    order = np.argsort(means, kind="stable")
    t = [means[i] for i in order]
    return EntropyThresholds(t1=t[0], t2=t[1], t3=t[2],
                             sigmas=tuple(stds[i] for i in order),
                             method=method,
                             class_order=tuple(classes[i] for i in order))


def fit_kmeans(entropies: np.ndarray, method: ThresholdMethod,
               q: int = 3, max_iter: int = 100,
               rng: np.random.Generator | None = None) -> EntropyThresholds:
    """1-D Lloyd's algorithm on the entropy values.

    Centroids start at the 1/6, 3/6, 5/6 quantiles of the sorted values
    (deterministic; ``rng`` is accepted for interface symmetry but unused)
    and iterate until assignments stabilize.  Cluster-to-label order is the
    canonical ascending one: chasing, following, random walk.
    """
    if method.is_supervised:
        raise ValueError(f"{method} is not a k-means variant")
    values = np.asarray(entropies, dtype=np.float64)
    if len(np.unique(values)) < q:
        raise ValueError(f"need at least {q} distinct entropy values")
    centroids, assign = kmeans_1d(values, q, max_iter)
    stds = np.array([np.std(values[assign == j]) if np.any(assign == j) else 0.0
                     for j in range(q)])
    return EntropyThresholds(t1=float(centroids[0]), t2=float(centroids[1]),
                             t3=float(centroids[2]),
                             sigmas=tuple(float(s) for s in stds),
                             method=method)


def _best_three_way_split(values: np.ndarray) -> np.ndarray:
    """Means of the minimum-inertia contiguous 3-partition of sorted values.

    Optimal 1-D k-means clusters are contiguous in sorted order, so a
    prefix-sum scan over all two-cut partitions finds the global optimum.
    """
    sv = np.sort(values)
    n = len(sv)
    s1 = np.concatenate(([0.0], np.cumsum(sv)))
    s2 = np.concatenate(([0.0], np.cumsum(sv * sv)))

    def seg_cost(i, j):        # within-segment sum of squares, vectorized
        width = j - i
        return (s2[j] - s2[i]) - (s1[j] - s1[i]) ** 2 / width

    best = (np.inf, 1, 2)
    for i in range(1, n - 1):
        j = np.arange(i + 1, n)
        cost = seg_cost(0, i) + seg_cost(i, j) + seg_cost(j, n)
        k = int(np.argmin(cost))
        if cost[k] < best[0] - 1e-15:
            best = (float(cost[k]), i, int(j[k]))
    _, i, j = best
    return np.array([s1[i] / i, (s1[j] - s1[i]) / (j - i),
                     (s1[n] - s1[j]) / (n - j)])


def kmeans_1d(values: np.ndarray, q: int,
              max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm on 1-D data; returns sorted centroids + assignments.

    For q=3 the initial centroids are the segment means of the best
    contiguous split (single quantile starts can stall in poor local
    optima), so the refined result attains the global 1-D optimum; other
    q fall back to quantile starts.  Assignment ties go to the lower
    centroid and the within-cluster sum of squares never increases.
    """
    if q == 3:
        centroids = _best_three_way_split(values)
    else:
        centroids = np.quantile(np.sort(values), (2 * np.arange(q) + 1) / (2 * q))
    assign = None
    for _ in range(max_iter):
        dist = np.abs(values[:, None] - centroids[None, :])
        new_assign = np.argmin(dist, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(q):
            members = values[assign == j]
            if len(members):
                centroids[j] = members.mean()
    order = np.argsort(centroids, kind="stable")
    remap = np.empty(q, dtype=np.int64)
    remap[order] = np.arange(q)
    return centroids[order], remap[assign]


def decision_boundaries(thr: EntropyThresholds) -> tuple[float, float]:
    """The two entropy cut points implied by the thresholds.

    Voronoi variants cut midway between adjacent centroids; weighted
    variants pull each cut toward the tighter cluster via
    (sigma_hi * t_lo + sigma_lo * t_hi) / (sigma_lo + sigma_hi).
    """
    c = (thr.t1, thr.t2, thr.t3)
    if not thr.method.is_weighted:
        return ((c[0] + c[1]) / 2.0, (c[1] + c[2]) / 2.0)
    s = [max(x, _SIGMA_FLOOR) for x in thr.sigmas]
    b12 = (s[1] * c[0] + s[0] * c[1]) / (s[0] + s[1])
    b23 = (s[2] * c[1] + s[1] * c[2]) / (s[1] + s[2])
    return (b12, b23)


def classify(entropy_value: float, thr: EntropyThresholds) -> int:
    """Label for one trajectory entropy; boundary ties go to the lower centroid."""
    b12, b23 = decision_boundaries(thr)
    if entropy_value <= b12:
        return thr.class_order[0]
    if entropy_value <= b23:
        return thr.class_order[1]
    return thr.class_order[2]


def classify_many(entropy_values: np.ndarray, thr: EntropyThresholds) -> np.ndarray:
    b12, b23 = decision_boundaries(thr)
    values = np.asarray(entropy_values)
    bucket = np.where(values <= b12, 0, np.where(values <= b23, 1, 2))
    return np.array(thr.class_order)[bucket]


def evaluate_thresholds(test: Dataset, thr: EntropyThresholds,
                        cfg: EntropyConfig, timesteps: int) -> float:
    """Fraction of test trajectories classified correctly at this prefix."""
    if len(test) == 0:
        raise ValueError("empty test set")
    predicted = classify_many(dataset_entropies(test, cfg, timesteps), thr)
    return float(np.mean(predicted == test.labels))


def thresholds_to_csv(thresholds, path) -> None:
    """Write fitted thresholds as method,t1,t2,t3,sigma1,sigma2,sigma3."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "t1", "t2", "t3", "sigma1", "sigma2", "sigma3"])
        for thr in thresholds:
            writer.writerow([thr.method.value,
                             f"{thr.t1:.6f}", f"{thr.t2:.6f}", f"{thr.t3:.6f}",
                             *(f"{s:.6f}" for s in thr.sigmas)])


def entropies_to_csv(dataset: Dataset, entropies: np.ndarray, path) -> None:
    """Write per-trajectory entropies as traj_id,label,entropy."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["traj_id", "label", "entropy"])
        for tid, lbl, h in zip(dataset.ids, dataset.labels, entropies):
            writer.writerow([int(tid), int(lbl), f"{h:.6f}"])
