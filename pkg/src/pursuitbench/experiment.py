"""Experiment grid: k-fold model selection and baseline evaluation per cell.

A cell is (method x condition x prefix length).  Neural cells train five
fold models on the condition's train set and evaluate the best one on the
held-out test set; entropy baselines fit their thresholds once per
condition on full-length train trajectories and are then scored at every
prefix length.  Rows are assembled deterministically from the plan order,
so identical seeds give identical reports regardless of worker count.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import entropy as ent
from .data import Dataset, TIMESTEP_GROUPS, kfold_split, normalize, truncate
from .nn import (ModelFamily, ModelSpec, TrainConfig, accuracy, build_model,
                 default_spec, predict, train)
from .rng import (STREAM_BATCH, STREAM_FOLDS, STREAM_INIT, substream)

CONDITIONS = ("plain", "rotated")

_FAMILY_CODES = {f: i for i, f in enumerate(ModelFamily)}
_CONDITION_CODES = {c: i for i, c in enumerate(CONDITIONS)}

DEFAULT_TRAIN_CONFIGS = {
    ModelFamily.DENSE: TrainConfig(epochs=200, learning_rate=1e-3),
    ModelFamily.CONV1D: TrainConfig(epochs=120, learning_rate=1e-3),
    ModelFamily.LSTM: TrainConfig(epochs=150, learning_rate=3e-3),
    ModelFamily.GRU: TrainConfig(epochs=100, learning_rate=3e-3),
}


@dataclass(frozen=True)
class ExperimentPlan:
    families: tuple[ModelFamily, ...] = tuple(ModelFamily)
    baselines: tuple[ent.ThresholdMethod, ...] = tuple(ent.ThresholdMethod)
    timestep_groups: tuple[int, ...] = TIMESTEP_GROUPS
    conditions: tuple[str, ...] = CONDITIONS
    seed: int = 0
    k_folds: int = 5
    entropy: ent.EntropyConfig = field(default_factory=ent.EntropyConfig)
    model_specs: dict = field(default_factory=dict)      # family -> ModelSpec
    train_configs: dict = field(default_factory=dict)    # family -> TrainConfig
    # Rotated-condition training redraws rotation angles per epoch; the
    # exported rotated CSVs and the test set keep their fixed angles.
    augment_rotated_training: bool = True

    def __post_init__(self):
        if not self.families and not self.baselines:
            raise ValueError("plan needs at least one family or baseline")
        if list(self.timestep_groups) != sorted(set(self.timestep_groups)):
            raise ValueError("timestep groups must be sorted and unique")
        for T in self.timestep_groups:
            if T not in TIMESTEP_GROUPS:
                raise ValueError(f"{T} is not a valid timestep group "
                                 f"(multiples of 500 up to 6000)")
        for c in self.conditions:
            if c not in CONDITIONS:
                raise ValueError(f"unknown condition {c!r}")

    def spec_for(self, family: ModelFamily) -> ModelSpec:
        return self.model_specs.get(family, default_spec(family))

    def train_config_for(self, family: ModelFamily) -> TrainConfig:
        return self.train_configs.get(family, DEFAULT_TRAIN_CONFIGS[family])

    def config_hash(self) -> str:
        blob = json.dumps({
            "families": [f.value for f in self.families],
            "baselines": [b.value for b in self.baselines],
            "timestep_groups": list(self.timestep_groups),
            "conditions": list(self.conditions),
            "seed": self.seed,
            "k_folds": self.k_folds,
            "entropy": [self.entropy.buffer_size, self.entropy.symbol_eps],
            "model_specs": {f.value: [s.hidden_sizes, s.input_stride]
                            for f, s in sorted(self.model_specs.items(),
                                               key=lambda kv: kv[0].value)},
            "train_configs": {f.value: [c.epochs, c.learning_rate, c.batch_size,
                                        c.optimizer]
                              for f, c in sorted(self.train_configs.items(),
                                                 key=lambda kv: kv[0].value)},
        }, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ReportRow:
    method: str
    condition: str
    timesteps: int
    accuracy: float
    fold_val_accuracies: tuple[float, ...] | None = None
    chosen_fold: int | None = None


@dataclass(frozen=True)
class AccuracyReport:
    rows: tuple[ReportRow, ...]

    def __len__(self):
        return len(self.rows)

    def lookup(self, method: str, condition: str, timesteps: int) -> ReportRow:
        for row in self.rows:
            if (row.method, row.condition, row.timesteps) == \
                    (method, condition, timesteps):
                return row
        raise KeyError((method, condition, timesteps))

    def to_frame(self) -> pd.DataFrame:
        k = max((len(r.fold_val_accuracies) for r in self.rows
                 if r.fold_val_accuracies), default=0)
        records = []
        for r in self.rows:
            rec = {"condition": r.condition, "method": r.method,
                   "timesteps": r.timesteps, "accuracy": round(r.accuracy, 4)}
            for i in range(k):
                rec[f"fold{i}"] = (round(r.fold_val_accuracies[i], 4)
                                   if r.fold_val_accuracies else None)
            rec["chosen_fold"] = r.chosen_fold
            records.append(rec)
        columns = (["condition", "method", "timesteps", "accuracy"]
                   + [f"fold{i}" for i in range(k)] + ["chosen_fold"])
        return pd.DataFrame.from_records(records, columns=columns)


def prepare_xy(dataset: Dataset, timesteps: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncate, normalize, and return (coordinates, labels) model inputs."""
    d = normalize(truncate(dataset, timesteps))
    return np.ascontiguousarray(d.u, dtype=np.float64), d.labels


def run_kfold(train_set: Dataset, model_spec: ModelSpec, timesteps: int,
              config: TrainConfig, seed: int, condition: str = "plain",
              k: int = 5):
    """Train one model per fold and keep the best by validation accuracy.

    Returns (best_model, fold_val_accuracies); ties go to the lowest fold
    index.  The fold partition depends only on (condition, timesteps) so
    every family sees the same folds in a given cell.
    """
    cond = _CONDITION_CODES[condition]
    fam = _FAMILY_CODES[model_spec.family]
    folds = kfold_split(train_set, k,
                        substream(seed, STREAM_FOLDS, cond, timesteps))
    accs, models = [], []
    for i, (fold_train, fold_val) in enumerate(folds):
        model = build_model(model_spec, timesteps,
                            substream(seed, STREAM_INIT, fam, cond, timesteps, i))
        history = train(model, prepare_xy(fold_train, timesteps),
                        prepare_xy(fold_val, timesteps), config,
                        substream(seed, STREAM_BATCH, fam, cond, timesteps, i))
        accs.append(history[-1][1] if history else 0.0)
        models.append(model)
    best = int(np.argmax(accs))
    return models[best], accs


def _neural_cell(plan: ExperimentPlan, datasets, family: ModelFamily,
                 condition: str, timesteps: int):
    train_set, test_set = datasets[condition]
    t0 = time.perf_counter()
    config = plan.train_config_for(family)
    if condition == "rotated" and plan.augment_rotated_training:
        config = replace(config, rotation_augment=True)
    model, fold_accs = run_kfold(train_set, plan.spec_for(family), timesteps,
                                 config, plan.seed, condition, plan.k_folds)
    x_test, y_test = prepare_xy(test_set, timesteps)
    predicted = predict(model, x_test)
    row = ReportRow(method=family.value, condition=condition,
                    timesteps=timesteps,
                    accuracy=float(np.mean(predicted == y_test)),
                    fold_val_accuracies=tuple(float(a) for a in fold_accs),
                    chosen_fold=int(np.argmax(fold_accs)))
    return row, test_set.ids, y_test, predicted, time.perf_counter() - t0


_POOL_STATE: dict = {}


def _pool_init(plan, datasets):
    _POOL_STATE["plan"] = plan
    _POOL_STATE["datasets"] = datasets


def _pool_cell(args):
    family_value, condition, timesteps = args
    return _neural_cell(_POOL_STATE["plan"], _POOL_STATE["datasets"],
                        ModelFamily(family_value), condition, timesteps)


def _baseline_rows(plan: ExperimentPlan, datasets, out_dir: Path | None,
                   manifest: list):
    rows, dumps = [], []
    thresholds_by_condition = {}
    for condition in plan.conditions:
        train_set, test_set = datasets[condition]
        t0 = time.perf_counter()
        cfg = plan.entropy
        train_entropies = ent.dataset_entropies(train_set, cfg)
        fitted = {}
        for method in plan.baselines:
            if method.is_supervised:
                fitted[method] = ent.fit_supervised(train_entropies,
                                                    train_set.labels, method)
            else:
                fitted[method] = ent.fit_kmeans(train_entropies, method)
        thresholds_by_condition[condition] = (fitted, train_entropies)
        test_by_T = ent._prefix_mean_entropies(test_set, cfg,
                                               plan.timestep_groups)
        for method in plan.baselines:
            thr = fitted[method]
            for T in plan.timestep_groups:
                predicted = ent.classify_many(test_by_T[T], thr)
                rows.append(ReportRow(method=method.value, condition=condition,
                                      timesteps=T,
                                      accuracy=float(np.mean(
                                          predicted == test_set.labels))))
                dumps.append((method.value, condition, T, test_set.ids,
                              test_set.labels, predicted))
        manifest.append({"stage": "baselines", "condition": condition,
                         "seconds": round(time.perf_counter() - t0, 3)})
    if out_dir is not None:
        for condition, (fitted, train_entropies) in \
                thresholds_by_condition.items():
            if fitted:
                ent.thresholds_to_csv(
                    [fitted[m] for m in plan.baselines],
                    out_dir / f"thresholds_{condition}.csv")
                ent.entropies_to_csv(datasets[condition][0], train_entropies,
                                     out_dir / f"train_entropies_{condition}.csv")
    return rows, dumps


def _dump_predictions(out_dir: Path, method: str, condition: str, T: int,
                      ids, truth, predicted) -> None:
    frame = pd.DataFrame({"traj_id": ids, "true_label": truth,
                          "predicted_label": predicted})
    frame.to_csv(out_dir / f"{method}_{condition}_{T}.csv", index=False,
                 lineterminator="\n")


def run_experiment(plan: ExperimentPlan, datasets: dict,
                   out_dir=None, jobs: int = 1) -> AccuracyReport:
    """Execute every cell of the plan against per-condition datasets.

    ``datasets`` maps condition name to (train, test).  With ``out_dir``
    set, per-cell prediction dumps, fitted thresholds, train entropies,
    and a JSONL manifest are written alongside the report.
    """
    for condition in plan.conditions:
        if condition not in datasets:
            raise ValueError(f"plan needs the {condition!r} dataset")
        train_ids = set(datasets[condition][0].ids.tolist())
        test_ids = set(datasets[condition][1].ids.tolist())
        if train_ids & test_ids:
            raise ValueError(
                f"{condition}: train and test share trajectory ids "
                f"{sorted(train_ids & test_ids)[:5]}")
    out_path = None
    pred_dir = None
    if out_dir is not None:
        out_path = Path(out_dir)
        pred_dir = out_path / "predictions"
        pred_dir.mkdir(parents=True, exist_ok=True)

    manifest: list[dict] = [{"stage": "plan", "seed": plan.seed,
                             "config_hash": plan.config_hash()}]
    cells = [(family.value, condition, T)
             for family in plan.families
             for condition in plan.conditions
             for T in plan.timestep_groups]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_pool_init,
                                 initargs=(plan, datasets)) as pool:
            results = list(pool.map(_pool_cell, cells))
    else:
        results = [_neural_cell(plan, datasets, ModelFamily(f), c, T)
                   for f, c, T in cells]

    rows = []
    for (family_value, condition, T), (row, ids, truth, predicted, seconds) \
            in zip(cells, results):
        rows.append(row)
        manifest.append({"stage": "cell", "method": family_value,
                         "condition": condition, "timesteps": T,
                         "accuracy": round(row.accuracy, 4),
                         "seconds": round(seconds, 3)})
        if pred_dir is not None:
            _dump_predictions(pred_dir, family_value, condition, T,
                              ids, truth, predicted)

    baseline_rows, baseline_dumps = _baseline_rows(plan, datasets, out_path,
                                                   manifest)
    rows.extend(baseline_rows)
    if pred_dir is not None:
        for dump in baseline_dumps:
            _dump_predictions(pred_dir, *dump)
    if out_path is not None:
        with open(out_path / "run_manifest.jsonl", "w") as fh:
            for entry in manifest:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
    return AccuracyReport(rows=tuple(rows))


def emit_report(report: AccuracyReport, out_dir) -> list[Path]:
    """Write per-condition accuracy CSVs plus the combined long format."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    frame = report.to_frame()
    written = []
    for condition in CONDITIONS:
        sub = frame[frame["condition"] == condition]
        path = out_path / f"accuracy_{condition}.csv"
        sub[["method", "timesteps", "accuracy"]].to_csv(
            path, index=False, float_format="%.4f", lineterminator="\n")
        written.append(path)
    combined = out_path / "accuracy_combined.csv"
    frame.to_csv(combined, index=False, float_format="%.4f",
                 lineterminator="\n")
    written.append(combined)
    return written


def read_report(path) -> AccuracyReport:
    """Read back an accuracy_combined.csv emitted by emit_report."""
    frame = pd.read_csv(path)
    fold_cols = [c for c in frame.columns if c.startswith("fold")]
    rows = []
    for rec in frame.itertuples(index=False):
        folds = tuple(getattr(rec, c) for c in fold_cols
                      if pd.notna(getattr(rec, c)))
        rows.append(ReportRow(
            method=rec.method, condition=rec.condition,
            timesteps=int(rec.timesteps), accuracy=float(rec.accuracy),
            fold_val_accuracies=folds or None,
            chosen_fold=None if pd.isna(rec.chosen_fold)
            else int(rec.chosen_fold)))
    return AccuracyReport(rows=tuple(rows))
