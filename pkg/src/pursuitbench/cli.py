"""Command-line entry point: simulate, preprocess, run, report.

Each stage reads the previous stage's CSVs from the output directory, so
partial reruns reproduce exactly.  The output directory resolves from the
--out flag, then $PURSUITBENCH_OUT, then the config file.
"""
from __future__ import annotations

import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import data as D
from . import experiment as E
from . import sim as S
from .config import RunConfig, load_config
from .rng import STREAM_ROTATION, substream

RAW_CSV = "dataset_raw.csv"
SPLIT_FILES = {
    ("train", "plain"): "train_plain.csv",
    ("test", "plain"): "test_plain.csv",
    ("train", "rotated"): "train_rotated.csv",
    ("test", "rotated"): "test_rotated.csv",
}


def _resolve_config(config_path, out, seed, jobs) -> RunConfig:
    cfg = load_config(config_path) if config_path else RunConfig()
    if out is None:
        out = os.environ.get("PURSUITBENCH_OUT")
    if out is not None:
        cfg = replace(cfg, out_dir=str(out))
    if seed is not None:
        cfg = replace(cfg, master_seed=seed)
    if jobs is not None:
        cfg = replace(cfg, jobs=jobs)
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="YAML run configuration.")
@click.option("--out", type=click.Path(), default=None,
              help="Output directory (overrides $PURSUITBENCH_OUT and config).")
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--jobs", type=int, default=None,
              help="Worker processes for the experiment grid.")
@click.pass_context
def main(ctx, config_path, out, seed, jobs):
    """Pursuit-trajectory classification workbench."""
    ctx.obj = _resolve_config(config_path, out, seed, jobs)


@main.command()
@click.option("--n-per-class", type=int, default=None,
              help="Trajectories per class (default 100).")
@click.pass_obj
def simulate(cfg: RunConfig, n_per_class):
    """Generate the raw labeled trajectory dataset CSV."""
    if n_per_class is not None:
        cfg = replace(cfg, n_per_class=n_per_class)
    out = _out_dir(cfg)
    dataset = S.generate_dataset(cfg.sim_config(), cfg.n_per_class)
    D.export_csv(dataset, out / RAW_CSV)
    click.echo(f"wrote {out / RAW_CSV} ({len(dataset)} trajectories)")


@main.command()
@click.pass_obj
def preprocess(cfg: RunConfig):
    """Split into train/test and emit plain plus rotated CSVs."""
    out = _out_dir(cfg)
    raw_path = out / RAW_CSV
    if not raw_path.exists():
        raise click.ClickException(f"missing {raw_path}; run simulate first")
    dataset = D.import_csv(raw_path)
    train, test = D.split_test(dataset, cfg.split_spec())
    seed = cfg.master_seed
    parts = {
        ("train", "plain"): train,
        ("test", "plain"): test,
        ("train", "rotated"): D.augment_rotations(
            train, substream(seed, STREAM_ROTATION, 0)),
        ("test", "rotated"): D.augment_rotations(
            test, substream(seed, STREAM_ROTATION, 1)),
    }
    for key, part in parts.items():
        D.export_csv(part, out / SPLIT_FILES[key])
        click.echo(f"wrote {out / SPLIT_FILES[key]} ({len(part)} trajectories)")


def _load_split(out: Path) -> dict:
    datasets = {}
    for condition in E.CONDITIONS:
        pair = []
        for role in ("train", "test"):
            path = out / SPLIT_FILES[(role, condition)]
            if not path.exists():
                raise click.ClickException(
                    f"missing {path}; run preprocess first")
            pair.append(D.import_csv(path))
        datasets[condition] = tuple(pair)
    return datasets


def _csv_option(value: str | None) -> tuple[str, ...] | None:
    if value is None:
        return None
    if value.strip().lower() == "none":
        return ()
    return tuple(part.strip() for part in value.split(",") if part.strip())


@main.command()
@click.option("--families", default=None,
              help="Comma-separated model families, or 'none'.")
@click.option("--baselines", default=None,
              help="Comma-separated entropy methods, or 'none'.")
@click.option("--timesteps", default=None,
              help="Comma-separated timestep groups (multiples of 500).")
@click.option("--conditions", default=None,
              help="Comma-separated subset of plain,rotated.")
@click.pass_obj
def run(cfg: RunConfig, families, baselines, timesteps, conditions):
    """Execute the experiment grid and emit accuracy reports."""
    overrides = {}
    if (v := _csv_option(families)) is not None:
        overrides["families"] = v
    if (v := _csv_option(baselines)) is not None:
        overrides["baselines"] = v
    if (v := _csv_option(timesteps)) is not None:
        overrides["timesteps"] = tuple(int(t) for t in v)
    if (v := _csv_option(conditions)) is not None:
        overrides["conditions"] = v
    if overrides:
        cfg = replace(cfg, **overrides)
    try:
        plan = cfg.plan()
    except ValueError as exc:
        raise click.UsageError(str(exc))
    out = _out_dir(cfg)
    datasets = _load_split(out)
    report = E.run_experiment(plan, datasets, out_dir=out, jobs=cfg.jobs)
    for path in E.emit_report(report, out):
        click.echo(f"wrote {path}")
    click.echo(f"{len(report)} cells completed")


@main.command()
@click.pass_obj
def report(cfg: RunConfig):
    """Print the accuracy table from an earlier run."""
    out = Path(cfg.out_dir)
    combined = out / "accuracy_combined.csv"
    if not combined.exists():
        raise click.ClickException(f"missing {combined}; run the grid first")
    rep = E.read_report(combined)
    methods = sorted({r.method for r in rep.rows})
    groups = sorted({r.timesteps for r in rep.rows})
    for condition in E.CONDITIONS:
        rows = [r for r in rep.rows if r.condition == condition]
        if not rows:
            continue
        click.echo(f"\n{condition} test set accuracy")
        header = "method".ljust(22) + "".join(f"{t:>7d}" for t in groups)
        click.echo(header)
        for method in methods:
            cells = {r.timesteps: r.accuracy for r in rows
                     if r.method == method}
            line = method.ljust(22) + "".join(
                f"{cells[t]:7.3f}" if t in cells else "      -" for t in groups)
            click.echo(line)


if __name__ == "__main__":
    main()
