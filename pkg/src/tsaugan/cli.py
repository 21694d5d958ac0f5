"""Command-line interface.

Subcommands cover the whole workflow: ``ingest`` raw prices into normalized
split sample sets, ``train-gan`` / ``generate`` for synthesis, ``metrics
compare`` for quality reports, ``train-forecaster`` / ``forecast eval`` for
the downstream model, and ``experiment run`` for the full paired protocol.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .data_pipeline import (
    SplitSpec,
    WindowSpec,
    ingest as ingest_series,
    load_price_csv,
    load_sequence_set,
    save_sequence_set,
    SequenceSet,
)
from .errors import TsauganError
from .experiment import _default_patch, load_experiment_spec, run_experiment
from .forecaster import (
    ForecasterConfig,
    evaluate_mse,
    load_forecaster_checkpoint,
    save_forecaster_checkpoint,
    train_forecaster,
)
from .gan_core import DiscriminatorConfig, GeneratorConfig
from .gan_training import (
    TrainingConfig,
    generate_dataset,
    load_training_checkpoint,
    train,
    write_epoch_log_csv,
)
from .metrics import compare_sets


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


@click.group()
def cli():
    """Time-series augmentation with a transformer GAN."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@cli.command("ingest")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ema-span", default=5, show_default=True, type=int)
@click.option("--k", required=True, type=int, help="Total sample length.")
@click.option("--t", required=True, type=int, help="Observation length (S = K - T).")
@click.option("--stride", default=1, show_default=True, type=int)
@click.option("--train-frac", default=0.6, show_default=True, type=float)
@click.option("--val-frac", default=0.2, show_default=True, type=float)
@click.option("--test-frac", default=0.2, show_default=True, type=float)
@click.option("--split", "split_method", default="chronological", show_default=True,
              type=click.Choice(["chronological", "random"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def ingest_cmd(input_path, ema_span, k, t, stride, train_frac, val_frac, test_frac,
               split_method, seed, out_dir):
    """Smooth, window, normalize, and split a price CSV into sample sets."""
    if t >= k:
        raise click.UsageError(f"--t must be smaller than --k (got t={t}, k={k})")
    window = WindowSpec(k=k, t=t, s=k - t, stride=stride)
    split = SplitSpec(train_frac, val_frac, test_frac)
    series = load_price_csv(input_path)
    train_set, val_set, test_set = ingest_series(
        series, window, split, ema_span=ema_span, seed=seed, split_method=split_method
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_sequence_set(train_set, out / "train.json")
    save_sequence_set(val_set, out / "validation.json")
    save_sequence_set(test_set, out / "test.json")
    merged = SequenceSet(
        list(train_set.samples) + list(val_set.samples), window, "train"
    )
    save_sequence_set(merged, out / "train_val.json")
    click.echo(
        f"wrote {len(train_set)} train / {len(val_set)} validation / {len(test_set)} test "
        f"samples to {out}"
    )


@cli.command("train-gan")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="SequenceSet JSON, typically the train+validation samples.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--log", "log_path", type=click.Path(dir_okay=False))
@click.option("--resume", "resume_path", type=click.Path())
def train_gan_cmd(data_path, config_path, out_dir, log_path, resume_path):
    """Train the GAN, checkpointing and logging metrics at metric epochs."""
    data = load_sequence_set(data_path, split_tag="train")
    cfg = _load_json(config_path)
    k = data.window.k
    patch = _default_patch(k)
    g_cfg = GeneratorConfig(**{"patch_size": patch, **cfg.get("generator", {}), "seq_len": k})
    d_cfg = DiscriminatorConfig(**{"patch_size": patch, **cfg.get("discriminator", {}), "seq_len": k})
    training = dict(cfg.get("training", {}))
    if "betas" in training:
        training["betas"] = tuple(training["betas"])
    t_cfg = TrainingConfig(**training)
    state, logs = train(data, g_cfg, d_cfg, t_cfg, checkpoint_dir=out_dir, resume_from=resume_path)
    if log_path:
        write_epoch_log_csv(logs, log_path)
    click.echo(f"trained {state.epoch} epochs; checkpoints in {out_dir}")


@cli.command("generate")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path())
@click.option("--n", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--use-best", is_flag=True, help="Use the lowest-DTW-dissimilarity snapshot.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def generate_cmd(ckpt_path, n, seed, use_best, out_path):
    """Sample synthetic sequences from a trained generator checkpoint."""
    state = load_training_checkpoint(ckpt_path)
    synthetic = generate_dataset(state, n=n, seed=seed, use_best=use_best)
    save_sequence_set(synthetic, out_path)
    click.echo(f"wrote {n} synthetic samples to {out_path}")


@cli.group("metrics")
def metrics_group():
    """Generation-quality metrics."""


@metrics_group.command("compare")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", type=int, default=None, help="Subsample size (default min(64, set sizes)).")
@click.option("--seed", default=0, show_default=True, type=int)
def metrics_compare_cmd(path_a, path_b, n, seed):
    """Print the Wasserstein + DTW dissimilarity report for two sets."""
    set_a = load_sequence_set(path_a)
    set_b = load_sequence_set(path_b)
    report = compare_sets(set_a, set_b, n=n, seed=seed)
    click.echo(json.dumps(report.to_dict()))


@cli.command("train-forecaster")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--val", "val_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def train_forecaster_cmd(train_path, val_path, config_path, out_dir):
    """Train the LSTM forecaster and save the best-validation snapshot."""
    train_set = load_sequence_set(train_path, split_tag="train")
    val_set = load_sequence_set(val_path, split_tag="validation")
    cfg_dict = _load_json(config_path)
    cfg = ForecasterConfig(
        **{**cfg_dict, "input_len": train_set.window.t, "horizon": train_set.window.s}
    )
    model, history = train_forecaster(train_set, val_set, cfg)
    out = Path(out_dir)
    save_forecaster_checkpoint(model, out / "final.ckpt")
    best = min(history) if history else None
    click.echo(f"saved forecaster to {out / 'final.ckpt'} (best validation loss: {best})")


@cli.group("forecast")
def forecast_group():
    """Forecaster inference and evaluation."""


@forecast_group.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
def forecast_eval_cmd(model_path, test_path):
    """Evaluate forecast MSE on a held-out set and print the result JSON."""
    model = load_forecaster_checkpoint(model_path)
    test_set = load_sequence_set(test_path, split_tag="test")
    result = evaluate_mse(model, test_set)
    click.echo(json.dumps(result.to_dict()))


@cli.group("experiment")
def experiment_group():
    """Paired real-vs-augmented forecasting experiments."""


@experiment_group.command("run")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def experiment_run_cmd(spec_path, out_dir):
    """Run every window in the spec and write windows.csv / table1.csv."""
    spec = load_experiment_spec(spec_path)
    results, reports = run_experiment(spec, out_dir)
    ok = sum(1 for r in results if r.ok)
    click.echo(f"{ok}/{len(results)} windows succeeded; {len(reports)} group report(s) in {out_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except TsauganError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
