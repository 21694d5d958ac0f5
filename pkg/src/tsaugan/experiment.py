"""Three-phase experiment protocol over many non-overlapping time windows.

Per window: preprocess the slice, train the GAN on train+validation, generate
synthetic samples, then train two forecasters with identical seeds and
configs, one on the real training set and one on the augmented set, and
evaluate both on the same untouched test split.  Paired results are grouped
by (dataset label, K) and summarized with mean improvement, standard error,
and a paired t-test.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .data_pipeline import (
    SequenceSet,
    SplitSpec,
    WindowSpec,
    augment,
    ingest,
    load_price_csv,
)
from .errors import InsufficientWindows, TsauganError
from .forecaster import ForecasterConfig, evaluate_mse, train_forecaster
from .gan_core import DiscriminatorConfig, GeneratorConfig
from .gan_training import TrainingConfig, generate_dataset, train, write_epoch_log_csv
from .metrics import MetricReport, compare_sets
from .seeding import derive_seed
from .stats import AggregateReport, PairedSample, aggregate

logger = logging.getLogger(__name__)

WINDOWS_CSV_COLUMNS = [
    "dataset_id",
    "label",
    "k",
    "status",
    "mse_real",
    "mse_aug",
    "improvement",
    "wasserstein",
    "dtw_dedims",
]
TABLE_CSV_COLUMNS = ["group", "n", "mean_improvement", "se", "t", "p"]


@dataclass(frozen=True)
class WindowRange:
    """One slice [start, end) of one series file."""

    series: str
    start: int
    end: int
    label: str

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid window range [{self.start}, {self.end})")


@dataclass(frozen=True)
class ExperimentSpec:
    windows: tuple[WindowRange, ...]
    window: WindowSpec
    split: SplitSpec = SplitSpec()
    ema_span: int = 5
    split_method: str = "chronological"
    generator: GeneratorConfig = None  # type: ignore[assignment]
    discriminator: DiscriminatorConfig = None  # type: ignore[assignment]
    training: TrainingConfig = TrainingConfig()
    forecaster: ForecasterConfig = ForecasterConfig()
    ratio: float = 1.0
    metric_n: int = 64
    master_seed: int = 0
    select_by: str = "final"
    jobs: int = 1

    def __post_init__(self):
        if self.ratio < 0:
            raise ValueError(f"ratio must be >= 0, got {self.ratio}")
        if self.select_by not in ("final", "dtw_dedims"):
            raise ValueError(f"select_by must be 'final' or 'dtw_dedims', got {self.select_by!r}")
        # model geometry follows the window spec
        g = self.generator or GeneratorConfig(seq_len=self.window.k, patch_size=_default_patch(self.window.k))
        d = self.discriminator or DiscriminatorConfig(seq_len=self.window.k, patch_size=_default_patch(self.window.k))
        object.__setattr__(self, "generator", replace(g, seq_len=self.window.k))
        object.__setattr__(self, "discriminator", replace(d, seq_len=self.window.k))
        object.__setattr__(
            self,
            "forecaster",
            replace(self.forecaster, input_len=self.window.t, horizon=self.window.s),
        )
        _check_non_overlap(self.windows)


def _default_patch(k: int) -> int:
    """Largest divisor of K that is <= 15 (the tuned patch length)."""
    for p in range(min(15, k), 0, -1):
        if k % p == 0:
            return p
    return 1


def _check_non_overlap(windows: tuple[WindowRange, ...]) -> None:
    by_series: dict[str, list[WindowRange]] = {}
    for w in windows:
        by_series.setdefault(w.series, []).append(w)
    for series, ws in by_series.items():
        ws = sorted(ws, key=lambda w: w.start)
        for a, b in zip(ws, ws[1:]):
            if b.start < a.end:
                raise ValueError(
                    f"windows [{a.start}, {a.end}) and [{b.start}, {b.end}) overlap on {series}"
                )


@dataclass
class WindowResult:
    dataset_id: str
    label: str
    k: int
    mse_real: float | None = None
    mse_aug: float | None = None
    metric_report: MetricReport | None = None
    curves_path: str | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def improvement(self) -> float | None:
        if self.mse_real is None or self.mse_aug is None:
            return None
        return self.mse_real - self.mse_aug


def run_window(spec: ExperimentSpec, index: int, out_dir: str | Path | None = None) -> WindowResult:
    """Execute the three phases on one window; failures are captured, not raised."""
    window = spec.windows[index]
    dataset_id = f"{window.label}-k{spec.window.k}-w{index:02d}"
    result = WindowResult(dataset_id=dataset_id, label=window.label, k=spec.window.k)
    try:
        series = load_price_csv(window.series).slice(window.start, window.end)
        train_set, val_set, test_set = ingest(
            series,
            spec.window,
            spec.split,
            ema_span=spec.ema_span,
            seed=derive_seed(spec.master_seed, index, "split"),
            split_method=spec.split_method,
        )
        total = len(train_set) + len(val_set) + len(test_set)
        if total < 10:
            raise TsauganError(f"window yields only {total} samples; need at least 10")

        gan_data = SequenceSet(
            list(train_set.samples) + list(val_set.samples), spec.window, "train"
        )
        t_cfg = replace(spec.training, seed=derive_seed(spec.master_seed, index, "gan"))
        state, logs = train(gan_data, spec.generator, spec.discriminator, t_cfg)
        if out_dir is not None:
            curves = Path(out_dir) / dataset_id / "curves.csv"
            write_epoch_log_csv(logs, curves)
            result.curves_path = str(curves)

        synthetic = generate_dataset(
            state,
            n=max(1, len(train_set)),
            seed=derive_seed(spec.master_seed, index, "generate"),
            use_best=spec.select_by == "dtw_dedims",
        )
        result.metric_report = compare_sets(
            gan_data,
            synthetic,
            n=min(spec.metric_n, len(gan_data), len(synthetic)),
            seed=derive_seed(spec.master_seed, index, "metrics"),
        )

        f_cfg = replace(spec.forecaster, seed=derive_seed(spec.master_seed, index, "forecast"))
        model_real, _ = train_forecaster(train_set, val_set, f_cfg)
        result.mse_real = evaluate_mse(model_real, test_set).mse

        aug_set = augment(train_set, synthetic, spec.ratio)
        model_aug, _ = train_forecaster(aug_set, val_set, f_cfg)
        result.mse_aug = evaluate_mse(model_aug, test_set).mse
    except Exception as exc:  # a bad window must not sink the batch
        logger.warning("window %s failed: %s", dataset_id, exc)
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _run_window_task(args: tuple[ExperimentSpec, int, str | None]) -> WindowResult:
    spec, index, out_dir = args
    return run_window(spec, index, out_dir)


def run_experiment(
    spec: ExperimentSpec, out_dir: str | Path | None = None
) -> tuple[list[WindowResult], list[AggregateReport]]:
    """Run every window, aggregate per (label, K) group, write the report files."""
    out_str = str(out_dir) if out_dir is not None else None
    if spec.jobs > 1:
        tasks = [(spec, i, out_str) for i in range(len(spec.windows))]
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_window_task, tasks))
    else:
        results = [run_window(spec, i, out_str) for i in range(len(spec.windows))]

    groups: dict[tuple[str, int], list[PairedSample]] = {}
    for r in results:
        if r.ok:
            groups.setdefault((r.label, r.k), []).append(
                PairedSample(r.mse_real, r.mse_aug, r.dataset_id)
            )
    reports: list[AggregateReport] = []
    for (label, k), pairs in sorted(groups.items()):
        if len(pairs) < 2:
            logger.warning(
                "group %s-%d has %d usable window(s); need 2 for the t-test, skipping",
                label, k, len(pairs),
            )
            continue
        reports.append(aggregate(pairs, f"{label}-{k}"))

    if out_dir is not None:
        write_experiment_outputs(results, reports, out_dir)
    return results, reports


def write_experiment_outputs(
    results: list[WindowResult], reports: list[AggregateReport], out_dir: str | Path
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = lambda v: "" if v is None else repr(float(v))

    with (out / "windows.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(WINDOWS_CSV_COLUMNS)
        for r in results:
            writer.writerow(
                [
                    r.dataset_id,
                    r.label,
                    str(r.k),
                    "ok" if r.ok else r.error,
                    fmt(r.mse_real),
                    fmt(r.mse_aug),
                    fmt(r.improvement),
                    fmt(r.metric_report.wasserstein if r.metric_report else None),
                    fmt(r.metric_report.dtw_dedims if r.metric_report else None),
                ]
            )

    with (out / "table1.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TABLE_CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())

    summary = {
        "windows_total": len(results),
        "windows_ok": sum(1 for r in results if r.ok),
        "windows_failed": sum(1 for r in results if not r.ok),
        "groups_reported": len(reports),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")


# --- spec JSON loading ---

def experiment_spec_from_dict(data: dict) -> ExperimentSpec:
    window = WindowSpec(**data["window"])
    split = SplitSpec(**data["split"]) if "split" in data else SplitSpec()
    windows = tuple(WindowRange(**w) for w in data["windows"])

    def cfg(cls, key):
        if key not in data:
            return None
        merged = {"patch_size": _default_patch(window.k), **data[key], "seq_len": window.k}
        return cls(**merged)

    generator = cfg(GeneratorConfig, "generator")
    discriminator = cfg(DiscriminatorConfig, "discriminator")
    training = TrainingConfig(**_with_betas(data.get("training", {})))
    forecaster = ForecasterConfig(
        **{**data.get("forecaster", {}), "input_len": window.t, "horizon": window.s}
    )
    return ExperimentSpec(
        windows=windows,
        window=window,
        split=split,
        ema_span=int(data.get("ema_span", 5)),
        split_method=data.get("split_method", "chronological"),
        generator=generator,
        discriminator=discriminator,
        training=training,
        forecaster=forecaster,
        ratio=float(data.get("ratio", 1.0)),
        metric_n=int(data.get("metric_n", 64)),
        master_seed=int(data.get("master_seed", 0)),
        select_by=data.get("select_by", "final"),
        jobs=int(data.get("jobs", 1)),
    )


def _with_betas(training: dict) -> dict:
    training = dict(training)
    if "betas" in training:
        training["betas"] = tuple(training["betas"])
    return training


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    with Path(path).open(encoding="utf-8") as fh:
        return experiment_spec_from_dict(json.load(fh))
