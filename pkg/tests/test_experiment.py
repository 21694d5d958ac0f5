import json

import pytest

from tsaugan.experiment import (
    ExperimentSpec,
    WindowRange,
    experiment_spec_from_dict,
    load_experiment_spec,
    run_experiment,
    run_window,
)
from tsaugan.data_pipeline import WindowSpec
from tsaugan.seeding import derive_seed

from conftest import write_price_csv


def micro_spec_dict(csv_path, n_windows=2, window_len=60, ratio=1.0, master_seed=7):
    return {
        "windows": [
            {
                "series": str(csv_path),
                "start": i * window_len,
                "end": (i + 1) * window_len,
                "label": "sine",
            }
            for i in range(n_windows)
        ],
        "window": {"k": 12, "t": 8, "s": 4},
        "split": {"train_frac": 0.6, "val_frac": 0.2, "test_frac": 0.2},
        "ema_span": 3,
        "generator": {"depth": 1, "heads": 1, "embed_dim": 4, "patch_size": 3, "latent_dim": 8},
        "discriminator": {"depth": 1, "heads": 1, "embed_dim": 4, "patch_size": 3},
        "training": {"epochs": 2, "batch_size": 8, "metric_every": 2, "metric_sample_n": 4},
        "forecaster": {"hidden_size": 8, "num_layers": 1, "epochs": 2, "batch_size": 8},
        "metric_n": 4,
        "ratio": ratio,
        "master_seed": master_seed,
    }


@pytest.fixture
def prices_csv(tmp_path):
    path = tmp_path / "prices.csv"
    write_price_csv(path, 130, seed=1)
    return path


# --- seed fan-out ---

def test_derive_seed_is_stable_and_contextual():
    assert derive_seed(7, 0, "gan") == derive_seed(7, 0, "gan")
    assert derive_seed(7, 0, "gan") != derive_seed(7, 1, "gan")
    assert derive_seed(7, 0, "gan") != derive_seed(7, 0, "forecast")
    assert derive_seed(7, 0, "gan") != derive_seed(8, 0, "gan")
    assert 0 <= derive_seed(7, 0, "gan") < 2**63


# --- spec loading ---

def test_spec_from_dict_defaults(prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv))
    assert spec.window == WindowSpec(k=12, t=8, s=4)
    assert spec.generator.seq_len == 12
    assert spec.discriminator.seq_len == 12
    assert spec.forecaster.input_len == 8 and spec.forecaster.horizon == 4
    assert spec.split_method == "chronological"
    assert spec.select_by == "final"


def test_spec_patch_size_defaults_to_divisor_of_k(prices_csv):
    data = micro_spec_dict(prices_csv)
    del data["generator"]["patch_size"]
    spec = experiment_spec_from_dict(data)
    assert spec.window.k % spec.generator.patch_size == 0


def test_spec_rejects_overlapping_windows(prices_csv):
    data = micro_spec_dict(prices_csv)
    data["windows"][1]["start"] = 30
    with pytest.raises(ValueError, match="overlap"):
        experiment_spec_from_dict(data)


def test_spec_allows_same_ranges_on_different_series(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_price_csv(a, 70, seed=1)
    write_price_csv(b, 70, seed=2)
    data = micro_spec_dict(a)
    data["windows"][1]["series"] = str(b)
    data["windows"][1]["start"] = 0
    data["windows"][1]["end"] = 60
    experiment_spec_from_dict(data)  # must not raise


def test_load_experiment_spec_file(tmp_path, prices_csv):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(micro_spec_dict(prices_csv)))
    spec = load_experiment_spec(path)
    assert len(spec.windows) == 2


# --- run_window ---

def test_run_window_micro_smoke(tmp_path, prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv))
    result = run_window(spec, 0, tmp_path)
    assert result.ok, result.error
    assert result.dataset_id == "sine-k12-w00"
    assert result.mse_real is not None and result.mse_real >= 0.0
    assert result.mse_aug is not None and result.mse_aug >= 0.0
    assert result.metric_report is not None
    assert result.metric_report.wasserstein >= 0.0
    assert (tmp_path / "sine-k12-w00" / "curves.csv").exists()


def test_run_window_zero_ratio_pairs_bit_identical(prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv, ratio=0.0))
    result = run_window(spec, 0)
    assert result.ok, result.error
    assert result.mse_real == result.mse_aug


def test_run_window_deterministic(prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv))
    a = run_window(spec, 1)
    b = run_window(spec, 1)
    assert a.ok and b.ok
    assert a.mse_real == b.mse_real
    assert a.mse_aug == b.mse_aug
    assert a.metric_report == b.metric_report


def test_run_window_failure_is_recorded_not_raised(tmp_path, prices_csv):
    data = micro_spec_dict(prices_csv)
    # second window is too short to produce 10 samples
    data["windows"][1] = {"series": str(prices_csv), "start": 60, "end": 75, "label": "sine"}
    spec = experiment_spec_from_dict(data)
    result = run_window(spec, 1)
    assert not result.ok
    assert "samples" in result.error


# --- run_experiment ---

def test_run_experiment_outputs(tmp_path, prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv))
    out = tmp_path / "results"
    results, reports = run_experiment(spec, out)
    assert len(results) == 2
    assert all(r.ok for r in results)
    assert len(reports) == 1
    assert reports[0].group_label == "sine-12"
    assert reports[0].n == 2

    windows_lines = (out / "windows.csv").read_text().strip().splitlines()
    assert windows_lines[0] == "dataset_id,label,k,status,mse_real,mse_aug,improvement,wasserstein,dtw_dedims"
    assert len(windows_lines) == 3

    table_lines = (out / "table1.csv").read_text().strip().splitlines()
    assert table_lines[0] == "group,n,mean_improvement,se,t,p"
    assert len(table_lines) == 2

    summary = json.loads((out / "summary.json").read_text())
    assert summary == {
        "windows_total": 2,
        "windows_ok": 2,
        "windows_failed": 2 - 2,
        "groups_reported": 1,
    }


def test_run_experiment_skips_small_groups(tmp_path, prices_csv, caplog):
    data = micro_spec_dict(prices_csv)
    data["windows"][1] = {"series": str(prices_csv), "start": 60, "end": 75, "label": "sine"}
    spec = experiment_spec_from_dict(data)
    with caplog.at_level("WARNING"):
        results, reports = run_experiment(spec, tmp_path / "r")
    assert sum(r.ok for r in results) == 1
    assert reports == []
    assert "skipping" in caplog.text


def test_run_experiment_deterministic_reports(tmp_path, prices_csv):
    spec = experiment_spec_from_dict(micro_spec_dict(prices_csv))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    run_experiment(spec, out_a)
    run_experiment(spec, out_b)
    assert (out_a / "table1.csv").read_bytes() == (out_b / "table1.csv").read_bytes()
    assert (out_a / "windows.csv").read_bytes() == (out_b / "windows.csv").read_bytes()
