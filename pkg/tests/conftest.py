import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tsaugan.data_pipeline import SequenceSample, SequenceSet, WindowSpec

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def sine_values(k: int, phase: float, freq: float, amp: float, noise: float, rng) -> np.ndarray:
    ts = np.arange(k, dtype=np.float64)
    base = 0.5 + amp * np.sin(2.0 * np.pi * freq * ts / k + phase)
    return base + rng.normal(0.0, noise, size=k)


def make_sine_set(
    n: int,
    window: WindowSpec,
    seed: int = 0,
    noise: float = 0.03,
    split_tag: str = "unsplit",
) -> SequenceSet:
    """Noisy sine samples living directly in normalized [0, 1]-ish space."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.25, 0.4)
        values = sine_values(window.k, phase, freq=2.0, amp=amp, noise=noise, rng=rng)
        samples.append(SequenceSample(values))
    return SequenceSet(samples, window, split_tag)


def write_price_csv(path, n_days: int, seed: int = 0, freq_days: float = 12.0) -> None:
    """Synthetic daily price file: smooth sine around a positive level."""
    rng = np.random.default_rng(seed)
    ts = np.arange(n_days, dtype=np.float64)
    prices = 100.0 + 25.0 * np.sin(2.0 * np.pi * ts / freq_days) + rng.normal(0.0, 1.5, n_days)
    prices = np.maximum(prices, 1.0)
    start = np.datetime64("2015-01-01")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,close\n")
        for i, p in enumerate(prices):
            fh.write(f"{start + np.timedelta64(i, 'D')},{p:.6f}\n")


@pytest.fixture
def tiny_window() -> WindowSpec:
    return WindowSpec(k=6, t=4, s=2)


@pytest.fixture
def small_window() -> WindowSpec:
    return WindowSpec(k=24, t=16, s=8)
