"""Price-series preprocessing: smoothing, windowing, leak-free scaling, splits.

The pipeline turns a raw daily price CSV into normalized fixed-length samples:

    load_price_csv -> ema_smooth -> make_windows -> normalize_set -> split_dataset

Each K-point sample holds T observation points followed by S forecast points
(K = T + S).  Min-max scaling parameters are computed from the first T points
only, so nothing from the forecast horizon leaks into the scaler.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSample,
    DuplicateTimestamp,
    EmptySeries,
    EmptySet,
    InsufficientSynthetic,
    InvalidSpan,
    ParseError,
    SeriesTooShort,
    WindowMismatch,
)

logger = logging.getLogger(__name__)

ORIGINS = ("real", "synthetic")
SPLIT_TAGS = ("train", "validation", "test", "unsplit")


@dataclass(frozen=True)
class WindowSpec:
    """Sample geometry: K total points = T observed + S forecast, plus stride."""

    k: int
    t: int
    s: int
    stride: int = 1

    def __post_init__(self):
        for name in ("k", "t", "s", "stride"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.k != self.t + self.s:
            raise ValueError(f"k must equal t + s ({self.k} != {self.t} + {self.s})")


@dataclass(frozen=True)
class ScalerParams:
    """Min-max parameters, always computed from the observation window only."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("scaler bounds must be finite")
        if self.x_max < self.x_min:
            raise ValueError("x_max must be >= x_min")


IDENTITY_SCALER = ScalerParams(0.0, 1.0)


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(not (0.0 < f < 1.0) for f in fracs):
            raise ValueError(f"split fractions must each lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing prices with strictly increasing calendar dates."""

    timestamps: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if len(self.timestamps) != len(values):
            raise ValueError("timestamps and values must have the same length")
        if len(values) == 0:
            raise EmptySeries("price series is empty")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise ValueError("prices must be finite and > 0")

    def __len__(self):
        return len(self.values)

    def slice(self, start: int, end: int) -> "PriceSeries":
        return PriceSeries(self.timestamps[start:end], self.values[start:end])


@dataclass
class SequenceSample:
    """One K-length window.  ``scaler`` is the identity until normalized."""

    values: np.ndarray
    scaler: ScalerParams = IDENTITY_SCALER
    origin: str = "real"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError("sample values must be one-dimensional")
        if self.origin not in ORIGINS:
            raise ValueError(f"origin must be one of {ORIGINS}, got {self.origin!r}")


@dataclass
class SequenceSet:
    """An ordered collection of same-length samples plus split provenance."""

    samples: list[SequenceSample]
    window: WindowSpec
    split_tag: str = "unsplit"

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise ValueError(f"split_tag must be one of {SPLIT_TAGS}")
        for s in self.samples:
            if len(s.values) != self.window.k:
                raise ValueError(
                    f"sample length {len(s.values)} does not match window k={self.window.k}"
                )

    def __len__(self):
        return len(self.samples)

    def values_matrix(self) -> np.ndarray:
        """Stack sample values into an (n, K) float64 array."""
        if not self.samples:
            return np.empty((0, self.window.k), dtype=np.float64)
        return np.stack([s.values for s in self.samples])

    def retag(self, split_tag: str) -> "SequenceSet":
        return SequenceSet(self.samples, self.window, split_tag)


def load_price_csv(path: str | Path) -> PriceSeries:
    """Read a two-column ``date,close`` CSV into a date-sorted PriceSeries.

    Rows may arrive out of order; duplicate dates are rejected.  Malformed
    rows raise ParseError naming the offending line number.
    """
    path = Path(path)
    rows: list[tuple[date, float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptySeries(f"{path}: file is empty")
        if [c.strip() for c in header] != ["date", "close"]:
            raise ParseError(f"{path}: expected header 'date,close', got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                ts = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad date {row[0]!r}")
            try:
                price = float(row[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric price {row[1]!r}")
            if not math.isfinite(price) or price <= 0.0:
                raise ParseError(f"{path}:{lineno}: price must be finite and > 0, got {row[1]!r}")
            rows.append((ts, price))
    if not rows:
        raise EmptySeries(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise DuplicateTimestamp(f"{path}: duplicate date {a.isoformat()}")
    return PriceSeries(tuple(r[0] for r in rows), np.array([r[1] for r in rows]))


def ema_smooth(series: PriceSeries, span: int) -> PriceSeries:
    """Backward-looking exponential moving average with alpha = 2 / (span + 1).

    Causal: y[0] = x[0] and y[t] = alpha * x[t] + (1 - alpha) * y[t-1], so the
    smoothed value at t depends only on x[0..t].
    """
    if not isinstance(span, int) or span < 1:
        raise InvalidSpan(f"span must be an integer >= 1, got {span!r}")
    x = series.values
    alpha = 2.0 / (span + 1)
    y = np.empty_like(x)
    y[0] = x[0]
    for i in range(1, len(x)):
        y[i] = alpha * x[i] + (1.0 - alpha) * y[i - 1]
    return PriceSeries(series.timestamps, y)


def make_windows(series: PriceSeries, spec: WindowSpec) -> SequenceSet:
    """Cut the series into overlapping K-length samples at the given stride.

    Sample i covers indices [i*stride, i*stride + K); samples are emitted raw
    (identity scaler) in time order.
    """
    n = len(series)
    if n < spec.k:
        raise SeriesTooShort(f"series length {n} < window k={spec.k}")
    count = (n - spec.k) // spec.stride + 1
    samples = [
        SequenceSample(series.values[i * spec.stride : i * spec.stride + spec.k].copy())
        for i in range(count)
    ]
    return SequenceSet(samples, spec, split_tag="unsplit")


def normalize_sample(sample: SequenceSample, spec: WindowSpec) -> SequenceSample:
    """Min-max scale a sample using bounds from its first T points only.

    Forecast-window values may land outside [0, 1]; they are never clamped.
    A constant observation window has no usable range and raises
    DegenerateSample.
    """
    if len(sample.values) != spec.k:
        raise WindowMismatch(f"sample length {len(sample.values)} != k={spec.k}")
    obs = sample.values[: spec.t]
    x_min = float(obs.min())
    x_max = float(obs.max())
    if x_max <= x_min:
        raise DegenerateSample(f"constant observation window (value={x_min})")
    scaled = (sample.values - x_min) / (x_max - x_min)
    return SequenceSample(scaled, ScalerParams(x_min, x_max), sample.origin)


def denormalize_sample(sample: SequenceSample) -> SequenceSample:
    """Invert normalize_sample using the scaler stored on the sample."""
    raw = sample.values * (sample.scaler.x_max - sample.scaler.x_min) + sample.scaler.x_min
    return SequenceSample(raw, IDENTITY_SCALER, sample.origin)


def normalize_set(sset: SequenceSet) -> SequenceSet:
    """Normalize every sample, dropping degenerate ones with a warning."""
    kept: list[SequenceSample] = []
    dropped = 0
    for i, sample in enumerate(sset.samples):
        try:
            kept.append(normalize_sample(sample, sset.window))
        except DegenerateSample:
            dropped += 1
            logger.warning("dropping sample %d: constant observation window", i)
    if dropped:
        logger.warning("dropped %d/%d degenerate samples", dropped, len(sset.samples))
    return SequenceSet(kept, sset.window, sset.split_tag)


def _split_sizes(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    sizes = [int(n * spec.train_frac), int(n * spec.val_frac), int(n * spec.test_frac)]
    # leftover samples go to train, then validation, then test
    for i in range(n - sum(sizes)):
        sizes[i % 3] += 1
    return sizes[0], sizes[1], sizes[2]


def split_dataset(
    sset: SequenceSet,
    spec: SplitSpec,
    seed: int,
    method: str = "chronological",
) -> tuple[SequenceSet, SequenceSet, SequenceSet]:
    """Partition a set into train / validation / test.

    The default chronological split keeps time order (train earliest, test
    latest) so overlapping windows cannot leak future data into training.
    ``method="random"`` draws a seeded permutation instead, for ablations.
    """
    if len(sset) == 0:
        raise EmptySet("cannot split an empty set")
    if method not in ("chronological", "random"):
        raise ValueError(f"unknown split method {method!r}")
    n_train, n_val, _ = _split_sizes(len(sset), spec)
    order = list(range(len(sset)))
    if method == "random":
        order = list(np.random.default_rng(seed).permutation(len(sset)))
    picks = [sset.samples[i] for i in order]
    train = SequenceSet(picks[:n_train], sset.window, "train")
    val = SequenceSet(picks[n_train : n_train + n_val], sset.window, "validation")
    test = SequenceSet(picks[n_train + n_val :], sset.window, "test")
    return train, val, test


def augment(train: SequenceSet, synthetic: SequenceSet, ratio: float) -> SequenceSet:
    """Append ratio * |train| synthetic samples to the training set.

    Synthetic samples are consumed without replacement in generation order;
    origin tags are preserved so provenance stays auditable downstream.
    """
    if ratio < 0:
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    if ratio == 0:
        return train
    if synthetic.window.k != train.window.k:
        raise WindowMismatch(
            f"synthetic k={synthetic.window.k} != train k={train.window.k}"
        )
    need = math.floor(ratio * len(train) + 0.5)
    if need > len(synthetic):
        raise InsufficientSynthetic(f"need {need} synthetic samples, have {len(synthetic)}")
    combined = list(train.samples) + [
        replace(s, origin="synthetic") for s in synthetic.samples[:need]
    ]
    return SequenceSet(combined, train.window, train.split_tag)


# --- SequenceSet JSON file format ---

def sequence_set_to_dict(sset: SequenceSet) -> dict:
    return {
        "k": sset.window.k,
        "t": sset.window.t,
        "s": sset.window.s,
        "samples": [
            {
                "values": [float(v) for v in s.values],
                "origin": s.origin,
                "scaler": {"min": s.scaler.x_min, "max": s.scaler.x_max},
            }
            for s in sset.samples
        ],
    }


def sequence_set_from_dict(data: dict, split_tag: str = "unsplit") -> SequenceSet:
    window = WindowSpec(k=int(data["k"]), t=int(data["t"]), s=int(data["s"]))
    samples = [
        SequenceSample(
            np.asarray(s["values"], dtype=np.float64),
            ScalerParams(float(s["scaler"]["min"]), float(s["scaler"]["max"])),
            s["origin"],
        )
        for s in data["samples"]
    ]
    return SequenceSet(samples, window, split_tag)


def save_sequence_set(sset: SequenceSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(sequence_set_to_dict(sset), fh)


def load_sequence_set(path: str | Path, split_tag: str = "unsplit") -> SequenceSet:
    with Path(path).open(encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})")
    return sequence_set_from_dict(data, split_tag)


def ingest(
    series: PriceSeries,
    window: WindowSpec,
    split: SplitSpec,
    *,
    ema_span: int = 5,
    seed: int = 0,
    split_method: str = "chronological",
) -> tuple[SequenceSet, SequenceSet, SequenceSet]:
    """Full preprocessing chain: smooth, window, normalize, split."""
    smoothed = ema_smooth(series, ema_span)
    windows = make_windows(smoothed, window)
    normalized = normalize_set(windows)
    return split_dataset(normalized, split, seed, method=split_method)
