"""Paired-experiment statistics: mean improvement, standard error, paired t-test.

The two-sided p-value comes from the Student-t distribution evaluated through
the regularized incomplete beta function (Lentz continued fraction), so the
module has no dependencies beyond the standard library.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidDf, TooFewSamples, ZeroVariance

_CF_TOL = 1e-12
_CF_MAX_ITER = 300


@dataclass(frozen=True)
class PairedSample:
    """Test MSE of one real-only / augmented model pair on the same split."""

    mse_real: float
    mse_aug: float
    dataset_id: str

    def __post_init__(self):
        for name in ("mse_real", "mse_aug"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class AggregateReport:
    """One summary row over a group of paired runs.

    ``mean_improvement`` is mean(mse_real - mse_aug): positive means the
    augmented model had lower error.  ``t_stat`` and ``p_value`` are absent
    when the differences have zero variance (``degenerate`` is set instead).
    """

    group_label: str
    n: int
    mean_improvement: float
    se: float
    t_stat: float | None
    p_value: float | None
    degenerate: bool = False

    def csv_row(self) -> list[str]:
        fmt = lambda v: "" if v is None else repr(float(v))
        return [
            self.group_label,
            str(self.n),
            repr(float(self.mean_improvement)),
            repr(float(self.se)),
            fmt(self.t_stat),
            fmt(self.p_value),
        ]


def _mean(xs) -> float:
    return sum(xs) / len(xs)


def _sample_std(xs) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def _beta_cont_fraction(a: float, b: float, x: float) -> float:
    """Lentz evaluation of the incomplete-beta continued fraction."""
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    # use whichever tail the continued fraction converges fastest on
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_fraction(a, b, x) / a
    return 1.0 - front * _beta_cont_fraction(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: int) -> float:
    """Two-sided survival value 2 * P(T_df > |t|)."""
    if not isinstance(df, int) or df < 1:
        raise InvalidDf(f"df must be an integer >= 1, got {df!r}")
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(x, df / 2.0, 0.5)


def paired_t_test(diffs) -> tuple[float, float, int]:
    """Paired t-test on a list of differences.

    Returns (t, two-sided p, degrees of freedom) with
    t = mean / (sample_std / sqrt(n)) and df = n - 1.
    """
    diffs = [float(d) for d in diffs]
    n = len(diffs)
    if n < 2:
        raise TooFewSamples(f"need at least 2 differences, got {n}")
    sd = _sample_std(diffs)
    if sd == 0.0:
        raise ZeroVariance("all differences are identical; t statistic undefined")
    t = _mean(diffs) / (sd / math.sqrt(n))
    return t, student_t_sf(t, n - 1), n - 1


def aggregate(pairs: list[PairedSample], label: str) -> AggregateReport:
    """Summarize paired MSE results into one report row.

    Zero-variance differences (e.g. augmentation disabled) produce a
    degenerate report rather than an error: the mean and SE are still
    meaningful, only the t-test is undefined.
    """
    if len(pairs) < 2:
        raise TooFewSamples(f"need at least 2 pairs, got {len(pairs)}")
    diffs = [p.mse_real - p.mse_aug for p in pairs]
    n = len(diffs)
    se = _sample_std(diffs) / math.sqrt(n)
    try:
        t, p, _ = paired_t_test(diffs)
    except ZeroVariance:
        return AggregateReport(label, n, _mean(diffs), se, None, None, degenerate=True)
    return AggregateReport(label, n, _mean(diffs), se, t, p)
