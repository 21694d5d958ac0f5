import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsaugan.errors import InvalidDf, TooFewSamples, ZeroVariance
from tsaugan.stats import (
    AggregateReport,
    PairedSample,
    aggregate,
    paired_t_test,
    regularized_incomplete_beta,
    student_t_sf,
)


def t_sf_reference(t, df):
    """High-precision two-sided survival via mpmath's incomplete beta."""
    mpmath.mp.dps = 50
    x = mpmath.mpf(df) / (df + mpmath.mpf(t) ** 2)
    return float(mpmath.betainc(mpmath.mpf(df) / 2, mpmath.mpf(1) / 2, 0, x, regularized=True))


# --- student_t_sf ---

def test_sf_at_zero_is_one():
    assert student_t_sf(0.0, 5) == 1.0


def test_sf_cauchy_closed_form():
    # df=1: two-sided p for t=1 is 2*(1 - (1/2 + atan(1)/pi)) = 0.5
    assert student_t_sf(1.0, 1) == pytest.approx(0.5, abs=1e-10)


def test_sf_df2_closed_form():
    # df=2: CDF(t) = (1 + t/sqrt(2 + t^2)) / 2
    t = 3.4641
    expected = 2.0 * (1.0 - 0.5 * (1.0 + t / math.sqrt(2.0 + t * t)))
    assert student_t_sf(t, 2) == pytest.approx(expected, abs=1e-10)
    assert student_t_sf(t, 2) == pytest.approx(0.0742, abs=1e-4)


def test_sf_matches_reference_grid():
    for df in (1, 2, 3, 5, 10, 30, 100):
        for t in (0.01, 0.5, 1.0, 2.5, 7.0, 20.0, 50.0):
            assert student_t_sf(t, df) == pytest.approx(t_sf_reference(t, df), abs=1e-8)
            assert student_t_sf(-t, df) == student_t_sf(t, df)


def test_sf_invalid_df():
    with pytest.raises(InvalidDf):
        student_t_sf(1.0, 0)


@given(
    st.integers(min_value=1, max_value=100),
    st.floats(min_value=0.01, max_value=50.0),
    st.floats(min_value=0.02, max_value=2.0),
)
def test_sf_monotone_in_t(df, t, bump):
    assert student_t_sf(t + bump, df) < student_t_sf(t, df)


def test_incomplete_beta_endpoints():
    assert regularized_incomplete_beta(0.0, 2.0, 3.0) == 0.0
    assert regularized_incomplete_beta(1.0, 2.0, 3.0) == 1.0


# --- paired_t_test ---

def test_t_test_known_values():
    t, p, df = paired_t_test([1.0, 2.0, 3.0])
    assert t == pytest.approx(3.4641, abs=1e-3)
    assert p == pytest.approx(0.0742, abs=1e-3)
    assert df == 2


def test_t_test_zero_variance():
    with pytest.raises(ZeroVariance):
        paired_t_test([2.0, 2.0, 2.0])


def test_t_test_too_few():
    with pytest.raises(TooFewSamples):
        paired_t_test([1.0])


def test_t_test_symmetric_diffs():
    t, p, df = paired_t_test([-1.0, 1.0])
    assert t == 0.0
    assert p == 1.0
    assert df == 1


@given(
    st.lists(st.integers(min_value=-1000, max_value=1000), min_size=3, max_size=20),
    st.floats(min_value=0.001, max_value=1000.0),
)
def test_t_test_scale_invariance_and_sign_antisymmetry(raw, scale):
    diffs = [r / 10.0 for r in raw]
    if max(diffs) == min(diffs):
        diffs = diffs + [max(diffs) + 1.0]
    t, p, df = paired_t_test(diffs)
    t_scaled, p_scaled, _ = paired_t_test([d * scale for d in diffs])
    assert t_scaled == pytest.approx(t, abs=1e-9, rel=1e-9)
    assert p_scaled == pytest.approx(p, abs=1e-9, rel=1e-9)
    t_neg, p_neg, _ = paired_t_test([-d for d in diffs])
    assert t_neg == pytest.approx(-t, abs=1e-12, rel=1e-12)
    assert p_neg == pytest.approx(p, abs=1e-12, rel=1e-12)


# --- aggregate ---

def pairs_from_diffs(diffs):
    return [PairedSample(mse_real=1.0 + d, mse_aug=1.0, dataset_id=f"w{i}") for i, d in enumerate(diffs)]


def test_aggregate_known_se():
    report = aggregate(pairs_from_diffs([1.0, 2.0, 3.0]), "toy")
    assert report.mean_improvement == pytest.approx(2.0)
    assert report.se == pytest.approx(0.5774, abs=1e-4)
    assert report.t_stat == pytest.approx(3.4641, abs=1e-3)
    assert report.n == 3
    assert not report.degenerate


def test_aggregate_se_reconstruction_at_reference_shape():
    # n=10 diffs with sd 0.0759 must reconstruct se = sd/sqrt(10) = 0.024
    sd_target = 0.0759
    base = [-1.5, -1.0, -0.5, 0.0, 0.0, 0.0, 0.5, 1.0, 1.5, 0.0]
    sd_base = math.sqrt(sum(d * d for d in base) / 9)
    diffs = [0.102 + d * sd_target / sd_base for d in base]
    report = aggregate(pairs_from_diffs(diffs), "reference")
    assert report.mean_improvement == pytest.approx(0.102, abs=1e-9)
    assert report.se == pytest.approx(0.024, abs=1e-3)


def test_aggregate_degenerate_pairs():
    pairs = [PairedSample(0.5, 0.5, f"w{i}") for i in range(4)]
    report = aggregate(pairs, "flat")
    assert report.degenerate
    assert report.mean_improvement == 0.0
    assert report.t_stat is None and report.p_value is None
    row = report.csv_row()
    assert row == ["flat", "4", "0.0", "0.0", "", ""]


def test_aggregate_too_few_pairs():
    with pytest.raises(TooFewSamples):
        aggregate(pairs_from_diffs([1.0]), "x")


def test_se_formula_matches_sample_std():
    diffs = [0.3, -0.7, 1.1, 0.2, 0.9]
    report = aggregate(pairs_from_diffs(diffs), "x")
    m = sum(diffs) / len(diffs)
    sd = math.sqrt(sum((d - m) ** 2 for d in diffs) / (len(diffs) - 1))
    assert report.se * math.sqrt(len(diffs)) == pytest.approx(sd, abs=1e-12)


def test_paired_sample_rejects_negative_mse():
    with pytest.raises(ValueError):
        PairedSample(-0.1, 0.2, "w0")
