import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from core.errors import DomainError
from core.models.streams import RngStream
from core.tools.intervals import (
    block_jackknife, bootstrap_cdf, bootstrap_quantiles, jackknife_mean, jackknife_variance, ks_distance_to_cdf,
    ks_distance_two_samples, median_interval, wilson_interval
)


@given(k=st.integers(0, 500), extra=st.integers(0, 500))
def test_wilson_interval_contains_the_proportion(k, extra):
    n = k + extra if k + extra > 0 else 1
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n + 1e-12
    assert k / n - 1e-12 <= hi <= 1.0


def test_wilson_interval_is_elementwise_and_rejects_empty():
    lo, hi = wilson_interval(np.array([0, 50, 100]), 100)
    assert lo[0] == pytest.approx(0.0, abs=1e-12) and hi[2] == pytest.approx(1.0, abs=1e-12)
    assert lo[1] < 0.5 < hi[1]
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_median_interval_brackets_the_median():
    values = np.sort(np.random.default_rng(2).standard_normal(10_001))
    estimate = median_interval(values)
    assert estimate.lo <= estimate.value <= estimate.hi
    assert estimate.hi - estimate.lo < 0.1


def test_jackknife_mean_covers_the_truth():
    samples = np.random.default_rng(3).normal(2.0, 1.0, 100_000)
    estimate = jackknife_mean(samples)
    assert estimate.lo < estimate.value < estimate.hi
    assert abs(estimate.value - 2.0) < 3.0 * estimate.half_width
    assert estimate.half_width == pytest.approx(1.96 / np.sqrt(samples.size), rel=0.2)


def test_jackknife_variance_matches_sample_variance():
    samples = np.random.default_rng(4).normal(0.0, 3.0, 50_000)
    estimate = jackknife_variance(samples)
    assert estimate.value == pytest.approx(np.var(samples, ddof=1), rel=1e-10)
    assert estimate.lo < estimate.value < estimate.hi
    assert estimate.value == pytest.approx(9.0, rel=0.05)


def test_block_jackknife_of_a_ratio():
    rng = np.random.default_rng(5)
    x = rng.uniform(1.0, 2.0, 20_000)
    y = 3.0 * x
    estimate = block_jackknife({'x': x, 'y': y}, lambda m: m['y'] / m['x'])
    assert estimate.value == pytest.approx(3.0)
    assert estimate.hi - estimate.lo == pytest.approx(0.0, abs=1e-12)


def test_bootstrap_replicates_are_reproducible_and_thread_independent():
    values = np.sort(np.random.default_rng(6).standard_normal(5_000))
    stream = RngStream(master_seed=1, stream_id=1 << 40)
    levels = np.array([0.1, 0.5, 0.9])
    one = bootstrap_quantiles(values, levels, 50, stream, threads=1)
    four = bootstrap_quantiles(values, levels, 50, stream, threads=4)
    np.testing.assert_array_equal(one, four)
    assert one.shape == (50, 3)
    assert np.all(np.isin(one, values))


def test_bootstrap_cdf_spread_matches_binomial():
    values = np.sort(np.random.default_rng(7).standard_normal(4_000))
    replicates = bootstrap_cdf(values, np.array([0.0]), 400, RngStream(master_seed=2, stream_id=1 << 40))
    expected_sd = np.sqrt(0.25 / values.size)
    assert np.std(replicates[:, 0]) == pytest.approx(expected_sd, rel=0.2)


def test_ks_distances():
    rng = np.random.default_rng(8)
    a = np.sort(rng.standard_normal(20_000))
    assert ks_distance_to_cdf(a, stats.norm.cdf) < 0.015
    assert ks_distance_two_samples(a, rng.standard_normal(20_000) + 1.0) > 0.3
