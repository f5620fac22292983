import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from core.errors import DomainError
from core.models.streams import RngStream
from core.settings import GaussianMethod
from core.tools.gaussian import (
    abs_moment, gaussian_expectation, sample_gaussian_matrix, sample_gaussian_vector, sigma_p, std_normal_cdf,
    std_normal_pdf, std_normal_quantile
)


def test_quantile_inverts_cdf_on_wide_grid():
    x = np.linspace(-8.0, 5.0, 2601)
    assert np.max(np.abs(std_normal_quantile(std_normal_cdf(x)) - x)) <= 1e-9


@given(st.floats(min_value=1e-300, max_value=1.0 - 1e-16))
@settings(max_examples=300, deadline=None)
def test_cdf_inverts_quantile(p):
    x = std_normal_quantile(p)
    assert math.isclose(std_normal_cdf(x), p, rel_tol=1e-9, abs_tol=1e-15)


def test_quantile_symmetry_and_center():
    assert std_normal_quantile(0.5) == 0.0
    assert_allclose(std_normal_quantile(0.975), 1.959963984540054, rtol=1e-12)
    p = np.array([1e-10, 0.01, 0.2, 0.4])
    assert_allclose(std_normal_quantile(p), -std_normal_quantile(1.0 - p), rtol=1e-9)


@pytest.mark.parametrize('p', [0.0, -0.1, 1.0, 1.5, float('nan')])
def test_quantile_rejects_out_of_range(p):
    with pytest.raises(DomainError):
        std_normal_quantile(p)


def test_pdf_matches_closed_form():
    assert_allclose(std_normal_pdf(0.0), 1.0 / math.sqrt(2.0 * math.pi))
    assert_allclose(std_normal_pdf(np.array([1.0, -1.0])), np.exp(-0.5) / math.sqrt(2.0 * math.pi))


@pytest.mark.parametrize('p', [0.5, 1.0, 2.0, 3.0, 4.0, 7.5])
def test_abs_moment_matches_quadrature(p):
    assert math.isclose(abs_moment(p), gaussian_expectation(lambda t: abs(t) ** p, points=[0.0]), rel_tol=1e-8)


def test_abs_moment_known_values():
    assert abs_moment(0) == pytest.approx(1.0)
    assert abs_moment(1) == pytest.approx(math.sqrt(2.0 / math.pi))
    assert abs_moment(2) == pytest.approx(1.0)
    assert abs_moment(4) == pytest.approx(3.0)


def test_sigma_p_is_positive_part_norm():
    assert sigma_p(2.0) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(DomainError):
        sigma_p(0.0)
    with pytest.raises(DomainError):
        abs_moment(-1.0)


def test_same_stream_replays_same_draws():
    stream = RngStream(master_seed=7, stream_id=3)
    first, advanced = sample_gaussian_vector(stream, 16)
    again, _ = sample_gaussian_vector(stream, 16)
    np.testing.assert_array_equal(first, again)

    following, _ = sample_gaussian_vector(advanced, 16)
    assert not np.array_equal(first, following)


@pytest.mark.parametrize('method', list(GaussianMethod))
def test_gaussian_matrix_moments(method):
    matrix, _ = sample_gaussian_matrix(RngStream(master_seed=11), 400, 250, method)
    assert matrix.shape == (400, 250)
    assert abs(matrix.mean()) < 0.01
    assert abs(matrix.var() - 1.0) < 0.02


def test_gaussian_matrix_rejects_empty_shape():
    with pytest.raises(DomainError):
        sample_gaussian_matrix(RngStream(master_seed=1), 0, 3)
