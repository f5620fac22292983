import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from core.errors import CatalogKeyError, DomainError
from core.models.functions import FunctionFamily, RateKind
from core.tools.catalog import (
    DEFAULT_KEYS, dual_extremal, evaluate, evaluate_batch, left_derivative, list_catalog, load_matrix, make_custom,
    make_ellipsoidal, make_galpha, make_lp_norm, make_tilted, parse_key, rate_for, rate_value, right_derivative,
    subgradient, subgradient_batch, tilted_closed_form_k
)
from core.tools.gaussian import gaussian_expectation

NORM_KEYS = ['l1:n=4', 'l2:n=8', 'l4:n=8', 'linf:n=8', 'ellipsoidal:n=8:gap=2', 'tilted:linf:n=8:t=4',
             'tilted:l2:n=8:t=4']
vectors = arrays(np.float64, 8, elements=st.floats(-100, 100, allow_nan=False))


@pytest.mark.parametrize('key', NORM_KEYS)
@given(x=vectors, scale=st.floats(-50, 50, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_norms_are_absolutely_homogeneous(key, x, scale):
    spec = parse_key(key)
    point = x[:spec.dimension]
    assert math.isclose(evaluate(spec, scale * point), abs(scale) * evaluate(spec, point), rel_tol=1e-9,
                        abs_tol=1e-9)


@pytest.mark.parametrize('key', NORM_KEYS)
@given(x=vectors, y=vectors)
@settings(max_examples=50, deadline=None)
def test_norms_satisfy_triangle_inequality(key, x, y):
    spec = parse_key(key)
    a, b = x[:spec.dimension], y[:spec.dimension]
    assert evaluate(spec, a + b) <= evaluate(spec, a) + evaluate(spec, b) + 1e-9


@pytest.mark.parametrize('key', NORM_KEYS)
@given(x=vectors)
@settings(max_examples=50, deadline=None)
def test_norms_are_bounded_by_lipschitz_times_euclidean(key, x):
    spec = parse_key(key)
    point = x[:spec.dimension]
    assert evaluate(spec, point) <= spec.lipschitz * np.linalg.norm(point) * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize('key', NORM_KEYS)
def test_subgradient_supports_the_norm(key):
    spec = parse_key(key)
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((200, spec.dimension))
    gradient = subgradient_batch(spec, Z)
    # Euler's identity for 1-homogeneous functions: ⟨∇f(x), x⟩ = f(x)
    assert_allclose(np.sum(gradient * Z, axis=1), evaluate_batch(spec, Z), rtol=1e-9)
    assert np.all(np.linalg.norm(gradient, axis=1) <= spec.lipschitz * (1 + 1e-9))


def test_subgradient_matches_finite_differences_for_smooth_norms():
    spec = parse_key('l4:n=6')
    x = np.array([0.3, -1.2, 2.0, 0.7, -0.1, 1.1])
    h = 1e-6
    numeric = np.array([(evaluate(spec, x + h * e) - evaluate(spec, x - h * e)) / (2 * h) for e in np.eye(6)])
    assert_allclose(subgradient(spec, x), numeric, rtol=1e-6, atol=1e-8)


def test_lp_lipschitz_constants():
    assert make_lp_norm(16, 1.0).lipschitz == pytest.approx(4.0)
    assert make_lp_norm(16, 4.0).lipschitz == 1.0
    assert make_lp_norm(16, math.inf).family == FunctionFamily.SUP_NORM
    with pytest.raises(DomainError):
        make_lp_norm(4, 0.5)


def test_ellipsoidal_uses_operator_norm():
    spec = make_ellipsoidal(np.diag([3.0, 1.0, 1.0]))
    assert spec.lipschitz == pytest.approx(3.0)
    assert evaluate(spec, np.array([0.0, 4.0, 3.0])) == pytest.approx(5.0)
    with pytest.raises(DomainError):
        make_ellipsoidal(np.zeros((2, 2)))


@pytest.mark.parametrize('key', ['linf:n=8', 'l2:n=8', 'l1:n=8', 'ellipsoidal:n=8:gap=2'])
def test_dual_extremal_has_euclidean_length_b(key):
    spec = parse_key(key)
    x0 = dual_extremal(spec)
    assert np.linalg.norm(x0) == pytest.approx(spec.lipschitz)


def test_ellipsoidal_dual_extremal_follows_the_top_singular_vector():
    spec = make_ellipsoidal(-np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(dual_extremal(spec), [0.0, 3.0, 0.0], atol=1e-12)
    assert evaluate(spec, dual_extremal(spec) / 3.0) == pytest.approx(3.0)


def test_tilted_norm_is_equivalent_to_its_base():
    base = parse_key('linf:n=32')
    tilted = make_tilted(base, 4.0)
    assert tilted.lipschitz == pytest.approx(5.0)
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((500, 32))
    ratio = evaluate_batch(tilted, Z) / evaluate_batch(base, Z)
    assert np.all(ratio >= 1.0 - 1e-12)
    assert np.all(ratio <= 5.0 + 1e-12)
    with pytest.raises(DomainError):
        make_tilted(parse_key('galpha:a=2'), 4.0)


def test_tilted_closed_form_k():
    assert tilted_closed_form_k(100.0, 0.0) == pytest.approx(100.0)
    assert tilted_closed_form_k(16.0, 4.0) == pytest.approx((4.0 + 4.0 * math.sqrt(2.0 / math.pi)) ** 2 / 25.0)


def test_galpha_normalization():
    spec = make_galpha(3.0)
    second_moment = gaussian_expectation(lambda t: evaluate(spec, t) ** 2, points=[3.0])
    mean = gaussian_expectation(lambda t: evaluate(spec, t), points=[3.0])
    tail_second = gaussian_expectation(lambda t: max(t - 3.0, 0.0) ** 2, points=[3.0])
    assert second_moment == pytest.approx(tail_second * spec.params.c_alpha ** 2, rel=1e-6)
    assert spec.reference_variance == pytest.approx(second_moment - mean ** 2, rel=1e-6)
    with pytest.raises(DomainError):
        make_galpha(1.5)


def test_one_sided_derivatives_at_kinks():
    galpha = make_galpha(2.0)
    c = galpha.params.c_alpha
    assert right_derivative(galpha, 2.0) == pytest.approx(c)
    assert left_derivative(galpha, 2.0) == 0.0
    pospart = parse_key('pospart')
    assert right_derivative(pospart, 0.0) == 1.0
    assert left_derivative(pospart, 0.0) == 0.0
    monomial = parse_key('monomial:k=1')
    assert right_derivative(monomial, 1.0) == pytest.approx(3.0, rel=1e-5)
    assert left_derivative(monomial, 1.0) == pytest.approx(3.0, rel=1e-5)


def test_reference_variances():
    assert parse_key('monomial:k=1').reference_variance == 15.0
    assert parse_key('abs').reference_variance == pytest.approx(1.0 - 2.0 / math.pi)
    assert parse_key('linear:n=50').reference_variance == pytest.approx(1.0)


def test_negated_function_flips_values_and_convexity():
    inner = parse_key('linf:n=8')
    negated = parse_key('neg:linf:n=8')
    x = np.arange(8.0) - 3.5
    assert evaluate(negated, x) == -evaluate(inner, x)
    assert not negated.convex
    assert negated.lipschitz == inner.lipschitz


def test_custom_function_without_gradient_uses_finite_differences():
    spec = make_custom('sumsq', 3, lambda batch: np.sum(batch ** 2, axis=1))
    assert_allclose(subgradient(spec, np.array([1.0, -2.0, 0.5])), [2.0, -4.0, 1.0], rtol=1e-5)


@pytest.mark.parametrize('key', DEFAULT_KEYS)
def test_default_keys_resolve_to_themselves(key):
    assert parse_key(key).key == key


def test_n_override_replaces_dimension():
    assert parse_key('linf:n=16', n_override=128).dimension == 128
    assert parse_key('tilted:l2:n=16:t=4', n_override=64).key == 'tilted:l2:n=64:t=4'


@pytest.mark.parametrize('key', ['', 'nope:n=3', 'linf', 'linf:n=x', 'l0.5:n=4', 'galpha', 'linear:n=3:u=weird',
                                 'linf:n'])
def test_bad_keys_raise_catalog_key_error(key):
    with pytest.raises(CatalogKeyError):
        parse_key(key)


def test_list_catalog_mentions_default_registry():
    table = list_catalog()
    assert table.splitlines()[0].split() == ['key', 'family', 'n', 'lipschitz', 'convex']
    for key in ('linf:n=1024', 'tilted:linf:n=256:t=4', 'galpha:a=3'):
        assert key in table


def test_rate_functions():
    inf_rate = rate_for(parse_key('linf:n=100'))
    assert inf_rate.kind == RateKind.ALPHA_INF
    assert rate_value(inf_rate, 0.5) == pytest.approx(0.5 * math.sqrt(math.log(100)))
    assert rate_value(inf_rate, 10.0) == pytest.approx(100.0)

    l4_rate = rate_for(parse_key('l4:n=256'))
    assert rate_value(l4_rate, 4.0) == pytest.approx(16.0)

    ellipsoidal = rate_for(parse_key('ellipsoidal:n=4:gap=2'))
    assert rate_value(ellipsoidal, 0.0) == 0.0
    with pytest.raises(DomainError):
        rate_for(parse_key('l2:n=4'))
    with pytest.raises(DomainError):
        rate_value(inf_rate, -1.0)


def test_load_matrix_reads_column_major(tmp_path):
    path = tmp_path / 'a.txt'
    path.write_text('2 3\n1 2 3 4 5 6\n', encoding='utf-8')
    assert_allclose(load_matrix(path), [[1, 3, 5], [2, 4, 6]])

    spec = parse_key(f'ellipsoidal:file={path}')
    assert spec.dimension == 3

    path.write_text('2 3\n1 2 3\n', encoding='utf-8')
    with pytest.raises(DomainError):
        load_matrix(path)
