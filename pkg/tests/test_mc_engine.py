import numpy as np
import pytest

from core.errors import DomainError, NonFiniteEvaluationError
from core.labs.mc_engine import CHUNK_SIZE, MonteCarloEngine, estimate_stats, median_mean_chain, tail_curve
from core.settings import GaussianMethod
from core.tools.catalog import make_custom, parse_key


def test_samples_do_not_depend_on_thread_count(seed):
    spec = parse_key('linf:n=16')
    count = 2 * CHUNK_SIZE + 123
    one = MonteCarloEngine(threads=1, method=GaussianMethod.ZIGGURAT).sample_values(spec, count, seed)
    four = MonteCarloEngine(threads=4, method=GaussianMethod.ZIGGURAT).sample_values(spec, count, seed)
    np.testing.assert_array_equal(one.draws, four.draws)
    assert one.streams == (0, 2)
    assert one.count == count


def test_different_seeds_give_different_samples(engine):
    spec = parse_key('linear:n=2')
    a = engine.sample_values(spec, 1_000, 1)
    b = engine.sample_values(spec, 1_000, 2)
    assert not np.array_equal(a.draws, b.draws)


def test_linear_function_is_standard_gaussian(engine, seed):
    emp = engine.sample_values(parse_key('linear:n=50'), 100_000, seed)
    stats = estimate_stats(emp)
    assert stats.mean.value == pytest.approx(0.0, abs=0.02)
    assert stats.variance.value == pytest.approx(1.0, rel=0.03)
    assert stats.moment_norm(2.0).value == pytest.approx(1.0, rel=0.03)
    assert stats.median.lo <= stats.median.value <= stats.median.hi
    with pytest.raises(KeyError):
        stats.moment_norm(3.0)


def test_too_few_samples_is_rejected(engine):
    with pytest.raises(DomainError):
        engine.sample_values(parse_key('linear:n=2'), 10, 1)


def test_non_finite_values_name_the_offending_input(engine):
    spec = make_custom('blowup', 2, lambda Z: np.where(Z[:, 0] > 2.0, np.inf, Z[:, 0]))
    with pytest.raises(NonFiniteEvaluationError) as caught:
        engine.sample_values(spec, 10_000, 1)
    assert caught.value.offending_input[0] > 2.0


def test_tail_curve_is_monotone_and_resolves_counts(engine, seed):
    emp = engine.sample_values(parse_key('linear:n=2'), 50_000, seed)
    profile = tail_curve(emp, emp.median(), 1.0, np.linspace(0.0, 6.0, 25))
    upper = np.asarray(profile.upper_tail)
    assert np.all(np.diff(upper) <= 0)
    assert np.all(np.diff(profile.two_sided) <= 0)
    assert profile.two_sided[0] == 1.0
    assert profile.upper_tail[0] == pytest.approx(0.5, abs=0.01)
    assert profile.upper_resolved()[0] and not profile.upper_resolved()[-1]
    assert np.all(np.asarray(profile.upper_lo) <= upper) and np.all(upper <= np.asarray(profile.upper_hi))


def test_tail_curve_rejects_bad_grids(engine, seed):
    emp = engine.sample_values(parse_key('linear:n=2'), 1_000, seed)
    with pytest.raises(DomainError):
        tail_curve(emp, 0.0, 1.0, [1.0, 0.5])
    with pytest.raises(DomainError):
        tail_curve(emp, 0.0, 0.0, [0.0, 1.0])


def test_concentration_constants_of_a_linear_function(engine, seed):
    constants = engine.concentration_constants(parse_key('linear:n=50'), 100_000, seed)
    assert constants.grad_sq_mean.value == pytest.approx(1.0, rel=1e-9)
    assert constants.ov.value == pytest.approx(1.0, rel=0.03)
    assert constants.s.value == pytest.approx(1.0, rel=0.03)
    assert constants.tau == pytest.approx(constants.ov.value * constants.s.value)


def test_sup_norm_is_superconcentrated(engine, seed):
    constants = engine.concentration_constants(parse_key('linf:n=1024'), 20_000, seed)
    assert constants.ov.value < 0.6
    assert constants.s.value < 0.6


def test_constants_need_a_lipschitz_constant(engine):
    with pytest.raises(DomainError):
        engine.concentration_constants(parse_key('monomial:k=1'), 1_000, 1)


def test_median_mean_chain_is_ordered(engine, seed):
    emp = engine.sample_values(parse_key('l2:n=100'), 50_000, seed)
    for chain in median_mean_chain(emp):
        for _, smaller, larger in chain.links():
            assert smaller.value <= larger.value
