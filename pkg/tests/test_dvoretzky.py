import numpy as np
import pytest

from core.errors import DomainError
from core.labs.dvoretzky import DvoretzkyLab, critical_dimension, section_sphericity, tally_successes
from core.models.streams import RngStream
from core.tools.catalog import make_tilted, parse_key, tilted_closed_form_k
from core.tools.grassmann import sample_subspace


@pytest.fixture(scope='module')
def lab(engine) -> DvoretzkyLab:
    return DvoretzkyLab(engine=engine, trials=40, directions=1000, polish=False, threads=2)


def test_subspaces_are_orthonormal_and_reproducible():
    stream = RngStream(master_seed=3, stream_id=1 << 41)
    subspace, advanced = sample_subspace(32, 5, stream)
    np.testing.assert_allclose(subspace.basis @ subspace.basis.T, np.eye(5), atol=1e-12)
    assert (subspace.k, subspace.n) == (5, 32)
    assert advanced != stream
    again, _ = sample_subspace(32, 5, stream)
    np.testing.assert_array_equal(subspace.basis, again.basis)


def test_subspace_dimension_must_fit():
    with pytest.raises(DomainError):
        sample_subspace(4, 5, RngStream(master_seed=1))


def test_euclidean_sections_are_round():
    spec = parse_key('l2:n=16')
    subspace, _ = sample_subspace(16, 4, RngStream(master_seed=1, stream_id=7))
    stats = section_sphericity(spec, subspace, 1000, RngStream(master_seed=1, stream_id=8))
    assert stats.sphericity == pytest.approx(1.0, abs=1e-9)
    assert stats.mean == pytest.approx(1.0)


def test_polish_only_widens_the_extremes():
    spec = parse_key('linf:n=16')
    subspace, _ = sample_subspace(16, 3, RngStream(master_seed=2, stream_id=7))
    stream = RngStream(master_seed=2, stream_id=8)
    rough = section_sphericity(spec, subspace, 1000, stream, polish=False)
    polished = section_sphericity(spec, subspace, 1000, stream, polish=True)
    assert polished.max_ratio >= rough.max_ratio
    assert polished.min_ratio <= rough.min_ratio


def test_critical_dimension_of_euclidean_space(engine, seed):
    estimate = critical_dimension(parse_key('l2:n=64'), engine, 20_000, seed)
    assert estimate.value == pytest.approx(63.5, rel=0.01)
    assert estimate.lo <= estimate.value <= estimate.hi


@pytest.mark.parametrize('base_key', ['linf:n=256', 'l2:n=256'])
@pytest.mark.parametrize('t', [4.0, 6.0])
def test_tilted_critical_dimension_matches_closed_form(engine, seed, base_key, t):
    base = parse_key(base_key)
    k_base = critical_dimension(base, engine, 20_000, seed)
    k_tilted = critical_dimension(make_tilted(base, t), engine, 20_000, seed)
    assert k_tilted.value == pytest.approx(tilted_closed_form_k(k_base.value, t), rel=0.03)
    assert k_tilted.value < k_base.value


def test_critical_dimension_needs_a_norm(engine, seed):
    with pytest.raises(DomainError):
        critical_dimension(parse_key('linear:n=4'), engine, 1_000, seed)


@pytest.mark.parametrize('successes, trials, accepted', [
    (34, 60, False),
    (40, 60, False),
    (50, 60, True),
    (60, 60, True),
    (40, 40, True),
])
def test_dimension_is_accepted_on_the_wilson_lower_bound(successes, trials, accepted):
    record = tally_successes(0.2, 5, successes, trials)
    assert record.accepted is accepted
    assert record.accepted == (record.wilson_lo >= 2.0 / 3.0)
    assert record.wilson_lo - 1e-12 <= successes / trials <= record.wilson_hi + 1e-12


def test_upper_bound_above_two_thirds_is_not_enough():
    record = tally_successes(0.2, 5, 34, 60)
    assert record.wilson_hi > 2.0 / 3.0
    assert not record.accepted


def test_euclidean_space_is_spherical_in_every_dimension(lab, seed):
    estimate = lab.estimate_k_eps(parse_key('l2:n=16'), 0.1, seed, count=5_000)
    assert estimate.k_estimate == 16
    assert all(record.successes == record.trials for record in estimate.records)


def test_sup_norm_success_tables(lab, seed):
    estimate = lab.estimate_k_eps(parse_key('linf:n=16'), 0.3, seed, count=5_000)
    assert 1 <= estimate.k_estimate <= 16
    assert estimate.monotone_within_ci()
    assert estimate.trace[0] == 1
    for record in estimate.records:
        assert record.wilson_lo - 1e-12 <= record.successes / record.trials <= record.wilson_hi + 1e-12


def test_success_events_are_nested_in_epsilon(lab, seed):
    spec = parse_key('linf:n=16')
    tight = lab.success_record(spec, 3, 0.1, seed)
    loose = lab.success_record(spec, 3, 0.3, seed)
    assert tight.successes <= loose.successes


def test_instability_report(lab, seed):
    report = lab.instability_experiment(parse_key('linf:n=16'), seed, [0.2, 0.3], count=5_000)
    assert [estimate.epsilon for estimate in report.estimates] == [0.2, 0.3]
    assert len(report.ratios) == 2
    assert report.t is None


def test_tilt_must_be_large_enough(lab, seed):
    with pytest.raises(DomainError):
        lab.tilted_instability_experiment(parse_key('linf:n=64'), seed, t=2.0)
    with pytest.raises(DomainError):
        lab.tilted_ratio_tail_experiment(parse_key('linf:n=64'), seed, t=2.0)


def test_tilted_ratio_tail(lab, seed):
    report = lab.tilted_ratio_tail_experiment(parse_key('linf:n=64'), seed, count=20_000)
    assert report.function_key.startswith('tilted:')
    assert np.all(np.diff(report.probabilities) <= 0)
    assert report.verdict.passed


def test_lab_needs_enough_trials(engine):
    with pytest.raises(DomainError):
        DvoretzkyLab(engine=engine, trials=10)
