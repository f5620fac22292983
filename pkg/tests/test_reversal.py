import pytest

from core.errors import DomainError
from core.labs.inequalities import reversal
from core.labs.inequalities.suite import CheckContext
from core.models.distributions import Estimate
from core.models.verdicts import VerdictStatus
from core.tools.catalog import parse_key

COUNT = 50_000


@pytest.fixture(scope='module')
def linear(engine, seed) -> CheckContext:
    return CheckContext(parse_key('linear:n=2'), engine, COUNT, seed)


@pytest.fixture(scope='module')
def euclidean(engine, seed) -> CheckContext:
    return CheckContext(parse_key('l2:n=100'), engine, COUNT, seed)


@pytest.fixture(scope='module')
def wide_sup_norm(engine, seed) -> CheckContext:
    return CheckContext(parse_key('linf:n=1024'), engine, 20_000, seed)


def test_reversal_fits_constants_in_their_boxes(linear):
    verdict = reversal.check_reversal(linear.lipschitz_profile, linear.constants)
    assert verdict.passed
    assert 2.0 ** -10 <= verdict.constant('c') <= 1.0
    assert 1.0 / 64.0 <= verdict.constant('C') <= 64.0


def test_theorem_main_under_its_hypothesis(linear):
    verdict = reversal.check_theorem_main(linear.lipschitz_profile, linear.constants, alpha=0.5)
    assert verdict.passed
    assert set(verdict.constant_map()) == {'c_alpha', 'C_alpha'}


def test_theorem_main_reports_an_unmet_hypothesis(wide_sup_norm):
    verdict = reversal.check_theorem_main(wide_sup_norm.lipschitz_profile, wide_sup_norm.constants, alpha=0.5)
    assert verdict.status == VerdictStatus.HYPOTHESIS_NOT_MET
    assert not verdict.grid


def test_theorem_main_rejects_alpha_outside_the_unit_interval(linear):
    with pytest.raises(DomainError):
        reversal.check_theorem_main(linear.lipschitz_profile, linear.constants, alpha=1.5)


def test_prop_reversal_tail(linear):
    verdict = reversal.check_prop_reversal_tail(linear.sd_profile, linear.constants, linear.spec)
    assert verdict.passed
    assert 0.25 <= verdict.constant('C') <= 64.0


def test_prop_reversal_tail_compares_the_exact_galpha_tail(engine, seed):
    ctx = CheckContext(parse_key('galpha:a=2'), engine, COUNT, seed)
    verdict = reversal.check_prop_reversal_tail(ctx.sd_profile, ctx.constants, ctx.spec)
    assert any(record.label == 'galpha_upper' for record in verdict.grid)


def test_moment_bounds(linear):
    verdict = reversal.check_moment_bounds(linear.stats, linear.constants)
    assert verdict.passed
    assert {record.label for record in verdict.grid} == {'variance_form', 'lipschitz_form'}


def test_equivalence_triangle_asserts_consequences_when_variance_is_large(linear):
    verdict = reversal.check_equivalence_triangle(linear.lipschitz_profile, linear.stats, linear.constants)
    assert verdict.passed
    assert '(c) ov >= 0.375: True' in verdict.notes


def test_equivalence_triangle_does_not_fail_when_variance_is_small(wide_sup_norm):
    verdict = reversal.check_equivalence_triangle(wide_sup_norm.lipschitz_profile, wide_sup_norm.stats,
                                                  wide_sup_norm.constants, threshold=0.9)
    assert verdict.passed
    assert all(not record.resolved for record in verdict.grid if record.label != 'c_variance')


def test_equivalence_triangle_needs_the_whole_variance_interval_above_threshold(linear):
    straddling = linear.constants.model_copy(update={'ov': Estimate(value=0.4, lo=0.35, hi=0.45)})
    verdict = reversal.check_equivalence_triangle(linear.lipschitz_profile, linear.stats, straddling)
    assert '(c) ov >= 0.375: False' in verdict.notes
    assert all(not record.resolved for record in verdict.grid if record.label != 'c_variance')


def test_alpha_monotonicity_over_a_family(linear, euclidean):
    members = [reversal.AlphaFamilyMember(ctx.lipschitz_profile, ctx.constants) for ctx in (linear, euclidean)]
    verdict = reversal.check_alpha_monotonicity(members, alphas=(0.125, 0.25, 0.5))
    assert verdict.passed
    assert len(verdict.grid) == 6


def test_alpha_monotonicity_without_eligible_members(euclidean):
    member = reversal.AlphaFamilyMember(euclidean.lipschitz_profile, euclidean.constants)
    verdict = reversal.check_alpha_monotonicity([member], alphas=(2.0,))
    assert verdict.status == VerdictStatus.HYPOTHESIS_NOT_MET
