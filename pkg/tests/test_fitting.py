import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.labs.inequalities.fitting import (
    GRID_STEP, ConstantSpec, above_margin, below_margin, box, fit_constants, fit_sandwich, hypothesis_not_met,
    make_records, make_verdict, universal_grid
)
from core.models.verdicts import Preference, VerdictStatus


def test_universal_grid_is_shared_across_boxes():
    wide = universal_grid(box(2.0 ** -6, 2.0 ** 6))
    narrow = universal_grid(box(0.25, 4.0))
    assert wide[0] == 2.0 ** -6 and wide[-1] == 2.0 ** 6
    assert np.all(np.isin(narrow, wide))
    assert np.allclose(np.diff(np.log(wide)), np.log(GRID_STEP))


@given(lower_exp=st.integers(-8, 0), upper_exp=st.integers(0, 8), target=st.floats(0.01, 100))
def test_fit_respects_its_box(lower_exp, upper_exp, target):
    constant_box = box(2.0 ** lower_exp, 2.0 ** upper_exp)
    fit = fit_constants([ConstantSpec('C', constant_box, Preference.MINIMIZE)],
                        lambda values: np.array([values['C'] - target]))
    assert constant_box.contains(fit.values['C'])
    assert fit.feasible == (constant_box.upper >= target)


def test_fit_prefers_the_tightest_feasible_constant():
    fit = fit_constants([ConstantSpec('c', box(2.0 ** -4, 1.0), Preference.MAXIMIZE)],
                        lambda values: np.array([0.3 - values['c']]))
    assert fit.feasible
    assert fit.values['c'] <= 0.3 < fit.values['c'] * GRID_STEP


def test_infeasible_fit_reports_closest_choice():
    fit = fit_constants([ConstantSpec('C', box(1.0, 4.0), Preference.MINIMIZE)],
                        lambda values: np.array([values['C'] - 10.0]))
    assert not fit.feasible
    assert fit.values['C'] == 4.0


def test_margins_are_signed_and_relative():
    assert below_margin(1.0, 2.0) == pytest.approx(0.5)
    assert below_margin(2.0, 1.0) == pytest.approx(-0.5)
    assert above_margin(2.0, 1.0) == pytest.approx(0.5)
    assert below_margin(0.0, 0.0) == 0.0


def test_fit_sandwich_on_exact_exponential():
    x = np.linspace(0.0, 5.0, 11)
    tail = 0.5 * np.exp(-x)
    sandwich = fit_sandwich(x, tail, tail, np.ones(x.size, dtype=bool), box(2.0 ** -8, 2.0 ** 8))
    assert sandwich.fit.feasible
    assert np.all(sandwich.lower <= tail + 1e-15)
    assert np.all(sandwich.upper >= tail - 1e-15)


def test_verdict_ignores_unresolved_points():
    records = make_records([0.0, 1.0], [0.1, 0.9], [0.1, 0.9], [0.1, 0.9], [0.2, 0.2], [0.5, -0.5],
                           resolved=[True, False])
    verdict = make_verdict('demo', 'x', records)
    assert verdict.status == VerdictStatus.PASSED
    assert verdict.worst_margin == 0.5

    empty = make_verdict('demo', 'x', make_records([0.0], [0.0], [0.0], [0.0], [1.0], [-1.0], [False]))
    assert empty.passed
    assert 'no resolved grid points' in empty.notes


def test_infeasible_fit_fails_the_verdict():
    records = make_records([0.0], [0.1], [0.1], [0.1], [0.2], [0.5])
    assert make_verdict('demo', 'x', records, feasible=False).status == VerdictStatus.FAILED


def test_hypothesis_not_met_is_neither_pass_nor_fail():
    verdict = hypothesis_not_met('demo', 'x', 'no Lipschitz constant')
    assert verdict.status == VerdictStatus.HYPOTHESIS_NOT_MET
    assert not verdict.passed
    assert verdict.notes == ['no Lipschitz constant']
