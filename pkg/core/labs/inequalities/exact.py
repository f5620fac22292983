"""
Checks whose constants are explicit, so nothing is fitted.
"""
import math
from typing import Sequence

import numpy as np

from core.errors import DomainError
from core.labs.inequalities.fitting import above_margin, below_margin, make_records, make_verdict
from core.labs.mc_engine import MIN_RESOLVED_COUNT, median_mean_chain
from core.models.distributions import ConcConstants, ConcentrationProfile, EmpiricalDistribution
from core.models.verdicts import InequalityVerdict
from core.tools.gaussian import SQRT_2PI, std_normal_cdf
from core.tools.intervals import jackknife_mean, median_interval, wilson_interval

# Constant in front of t in the variance-sensitive lower deviation inequality
LOWER_DEVIATION_FACTOR = 20.0
DEFAULT_SMALL_DEVIATION_GRID = tuple(np.round(np.arange(0.25, 3.01, 0.25), 2))
DEFAULT_SKEWNESS_GRID = tuple(np.round(np.arange(0.25, 4.01, 0.25), 2))


def _require_labels(profile: ConcentrationProfile, center: str, scale: str, check: str) -> None:
    if profile.center_label != center or profile.scale_label != scale:
        raise DomainError(f'{check} needs a profile centered at the {center} and scaled by {scale}, got '
                          f'{profile.center_label}/{profile.scale_label}')


def check_upper_gaussian(profile: ConcentrationProfile, lipschitz: float) -> InequalityVerdict:
    """P(f ≥ med + tL) ≤ ½e^{-t²/2} at every resolved t of a profile scaled by L."""
    _require_labels(profile, 'median', 'lipschitz', 'upper_gaussian')
    if not math.isclose(profile.scale, lipschitz, rel_tol=1e-12):
        raise DomainError(f'Profile scale {profile.scale} does not match the Lipschitz constant {lipschitz}')

    t, tail, lo, hi = profile.arrays('t_grid', 'upper_tail', 'upper_lo', 'upper_hi')
    bound = 0.5 * np.exp(-t ** 2 / 2.0)
    records = make_records(t, tail, lo, hi, bound, below_margin(lo, bound), profile.upper_resolved())
    return make_verdict('upper_gaussian', profile.function_key, records)


def check_lower_deviation_var(profile: ConcentrationProfile, convex: bool = True) -> InequalityVerdict:
    """
    P(f ≤ med - 20t) ≤ ½e^{-t²/Var}. On a profile scaled by √Var the grid point u stands for 20t = u·√Var,
    so the bound reads ½e^{-(u/20)²}.
    """
    _require_labels(profile, 'median', 'sd', 'lower_deviation_var')

    u, tail, lo, hi = profile.arrays('t_grid', 'lower_tail', 'lower_lo', 'lower_hi')
    bound = 0.5 * np.exp(-(u / LOWER_DEVIATION_FACTOR) ** 2)
    records = make_records(u, tail, lo, hi, bound, below_margin(lo, bound), profile.lower_resolved())
    notes = [] if convex else ['function is not convex; the inequality is not guaranteed']
    return make_verdict('lower_deviation_var', profile.function_key, records, notes=notes)


def check_small_deviation(emp: EmpiricalDistribution,
                          t_grid: Sequence[float] = DEFAULT_SMALL_DEVIATION_GRID,
                          affine: bool = False) -> InequalityVerdict:
    """
    P(f - med < -t·√(2π)·a) ≤ Φ(-t) with a = 𝔼(f - med)₊; affine maps attain equality.

    The interval for `a` gives a narrowest and a widest event. The bound is checked on the narrowest one; for
    affine functions Φ(-t) must also not exceed the Wilson upper end of the widest one.
    """
    t = np.asarray(t_grid, dtype=float)
    n = emp.count
    median = emp.median()
    a = jackknife_mean(np.maximum(emp.draws - median, 0.0))
    if a.value <= 0:
        raise DomainError(f'𝔼(f - med)₊ vanishes for {emp.function_key}; the small-deviation scale is undefined')

    bound = std_normal_cdf(-t)
    counts = np.asarray(emp.count_below(median - t * SQRT_2PI * a.value))
    narrowest = np.asarray(emp.count_below(median - t * SQRT_2PI * a.hi))
    narrowest_lo, _ = wilson_interval(narrowest, n)
    _, counts_hi = wilson_interval(counts, n)
    records = make_records(t, counts / n, narrowest_lo, counts_hi, bound, below_margin(narrowest_lo, bound),
                           counts >= MIN_RESOLVED_COUNT, label='bound')

    if affine:
        widest = np.asarray(emp.count_below(median - t * SQRT_2PI * max(a.lo, 0.0)))
        _, widest_hi = wilson_interval(widest, n)
        margins = np.minimum(above_margin(widest_hi, bound), below_margin(narrowest_lo, bound))
        records += make_records(t, counts / n, narrowest_lo, widest_hi, bound, margins,
                                widest >= MIN_RESOLVED_COUNT, label='equality')

    return make_verdict('small_deviation', emp.function_key, records,
                        notes=[f'a = E(f - med)+ = {a.value:.6g} [{a.lo:.6g}, {a.hi:.6g}]'])


def check_skewness(emp: EmpiricalDistribution, t_grid: Sequence[float] = DEFAULT_SKEWNESS_GRID) -> InequalityVerdict:
    """
    P(f ≤ med - t) ≤ P(f > med + t), with t in units of the sample standard deviation.

    A point is resolved when the larger of the two counts reaches the Monte Carlo floor, so a vanishing lower tail
    still counts as evidence.
    """
    n = emp.count
    scale = float(np.std(emp.draws, ddof=1))
    if scale <= 0:
        raise DomainError(f'{emp.function_key} has a degenerate sample')

    t = np.asarray(t_grid, dtype=float)
    median = emp.median()
    lower = np.asarray(emp.count_at_most(median - t * scale))
    upper = np.asarray(emp.count_above(median + t * scale))
    lower_lo, lower_hi = wilson_interval(lower, n)
    _, upper_hi = wilson_interval(upper, n)
    resolved = np.maximum(lower, upper) >= MIN_RESOLVED_COUNT

    records = make_records(t, lower / n, lower_lo, lower_hi, upper / n, below_margin(lower_lo, upper_hi), resolved)
    return make_verdict('skewness', emp.function_key, records, notes=[f't in units of sd = {scale:.6g}'])


def check_kwapien(emp: EmpiricalDistribution) -> InequalityVerdict:
    """𝔼f ≥ med(f): the mean of a convex function of a Gaussian vector is at least its median."""
    mean = jackknife_mean(emp.draws)
    median = median_interval(emp.values)
    records = make_records([0.0], [mean.value], [mean.lo], [mean.hi], [median.lo],
                           [float(above_margin(mean.hi, median.lo))], label='mean >= median')
    return make_verdict('kwapien', emp.function_key, records,
                        notes=[f'median = {median.value:.6g} [{median.lo:.6g}, {median.hi:.6g}]'])


def check_poincare_chain(constants: ConcConstants,
                         ov_slack: float = 1.05,
                         s_slack: float = 1.05,
                         variance_slack: float = 1.02) -> InequalityVerdict:
    """ov ≤ s ≤ 1 and Var ≤ Lip², each with a small multiplicative slack on the right."""
    ov, s, variance = constants.ov, constants.s, constants.variance
    lipschitz_sq = constants.lipschitz ** 2

    records = []
    records += make_records([0.0], [ov.value], [ov.lo], [ov.hi], [ov_slack * s.hi],
                            [float(below_margin(ov.lo, ov_slack * s.hi))], label='ov <= s')
    records += make_records([1.0], [s.value], [s.lo], [s.hi], [s_slack],
                            [float(below_margin(s.lo, s_slack))], label='s <= 1')
    records += make_records([2.0], [variance.value], [variance.lo], [variance.hi], [variance_slack * lipschitz_sq],
                            [float(below_margin(variance.lo, variance_slack * lipschitz_sq))], label='var <= lip^2')
    return make_verdict('poincare_chain', constants.function_key, records)


def check_median_mean_interchange(emp: EmpiricalDistribution,
                                  ps: Sequence[float] = (1.0, 2.0, 4.0)) -> InequalityVerdict:
    """½‖ξ - ξ′‖_p ≤ ‖ξ - med‖_p ≤ 2‖ξ - 𝔼ξ‖_p ≤ 2‖ξ - ξ′‖_p for each p."""
    records = []
    for chain in median_mean_chain(emp, ps):
        for label, left, right in chain.links():
            records += make_records([chain.p], [left.value], [left.lo], [left.hi], [right.hi],
                                    [float(below_margin(left.lo, right.hi))], label=label)
    return make_verdict('median_mean_interchange', emp.function_key, records)
