"""
Lower bounds on deviations (reversals of concentration) whose universal constants are fitted inside declared boxes.
"""
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core.errors import DomainError
from core.labs.inequalities.exact import _require_labels
from core.labs.inequalities.fitting import (
    ConstantSpec, above_margin, below_margin, box, fit_constants, hypothesis_not_met, make_records, make_verdict
)
from core.models.distributions import ConcConstants, ConcentrationProfile, SummaryStats
from core.models.functions import FunctionSpec, GAlphaParams
from core.models.verdicts import GridRecord, InequalityVerdict, Preference
from core.tools.gaussian import std_normal_cdf

MOMENT_ORDERS = (2.0, 4.0, 8.0, 16.0)
DEFAULT_ALPHA = 0.125
# Variance threshold A₃ of the equivalence triangle: Var ≥ A₃²·Lip²
DEFAULT_EQUIVALENCE_THRESHOLD = 0.375


def _two_sided(profile: ConcentrationProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    t, tail, lo, hi = profile.arrays('t_grid', 'two_sided', 'two_sided_lo', 'two_sided_hi')
    return t, tail, lo, hi, profile.two_sided_resolved()


def check_reversal(profile: ConcentrationProfile, constants: ConcConstants) -> InequalityVerdict:
    """
    P(|f - med| ≥ tL) ≥ c·τ⁴·exp(-C·(t²/τ²)·log(e/τ)) with τ = ov·s, for some c ∈ [2⁻¹⁰, 1], C ∈ [1/64, 64].
    """
    _require_labels(profile, 'median', 'lipschitz', 'reversal')
    tau = constants.tau
    if not tau > 0:
        raise DomainError(f'τ = ov·s must be positive, got {tau}')

    t, tail, lo, hi, resolved = _two_sided(profile)
    exponent = (t ** 2 / tau ** 2) * math.log(math.e / tau)

    def bound(values: dict[str, float]) -> np.ndarray:
        return values['c'] * tau ** 4 * np.exp(-values['C'] * exponent)

    fit = fit_constants(
        [ConstantSpec('c', box(2.0 ** -10, 1.0), Preference.MAXIMIZE),
         ConstantSpec('C', box(1.0 / 64.0, 64.0), Preference.MINIMIZE)],
        lambda values: above_margin(hi[resolved], bound(values)[resolved])
    )
    fitted = bound(fit.values)
    records = make_records(t, tail, lo, hi, fitted, above_margin(hi, fitted), resolved)
    return make_verdict('reversal', profile.function_key, records, fit.constants,
                        notes=[f'tau = ov*s = {tau:.6g}'], feasible=fit.feasible)


def check_theorem_main(profile: ConcentrationProfile,
                       constants: ConcConstants,
                       alpha: float = DEFAULT_ALPHA) -> InequalityVerdict:
    """
    Under √Var ≥ α·L: P(|f - med| ≥ tL) ≥ c(α)·e^{-C(α)t²}, with c(α) ∈ [2⁻¹⁰, 1] and C(α) ∈ [1/64, 64].

    The hypothesis is judged on the lower end of the ov interval; when it fails the verdict says so instead of
    failing.
    """
    _require_labels(profile, 'median', 'lipschitz', 'theorem_main')
    if not 0 < alpha <= 1:
        raise DomainError(f'α must lie in (0, 1], got {alpha}')

    if constants.ov.lo < alpha:
        return hypothesis_not_met('theorem_main', profile.function_key,
                                  f'ov lower bound {constants.ov.lo:.4g} is below alpha = {alpha:.4g}')

    t, tail, lo, hi, resolved = _two_sided(profile)

    def bound(values: dict[str, float]) -> np.ndarray:
        return values['c_alpha'] * np.exp(-values['C_alpha'] * t ** 2)

    fit = fit_constants(
        [ConstantSpec('c_alpha', box(2.0 ** -10, 1.0), Preference.MAXIMIZE),
         ConstantSpec('C_alpha', box(1.0 / 64.0, 64.0), Preference.MINIMIZE)],
        lambda values: above_margin(hi[resolved], bound(values)[resolved])
    )
    fitted = bound(fit.values)
    records = make_records(t, tail, lo, hi, fitted, above_margin(hi, fitted), resolved)
    return make_verdict('theorem_main', profile.function_key, records, fit.constants,
                        notes=[f'alpha = {alpha:.6g}'], feasible=fit.feasible)


def check_prop_reversal_tail(profile: ConcentrationProfile,
                             constants: ConcConstants,
                             spec: FunctionSpec | None = None) -> InequalityVerdict:
    """
    P(f ≥ med + t√Var) ≥ 1 - Φ(C(t + 1/s)) for some C ∈ [1/4, 64], on a profile scaled by √Var.

    For g_α the exact upper tail Φ(-(α + t√Var/c_α)) is compared as well; it shows the 1/s offset cannot be dropped.
    """
    _require_labels(profile, 'median', 'sd', 'prop_reversal_tail')
    s = constants.s.value
    if not s > 0:
        raise DomainError(f's(f) must be positive, got {s}')

    t, tail, lo, hi = profile.arrays('t_grid', 'upper_tail', 'upper_lo', 'upper_hi')
    resolved = profile.upper_resolved()

    def bound(values: dict[str, float]) -> np.ndarray:
        return std_normal_cdf(-values['C'] * (t + 1.0 / s))

    fit = fit_constants(
        [ConstantSpec('C', box(0.25, 64.0), Preference.MINIMIZE)],
        lambda values: above_margin(hi[resolved], bound(values)[resolved])
    )
    fitted = bound(fit.values)
    records = make_records(t, tail, lo, hi, fitted, above_margin(hi, fitted), resolved, label='lower_bound')
    notes = [f'1/s = {1.0 / s:.6g}', f'C*(1/s) = {fit.values["C"] / s:.6g}']

    if spec is not None and isinstance(spec.params, GAlphaParams):
        a, c_alpha = spec.params.alpha, spec.params.c_alpha
        exact = std_normal_cdf(-(a + t * profile.scale / c_alpha))
        records += make_records(t, tail, lo, hi, exact, below_margin(lo, exact), resolved, label='galpha_upper')
        notes.append(f'galpha upper tail offset alpha = {a:.6g}')

    return make_verdict('prop_reversal_tail', profile.function_key, records, fit.constants, notes,
                        feasible=fit.feasible)


def check_moment_bounds(stats: SummaryStats,
                        constants: ConcConstants,
                        orders: Sequence[float] = MOMENT_ORDERS) -> InequalityVerdict:
    """
    (𝔼|f - M|^p)^{1/p} ≥ c₁√p·√Var for p ≥ C/s², ≥ c₂·s·√p·√Var for 2 ≤ p < C/s², and the Lipschitz form
    ≥ c₂′·ov·s·√p·L for every p ≥ 2.
    """
    p = np.asarray(orders, dtype=float)
    norms = [stats.moment_norm(order) for order in orders]
    value = np.array([norm.value for norm in norms])
    lo = np.array([norm.lo for norm in norms])
    hi = np.array([norm.hi for norm in norms])
    sd = math.sqrt(constants.variance.value)
    s, ov, lipschitz = constants.s.value, constants.ov.value, constants.lipschitz

    def regime_bound(values: dict[str, float]) -> np.ndarray:
        large = p >= values['C'] / s ** 2
        return np.where(large, values['c1'], values['c2'] * s) * np.sqrt(p) * sd

    def lipschitz_bound(values: dict[str, float]) -> np.ndarray:
        return values['c2_prime'] * ov * s * np.sqrt(p) * lipschitz

    regime = fit_constants(
        [ConstantSpec('c1', box(2.0 ** -8, 1.0), Preference.MAXIMIZE),
         ConstantSpec('c2', box(2.0 ** -8, 1.0), Preference.MAXIMIZE),
         ConstantSpec('C', box(1.0, 64.0), Preference.MINIMIZE)],
        lambda values: above_margin(hi, regime_bound(values))
    )
    lipschitz_form = fit_constants(
        [ConstantSpec('c2_prime', box(2.0 ** -8, 1.0), Preference.MAXIMIZE)],
        lambda values: above_margin(hi, lipschitz_bound(values))
    )

    fitted = regime_bound(regime.values)
    fitted_lipschitz = lipschitz_bound(lipschitz_form.values)
    records = make_records(p, value, lo, hi, fitted, above_margin(hi, fitted), label='variance_form')
    records += make_records(p, value, lo, hi, fitted_lipschitz, above_margin(hi, fitted_lipschitz),
                            label='lipschitz_form')
    return make_verdict('moment_bounds', stats.function_key, records,
                        regime.constants + lipschitz_form.constants,
                        notes=[f'C/s^2 = {regime.values["C"] / s ** 2:.6g}'],
                        feasible=regime.feasible and lipschitz_form.feasible)


def check_equivalence_triangle(profile: ConcentrationProfile,
                               stats: SummaryStats,
                               constants: ConcConstants,
                               threshold: float = DEFAULT_EQUIVALENCE_THRESHOLD,
                               orders: Sequence[float] = MOMENT_ORDERS) -> InequalityVerdict:
    """
    Consistency of (a) P(|f - med| ≥ tL) ≥ a₁e^{-t²/A₁²}, (b) (𝔼|f - med|^p)^{1/p} ≥ A₂√p·L and
    (c) Var ≥ A₃²L² with A₃ fixed. The verdict passes when (c) implies (a) and (b); when (c) fails, (a) and (b)
    are reported but not asserted.
    """
    _require_labels(profile, 'median', 'lipschitz', 'equivalence_triangle')
    t, tail, lo, hi, resolved = _two_sided(profile)
    lipschitz = constants.lipschitz

    def tail_bound(values: dict[str, float]) -> np.ndarray:
        return values['a1'] * np.exp(-t ** 2 / values['A1'] ** 2)

    tail_fit = fit_constants(
        [ConstantSpec('a1', box(2.0 ** -10, 1.0), Preference.MAXIMIZE),
         ConstantSpec('A1', box(0.125, 8.0), Preference.MINIMIZE)],
        lambda values: above_margin(hi[resolved], tail_bound(values)[resolved])
    )

    p = np.asarray(orders, dtype=float)
    norms = [stats.moment_norm(order) for order in orders]
    moment_hi = np.array([norm.hi for norm in norms])

    def moment_bound(values: dict[str, float]) -> np.ndarray:
        return values['A2'] * np.sqrt(p) * lipschitz

    moment_fit = fit_constants(
        [ConstantSpec('A2', box(2.0 ** -8, 1.0), Preference.MAXIMIZE)],
        lambda values: above_margin(moment_hi, moment_bound(values))
    )

    variance_holds = constants.ov.lo >= threshold
    fitted_tail = tail_bound(tail_fit.values)
    fitted_moments = moment_bound(moment_fit.values)

    records: list[GridRecord] = []
    records += make_records(t, tail, lo, hi, fitted_tail, above_margin(hi, fitted_tail),
                            resolved & variance_holds, label='a_tail')
    records += make_records(p, [norm.value for norm in norms], [norm.lo for norm in norms], moment_hi,
                            fitted_moments, above_margin(moment_hi, fitted_moments), [variance_holds] * p.size,
                            label='b_moments')
    records += make_records([0.0], [constants.ov.value], [constants.ov.lo], [constants.ov.hi], [threshold],
                            [float(above_margin(constants.ov.lo, threshold))], [True], label='c_variance')
    # (c) is the antecedent; its own failure is the consistent branch, not a violation
    records[-1] = records[-1].model_copy(update={'satisfied': True})

    notes = [f'(a) feasible: {tail_fit.feasible}', f'(b) feasible: {moment_fit.feasible}',
             f'(c) ov >= {threshold}: {variance_holds}']
    feasible = (tail_fit.feasible and moment_fit.feasible) if variance_holds else True
    verdict = make_verdict('equivalence_triangle', profile.function_key, records,
                           tail_fit.constants + moment_fit.constants, notes, feasible=feasible)
    return verdict


@dataclass(frozen=True)
class AlphaFamilyMember:
    profile: ConcentrationProfile
    constants: ConcConstants


def check_alpha_monotonicity(members: Sequence[AlphaFamilyMember],
                             alphas: Sequence[float] = (0.125, 0.25, 0.5, 1.0)) -> InequalityVerdict:
    """
    Fits c(α), C(α) jointly over the members meeting √Var ≥ αL, for each α, and checks c(α) non-decreasing and
    C(α) non-increasing in α. Also reports the normalized scales c(α)/α⁸ and C(α)/(α⁻⁴·log(e/α)).
    """
    grid = sorted(float(alpha) for alpha in alphas)
    keys = ','.join(member.constants.function_key for member in members)

    fitted: list[tuple[float, float, float, bool, int]] = []
    for alpha in grid:
        eligible = [member for member in members if member.constants.ov.lo >= alpha]
        if not eligible:
            continue

        columns = []
        for member in eligible:
            t, _, _, hi, resolved = _two_sided(member.profile)
            columns.append((t[resolved], hi[resolved]))

        def margins(values: dict[str, float]) -> np.ndarray:
            parts = [above_margin(hi, values['c_alpha'] * np.exp(-values['C_alpha'] * t ** 2)) for t, hi in columns]
            return np.concatenate(parts) if parts else np.array([])

        fit = fit_constants(
            [ConstantSpec('c_alpha', box(2.0 ** -10, 1.0), Preference.MAXIMIZE),
             ConstantSpec('C_alpha', box(1.0 / 64.0, 64.0), Preference.MINIMIZE)],
            margins
        )
        fitted.append((alpha, fit.values['c_alpha'], fit.values['C_alpha'], fit.feasible, len(eligible)))

    if not fitted:
        return hypothesis_not_met('alpha_monotonicity', keys, 'no member meets the hypothesis for any alpha')

    records: list[GridRecord] = []
    for i, (alpha, c, big_c, feasible, count) in enumerate(fitted):
        previous_c = fitted[i - 1][1] if i else c
        previous_big_c = fitted[i - 1][2] if i else big_c
        margin_c = float(above_margin(c, previous_c))
        margin_big_c = float(below_margin(big_c, previous_big_c))
        feasible_margin = 0.0 if feasible else -1.0
        records += make_records([alpha], [c], [c], [c], [previous_c], [min(margin_c, feasible_margin)],
                                label=f'c(alpha) members={count}')
        records += make_records([alpha], [big_c], [big_c], [big_c], [previous_big_c],
                                [min(margin_big_c, feasible_margin)], label=f'C(alpha) members={count}')

    lower_scale = min(c / alpha ** 8 for alpha, c, _, _, _ in fitted)
    upper_scale = max(big_c / (alpha ** -4 * math.log(math.e / alpha)) for alpha, _, big_c, _, _ in fitted)
    return make_verdict('alpha_monotonicity', keys, records,
                        notes=[f'min c(alpha)/alpha^8 = {lower_scale:.6g}',
                               f'max C(alpha)/(alpha^-4 log(e/alpha)) = {upper_scale:.6g}'])
