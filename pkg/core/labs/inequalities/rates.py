"""
Two-level tail sandwiches c·e^{-Cα(t)} ≤ P(|f - 𝔼f| ≥ t) ≤ C·e^{-cα(t)} for the ℓ∞, ℓ₄ and ellipsoidal rates.
"""
from typing import Sequence

import numpy as np

from core.errors import DomainError
from core.labs.inequalities.exact import _require_labels
from core.labs.inequalities.fitting import above_margin, below_margin, box, fit_sandwich, make_records, make_verdict
from core.models.distributions import ConcentrationProfile
from core.models.functions import RateFunction
from core.models.verdicts import InequalityVerdict
from core.tools.catalog import rate_value

RATE_BOX = (2.0 ** -8, 2.0 ** 8)
# Largest spread of fitted constants across dimensions still counted as stable
STABILITY_FACTOR = 4.0


def check_two_sided_rates(profile: ConcentrationProfile, rate: RateFunction) -> InequalityVerdict:
    """Fits one pair (c, C) for both sides of the sandwich at the resolved points of a mean-centered profile."""
    _require_labels(profile, 'mean', 'one', 'two_sided_rates')

    t, tail, lo, hi = profile.arrays('t_grid', 'two_sided', 'two_sided_lo', 'two_sided_hi')
    resolved = profile.two_sided_resolved()
    alpha = np.asarray(rate_value(rate, t), dtype=float)

    sandwich = fit_sandwich(alpha, lo, hi, resolved, box(*RATE_BOX))
    records = make_records(t, tail, lo, hi, sandwich.lower, above_margin(hi, sandwich.lower), resolved,
                           label=f'{rate.kind.value} lower')
    records += make_records(t, tail, lo, hi, sandwich.upper, below_margin(lo, sandwich.upper), resolved,
                            label=f'{rate.kind.value} upper')
    return make_verdict('two_sided_rates', profile.function_key, records, sandwich.fit.constants,
                        feasible=sandwich.fit.feasible)


def check_rate_stability(verdicts: Sequence[InequalityVerdict],
                         factor: float = STABILITY_FACTOR) -> InequalityVerdict:
    """
    The sandwich constants of one family fitted at several dimensions vary by at most `factor`. Each verdict
    contributes a grid point per constant, its coordinate being its position in the input.
    """
    if not verdicts:
        raise DomainError('Rate stability needs at least one fitted sandwich')
    if any(verdict.name != 'two_sided_rates' for verdict in verdicts):
        raise DomainError('Rate stability compares two_sided_rates verdicts only')

    keys = ','.join(verdict.function_key for verdict in verdicts)
    records = []
    for name in ('c', 'C'):
        values = np.array([verdict.constant(name) for verdict in verdicts])
        spread = float(np.max(values) / np.min(values))
        index = np.arange(values.size, dtype=float)
        records += make_records(index, values, values, values, np.full(values.size, factor),
                                [float(below_margin(spread, factor))] * values.size, label=f'{name} spread')

    feasible = all(verdict.passed for verdict in verdicts)
    return make_verdict('rate_stability', keys, records, notes=[f'spread factor <= {factor:g}'], feasible=feasible)
