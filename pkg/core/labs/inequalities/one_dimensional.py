"""
Variance bounds through derivatives: Talagrand's L₁-L₂ bound, the Bobkov-Houdré chain for convex functions on the
line, and the key lemma for nondecreasing convex functions.
"""
import math
from typing import Sequence

import numpy as np

from core.errors import DomainError, NotConvexError
from core.labs.inequalities.fitting import (
    ConstantSpec, above_margin, below_margin, box, fit_constants, make_records, make_verdict
)
from core.labs.mc_engine import MIN_RESOLVED_COUNT, MonteCarloEngine
from core.labs.rearrangement import derivative_l2_norm_sq, weighted_derivative_integral
from core.models.distributions import EmpiricalDistribution, Estimate
from core.models.functions import FunctionSpec, GAlphaParams
from core.models.verdicts import GridRecord, InequalityVerdict, Preference
from core.tools.catalog import evaluate, evaluate_batch, left_derivative, right_derivative, subgradient_batch
from core.tools.gaussian import sigma_p, std_normal_cdf
from core.tools.intervals import jackknife_mean, jackknife_variance, wilson_interval
from core.tools.orlicz import YoungFunction, orlicz_norm

LEMMA_KEY_ORDERS = (1.0, 2.0, 4.0, 8.0)
LEMMA_KEY_GRID = tuple(np.round(np.arange(0.25, 3.01, 0.25), 2))
CHAIN_BOX = (2.0 ** -6, 2.0 ** 6)
# Spread allowed for Var(g_α)·α² across α
VARIANCE_SCALING_FACTOR = 4.0


def _require_one_dimensional(g: FunctionSpec, check: str) -> None:
    if not g.is_one_dimensional:
        raise DomainError(f'{check} needs a function of one variable, got "{g.key}"')


def check_talagrand(spec: FunctionSpec, engine: MonteCarloEngine, count: int, seed: int) -> InequalityVerdict:
    """
    Var(f) ≤ C·Σᵢ ‖∂ᵢf‖²_φ with φ(t) = t²/log(e + t), C fitted in [1/4, 64]. Coordinate-symmetric functions use the
    first coordinate for all n.
    """
    symmetric = spec.coordinate_symmetric

    def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
        gradient = np.abs(subgradient_batch(spec, Z))
        return evaluate_batch(spec, Z), gradient[:, 0] if symmetric else gradient

    draws, partials = engine.map_chunks(spec.dimension, count, seed, transform)
    variance = jackknife_variance(draws)

    phi = YoungFunction.talagrand()
    if symmetric:
        total = spec.dimension * orlicz_norm(partials, phi) ** 2
    else:
        total = sum(orlicz_norm(partials[:, i], phi) ** 2 for i in range(spec.dimension))
    if total <= 0:
        raise DomainError(f'"{spec.key}" has a vanishing gradient, so the bound is degenerate')

    fit = fit_constants(
        [ConstantSpec('C', box(0.25, 64.0), Preference.MINIMIZE)],
        lambda values: below_margin(variance.lo, values['C'] * total)
    )
    bound = fit.values['C'] * total
    records = make_records([0.0], [variance.value], [variance.lo], [variance.hi], [bound],
                           [float(below_margin(variance.lo, bound))], label='var <= C sum ||d_i f||_phi^2')
    notes = [f'sum of squared phi-norms = {total:.6g}', f'var = {variance.value:.6g}']
    return make_verdict('talagrand', spec.key, records, fit.constants, notes, feasible=fit.feasible)


def check_bobkov_houdre(g: FunctionSpec, engine: MonteCarloEngine, count: int, seed: int) -> InequalityVerdict:
    """
    c₁∫g′²/(1+t²)dγ ≤ Var(g) ≤ c₂‖g′‖²_φ ≤ c₃∫g′²/(1+t²)dγ for convex g, constants fitted in [2⁻⁶, 2⁶].
    """
    _require_one_dimensional(g, 'bobkov_houdre')
    if not g.convex:
        raise NotConvexError(f'The Bobkov-Houdré chain needs a convex function, "{g.key}" is not')

    def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
        return evaluate_batch(g, Z), np.abs(subgradient_batch(g, Z)[:, 0])

    draws, slopes = engine.map_chunks(1, count, seed, transform)
    variance = jackknife_variance(draws)
    integral = weighted_derivative_integral(g)
    orlicz_sq = orlicz_norm(slopes, YoungFunction.talagrand()) ** 2

    lower = fit_constants(
        [ConstantSpec('c1', box(*CHAIN_BOX), Preference.MAXIMIZE)],
        lambda values: above_margin(variance.hi, values['c1'] * integral)
    )
    upper = fit_constants(
        [ConstantSpec('c2', box(*CHAIN_BOX), Preference.MINIMIZE),
         ConstantSpec('c3', box(*CHAIN_BOX), Preference.MINIMIZE)],
        lambda values: np.array([below_margin(variance.lo, values['c2'] * orlicz_sq),
                                 below_margin(values['c2'] * orlicz_sq, values['c3'] * integral)])
    )

    c1, c2, c3 = lower.values['c1'], upper.values['c2'], upper.values['c3']
    records: list[GridRecord] = []
    records += make_records([0.0], [variance.value], [variance.lo], [variance.hi], [c1 * integral],
                            [float(above_margin(variance.hi, c1 * integral))], label='c1 I <= var')
    records += make_records([1.0], [variance.value], [variance.lo], [variance.hi], [c2 * orlicz_sq],
                            [float(below_margin(variance.lo, c2 * orlicz_sq))], label='var <= c2 ||g\'||_phi^2')
    records += make_records([2.0], [c2 * orlicz_sq], [c2 * orlicz_sq], [c2 * orlicz_sq], [c3 * integral],
                            [float(below_margin(c2 * orlicz_sq, c3 * integral))], label='c2 ||g\'||_phi^2 <= c3 I')

    notes = [f'var = {variance.value:.6g}', f'integral = {integral:.6g}', f'phi-norm^2 = {orlicz_sq:.6g}']
    if isinstance(g.params, GAlphaParams):
        notes.append(f'var*alpha^2 = {variance.value * g.params.alpha ** 2:.6g}')
    return make_verdict('bobkov_houdre', g.key, records, lower.constants + upper.constants, notes,
                        feasible=lower.feasible and upper.feasible)


def check_variance_scaling(variances: Sequence[tuple[float, Estimate]],
                           exponent: float = 2.0,
                           factor: float = VARIANCE_SCALING_FACTOR,
                           function_key: str = 'galpha') -> InequalityVerdict:
    """Var·α^exponent stays within `factor` across the family, e.g. Var(g_α) ≍ α⁻²."""
    if not variances:
        raise DomainError('Variance scaling needs at least one member')

    alphas = np.array([alpha for alpha, _ in variances], dtype=float)
    scaled = np.array([variance.value * alpha ** exponent for alpha, variance in variances])
    if np.any(scaled <= 0):
        raise DomainError('Variance scaling needs positive variances')
    spread = float(np.max(scaled) / np.min(scaled))

    records = make_records(alphas, scaled, scaled, scaled, np.full(alphas.size, factor),
                           [float(below_margin(spread, factor))] * alphas.size, label='var * alpha^exponent')
    return make_verdict('variance_scaling', function_key, records, notes=[f'spread = {spread:.4g}'])


def check_lemma_key(samples: Sequence[tuple[FunctionSpec, EmpiricalDistribution]],
                    orders: Sequence[float] = LEMMA_KEY_ORDERS,
                    t_grid: Sequence[float] = LEMMA_KEY_GRID) -> InequalityVerdict:
    """
    For nondecreasing convex g on the line:
      (1) 𝔼(g - med)₊^p ≥ σ_p^p·g′(0+)^p, exact;
      (2) Var ≤ C₁·g′((C₁/s)−)²;
      (3) P(g(ζ) - g(0) ≥ t√Var) ≥ 1 - Φ(C₁(1/s + t)),
    with s = √Var/‖g′‖_{L₂(γ)} and one C₁ ∈ [1/4, 64] fitted jointly over the family.
    """
    if not samples:
        raise DomainError('The key lemma needs at least one function')

    t = np.asarray(t_grid, dtype=float)
    records: list[GridRecord] = []
    members = []
    for g, emp in samples:
        _require_one_dimensional(g, 'lemma_key')
        if not (g.convex and g.nondecreasing):
            raise NotConvexError(f'The key lemma needs a nondecreasing convex function, "{g.key}" is not')
        if emp.function_key != g.key:
            raise DomainError(f'Sample of {emp.function_key} given for {g.key}')

        slope = right_derivative(g, 0.0)
        positive = np.maximum(emp.draws - emp.median(), 0.0)
        for p in orders:
            moment = jackknife_mean(positive ** p)
            bound = sigma_p(p) ** p * slope ** p
            records += make_records([p], [moment.value], [moment.lo], [moment.hi], [bound],
                                    [float(above_margin(moment.hi, bound))], label=f'{g.key} part 1')

        variance = jackknife_variance(emp.draws)
        energy = derivative_l2_norm_sq(g)
        if energy <= 0 or variance.value <= 0:
            raise DomainError(f'"{g.key}" is constant under the Gaussian measure')
        s = math.sqrt(variance.value / energy)
        counts = np.asarray(emp.count_at_least(evaluate(g, 0.0) + t * math.sqrt(variance.value)))
        tail_lo, tail_hi = wilson_interval(counts, emp.count)
        members.append((g, emp, variance, s, counts, tail_lo, tail_hi))

    def part_two(g: FunctionSpec, s: float, c1: float) -> float:
        return c1 * left_derivative(g, c1 / s) ** 2

    def part_three(s: float, c1: float) -> np.ndarray:
        return 1.0 - std_normal_cdf(c1 * (1.0 / s + t))

    def margins(values: dict[str, float]) -> np.ndarray:
        c1 = values['C1']
        parts = []
        for g, _, variance, s, counts, _, tail_hi in members:
            parts.append(np.atleast_1d(below_margin(variance.lo, part_two(g, s, c1))))
            resolved = counts >= MIN_RESOLVED_COUNT
            parts.append(above_margin(tail_hi[resolved], part_three(s, c1)[resolved]))
        return np.concatenate(parts)

    fit = fit_constants([ConstantSpec('C1', box(0.25, 64.0), Preference.MINIMIZE)], margins)
    c1 = fit.values['C1']

    notes = []
    for g, emp, variance, s, counts, tail_lo, tail_hi in members:
        bound = part_two(g, s, c1)
        records += make_records([c1 / s], [variance.value], [variance.lo], [variance.hi], [bound],
                                [float(below_margin(variance.lo, bound))], label=f'{g.key} part 2')
        curve = part_three(s, c1)
        records += make_records(t, counts / emp.count, tail_lo, tail_hi, curve, above_margin(tail_hi, curve),
                                counts >= MIN_RESOLVED_COUNT, label=f'{g.key} part 3')
        notes.append(f'{g.key}: s = {s:.6g}, C1/s = {c1 / s:.6g}')

    keys = ','.join(g.key for g, _ in samples)
    return make_verdict('lemma_key', keys, records, fit.constants, notes, feasible=fit.feasible)
