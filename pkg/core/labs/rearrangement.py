import math
from typing import Sequence

import numpy as np

from core.errors import DomainError
from core.labs.base import BaseLab
from core.models.distributions import EmpiricalDistribution, Estimate
from core.models.functions import FunctionSpec
from core.models.rearrangement import RearrangementCurve, RearrangementReport
from core.models.streams import RngStream
from core.tools.catalog import derivative
from core.tools.gaussian import gaussian_expectation, std_normal_cdf, std_normal_quantile
from core.tools.intervals import bootstrap_quantiles
from core.utils import is_ascending

GRID_POINTS = 2048
THINNED_POINTS = 64
BOOTSTRAP_REPLICATES = 200
CONVEXITY_SDS = 3.0
LIP_SLACK = 1.02
# The Lipschitz contraction is read off the central part of the curve, where bootstrap slopes are tight
LIP_WINDOW = (0.01, 0.99)
KS_TOLERANCE = 0.01
DIRICHLET_SLACK = 1.05
# Bootstrap replicates read streams from here on, away from the sampling chunks
BOOTSTRAP_STREAM = 1 << 40


def default_probabilities(count: int, points: int = GRID_POINTS) -> np.ndarray:
    """Levels equispaced in probability, kept two order statistics away from 0 and 1."""
    margin = max(0.5 / points, 2.0 / count)
    if margin >= 0.5:
        raise DomainError(f'{count} samples cannot resolve a rearrangement grid')
    return np.linspace(margin, 1.0 - margin, points)


def gaussian_rearrangement(emp: EmpiricalDistribution, s_grid: Sequence[float] | None = None) -> RearrangementCurve:
    """
    f*(s) = empirical quantile of f(Z) at level Φ(s). Without a grid, 2048 levels equispaced in probability are used.
    """
    if s_grid is None:
        probabilities = default_probabilities(emp.count)
        s = np.asarray(std_normal_quantile(probabilities), dtype=float)
    else:
        s = np.asarray(s_grid, dtype=float)
        if s.size < 2 or not is_ascending(s):
            raise DomainError('The s-grid must hold at least two strictly ascending points')
        probabilities = np.asarray(std_normal_cdf(s), dtype=float)
        floor = 1.0 / emp.count
        if probabilities[0] <= floor or probabilities[-1] >= 1.0 - floor:
            raise DomainError(f'The s-grid [{s[0]:.4g}, {s[-1]:.4g}] leaves the resolvable quantile range of '
                              f'{emp.count} samples')

    values = np.asarray(emp.quantile(probabilities), dtype=float)
    return RearrangementCurve(s_grid=s, probabilities=probabilities, values=values, source=emp.function_key)


def _pushforward_cdf(curve: RearrangementCurve, x: np.ndarray, side: str) -> np.ndarray:
    """
    P(f*(ζ) ≤ x) (side='right') or P(f*(ζ) < x) (side='left'), with f* linear in s between grid points.
    """
    index = np.searchsorted(curve.values, x, side=side)
    inside = (index > 0) & (index < len(curve))
    j = np.clip(index - 1, 0, len(curve) - 2)
    f_lo, f_hi = curve.values[j], curve.values[j + 1]
    gap = np.where(f_hi > f_lo, f_hi - f_lo, 1.0)
    fraction = np.clip((x - f_lo) / gap, 0.0, 1.0)
    s = curve.s_grid[j] + fraction * (curve.s_grid[j + 1] - curve.s_grid[j])
    return np.where(inside, std_normal_cdf(s), np.where(index == 0, 0.0, 1.0))


def pushforward_ks_distance(curve: RearrangementCurve, emp: EmpiricalDistribution) -> float:
    """
    sup |P(f*(ζ) ≤ x) - P_N(f ≤ x)|, taken at the distinct sample values from both sides so atoms are compared
    correctly.
    """
    x = np.unique(emp.values)
    right = np.abs(_pushforward_cdf(curve, x, 'right') - emp.count_at_most(x) / emp.count)
    left = np.abs(_pushforward_cdf(curve, x, 'left') - emp.count_below(x) / emp.count)
    return float(max(np.max(right), np.max(left)))


def weighted_derivative_integral(g: FunctionSpec) -> float:
    """∫ g′(t)²/(1 + t²) dγ(t) over [-10, 10]."""
    slope = derivative(g)
    return gaussian_expectation(lambda t: slope(t) ** 2 / (1.0 + t * t), points=g.kinks)


def derivative_l2_norm_sq(g: FunctionSpec) -> float:
    """‖g′‖²_{L₂(γ)}."""
    slope = derivative(g)
    return gaussian_expectation(lambda t: slope(t) ** 2, points=g.kinks)


class RearrangementLab(BaseLab):
    """
    Builds Gaussian rearrangements and checks that they are monotone, convex for convex f, contract the Lipschitz
    constant and the Dirichlet energy, and reproduce the sampled law.
    """

    def __init__(self, threads: int | None = None, replicates: int = BOOTSTRAP_REPLICATES) -> None:
        super().__init__(name='rearrangement', threads=threads)
        if replicates < 2:
            raise DomainError('The bootstrap needs at least two replicates')
        self.replicates = replicates

    def rearrange(self, emp: EmpiricalDistribution, s_grid: Sequence[float] | None = None) -> RearrangementCurve:
        self._log.info(f'🔀 Rearranging {emp.function_key} from {emp.count} samples')
        return gaussian_rearrangement(emp, s_grid)

    @staticmethod
    def _slopes(s: np.ndarray, values: np.ndarray) -> np.ndarray:
        return np.diff(values, axis=-1) / np.diff(s)

    def check_properties(self,
                         curve: RearrangementCurve,
                         spec: FunctionSpec,
                         emp: EmpiricalDistribution,
                         grad_sq: Estimate | None = None) -> RearrangementReport:
        """
        Monotonicity, discrete convexity against a bootstrap SD, the Lipschitz and Dirichlet contractions, and the
        pushforward identity. Failures are reported, never raised.
        """
        if curve.source != emp.function_key:
            raise DomainError(f'Curve of {curve.source} checked against a sample of {emp.function_key}')

        step = max(1, len(curve) // THINNED_POINTS)
        p = curve.probabilities[::step]
        s = curve.s_grid[::step]
        values = curve.values[::step]

        stream = RngStream(master_seed=emp.master_seed, stream_id=BOOTSTRAP_STREAM)
        resampled = bootstrap_quantiles(emp.values, p, self.replicates, stream, self.threads)
        slopes = self._slopes(s, values)
        resampled_slopes = self._slopes(s, resampled)

        increments = np.diff(slopes)
        increment_sd = np.std(np.diff(resampled_slopes, axis=1), axis=0, ddof=1)
        safe_sd = np.where(increment_sd > 0, increment_sd, np.inf)
        sd_margin = float(np.min(increments / safe_sd)) if increments.size else 0.0
        convexity_ok = bool(np.all(increments >= -CONVEXITY_SDS * increment_sd))

        slope_sd = np.std(resampled_slopes, axis=0, ddof=1)
        central = (p[:-1] >= LIP_WINDOW[0]) & (p[1:] <= LIP_WINDOW[1])
        if not np.any(central):
            central = np.ones_like(slopes, dtype=bool)
        lipschitz = spec.lipschitz if spec.lipschitz is not None else math.inf
        lip_bound = LIP_SLACK * lipschitz
        lip_ok = bool(np.all(slopes[central] - CONVEXITY_SDS * slope_sd[central] <= lip_bound))

        ks = pushforward_ks_distance(curve, emp)
        # Slopes are constant between thinned points, which are equispaced in probability
        energy = float(np.sum(slopes ** 2 * np.diff(p)))
        grad_sq_bound = DIRICHLET_SLACK * grad_sq.hi if grad_sq is not None else None
        dirichlet_ok = grad_sq_bound is None or energy <= grad_sq_bound

        report = RearrangementReport(
            function_key=spec.key,
            monotone_ok=bool(np.all(np.diff(curve.values) >= 0)),
            convexity_margin=float(np.min(increments)) if increments.size else 0.0,
            convexity_sd_margin=sd_margin,
            convexity_ok=convexity_ok,
            lip_estimate=float(np.max(slopes[central])),
            lip_bound=lip_bound,
            lip_ok=lip_ok,
            ks_distance=ks,
            ks_ok=ks <= KS_TOLERANCE,
            dirichlet_energy=energy,
            grad_sq_bound=grad_sq_bound,
            dirichlet_ok=dirichlet_ok,
            s_thinned=s.tolist(),
            derivative_curve=slopes.tolist()
        )

        if not spec.convex:
            self._log.warning(f'⚠️ {spec.key} is not convex; its rearrangement need not be convex')
        outcome = '✅' if report.passed else '❌'
        self._log.info(f'{outcome} Rearrangement of {spec.key}: Lip≈{report.lip_estimate:.4g}, KS={ks:.3g}, '
                       f'convexity margin {sd_margin:.3g} SD')
        return report
