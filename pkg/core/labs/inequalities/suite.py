import math
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from core.errors import DomainError, UnknownCheckError
from core.labs.base import BaseLab
from core.labs.inequalities import chi2, exact, one_dimensional, rates, reversal
from core.labs.inequalities.fitting import below_margin, hypothesis_not_met, make_records, make_verdict
from core.labs.mc_engine import MonteCarloEngine, estimate_stats, tail_curve
from core.labs.rearrangement import RearrangementLab
from core.models.distributions import (
    ConcConstants, ConcentrationProfile, EmpiricalDistribution, Estimate, SummaryStats
)
from core.models.functions import FunctionSpec, LinearParams
from core.models.rearrangement import RearrangementReport
from core.models.verdicts import InequalityVerdict, VerdictStatus
from core.tools.catalog import rate_for

DEFAULT_T_GRID = tuple(np.round(np.arange(0.0, 4.01, 0.25), 2))
DEFAULT_SD_GRID = tuple(np.round(np.arange(0.0, 6.01, 0.25), 2))
DEFAULT_ALPHA = reversal.DEFAULT_ALPHA
DEFAULT_CHI2_K = 2


class CheckContext:
    """
    Everything a check may need about one function, sampled lazily and at most once, all from the same seed.
    """

    def __init__(self,
                 spec: FunctionSpec,
                 engine: MonteCarloEngine,
                 count: int,
                 seed: int,
                 t_grid: Sequence[float] | None = None,
                 alpha: float = DEFAULT_ALPHA,
                 chi2_k: int = DEFAULT_CHI2_K) -> None:
        self.spec = spec
        self.engine = engine
        self.count = count
        self.seed = seed
        self.t_grid = tuple(t_grid) if t_grid is not None else None
        self.alpha = alpha
        self.chi2_k = chi2_k

    @cached_property
    def emp(self) -> EmpiricalDistribution:
        return self.engine.sample_values(self.spec, self.count, self.seed)

    @cached_property
    def stats(self) -> SummaryStats:
        return estimate_stats(self.emp)

    @cached_property
    def constants(self) -> ConcConstants:
        return self.engine.concentration_constants(self.spec, self.count, self.seed)

    @cached_property
    def grad_sq(self) -> Estimate:
        if self.spec.lipschitz is not None and self.spec.lipschitz > 0:
            return self.constants.grad_sq_mean
        return self.engine.estimate_grad_sq(self.spec, self.count, self.seed)

    def lipschitz(self) -> float:
        if self.spec.lipschitz is None or self.spec.lipschitz <= 0:
            raise DomainError(f'"{self.spec.key}" has no Lipschitz constant')
        return float(self.spec.lipschitz)

    @cached_property
    def lipschitz_profile(self) -> ConcentrationProfile:
        """Tails about the median in units of L."""
        return tail_curve(self.emp, self.emp.median(), self.lipschitz(), self.t_grid or DEFAULT_T_GRID,
                          center_label='median', scale_label='lipschitz')

    @cached_property
    def sd_profile(self) -> ConcentrationProfile:
        """Tails about the median in units of √Var."""
        sd = math.sqrt(self.stats.variance.value)
        return tail_curve(self.emp, self.emp.median(), sd, self.t_grid or DEFAULT_SD_GRID,
                          center_label='median', scale_label='sd')

    @cached_property
    def mean_profile(self) -> ConcentrationProfile:
        """Tails about the mean, unscaled."""
        return tail_curve(self.emp, self.emp.mean(), 1.0, self.t_grid or DEFAULT_T_GRID,
                          center_label='mean', scale_label='one')

    @cached_property
    def rearrangement(self) -> RearrangementReport:
        lab = RearrangementLab(threads=self.engine.threads)
        curve = lab.rearrange(self.emp)
        return lab.check_properties(curve, self.spec, self.emp, self.grad_sq)


def rearrangement_verdict(report: RearrangementReport) -> InequalityVerdict:
    """The rearrangement properties as a verdict, one record per property."""
    records = []
    records += make_records([0.0], [float(report.monotone_ok)], [float(report.monotone_ok)],
                            [float(report.monotone_ok)], [1.0], [0.0 if report.monotone_ok else -1.0],
                            label='monotone')
    records += make_records([1.0], [report.convexity_sd_margin], [report.convexity_sd_margin],
                            [report.convexity_sd_margin], [-3.0], [0.0 if report.convexity_ok else -1.0],
                            label='convexity (sd units)')
    records += make_records([2.0], [report.lip_estimate], [report.lip_estimate], [report.lip_estimate],
                            [report.lip_bound], [0.0 if report.lip_ok else -1.0], label='lipschitz')
    records += make_records([3.0], [report.ks_distance], [report.ks_distance], [report.ks_distance], [0.01],
                            [float(below_margin(report.ks_distance, 0.01))], label='pushforward ks')
    bound = report.grad_sq_bound if report.grad_sq_bound is not None else math.inf
    records += make_records([4.0], [report.dirichlet_energy], [report.dirichlet_energy], [report.dirichlet_energy],
                            [bound], [0.0 if report.dirichlet_ok else -1.0], label='dirichlet')
    return make_verdict('rearrangement', report.function_key, records)


def _lemma_key(ctx: CheckContext) -> InequalityVerdict:
    return one_dimensional.check_lemma_key([(ctx.spec, ctx.emp)])


def _chi2(ctx: CheckContext) -> InequalityVerdict:
    return chi2.check_chi2_concavity(ctx.spec, ctx.chi2_k, ctx.engine, ctx.count, ctx.seed)


def _small_deviation(ctx: CheckContext) -> InequalityVerdict:
    return exact.check_small_deviation(ctx.emp, affine=isinstance(ctx.spec.params, LinearParams))


CheckRunner = Callable[[CheckContext], InequalityVerdict]

CHECKS: dict[str, CheckRunner] = {
    'upper_gaussian': lambda ctx: exact.check_upper_gaussian(ctx.lipschitz_profile, ctx.lipschitz()),
    'lower_deviation_var': lambda ctx: exact.check_lower_deviation_var(ctx.sd_profile, ctx.spec.convex),
    'small_deviation': _small_deviation,
    'skewness': lambda ctx: exact.check_skewness(ctx.emp),
    'kwapien': lambda ctx: exact.check_kwapien(ctx.emp),
    'poincare_chain': lambda ctx: exact.check_poincare_chain(ctx.constants),
    'median_mean_interchange': lambda ctx: exact.check_median_mean_interchange(ctx.emp),
    'reversal': lambda ctx: reversal.check_reversal(ctx.lipschitz_profile, ctx.constants),
    'theorem_main': lambda ctx: reversal.check_theorem_main(ctx.lipschitz_profile, ctx.constants, ctx.alpha),
    'prop_reversal_tail': lambda ctx: reversal.check_prop_reversal_tail(ctx.sd_profile, ctx.constants, ctx.spec),
    'moment_bounds': lambda ctx: reversal.check_moment_bounds(ctx.stats, ctx.constants),
    'equivalence_triangle': lambda ctx: reversal.check_equivalence_triangle(ctx.lipschitz_profile, ctx.stats,
                                                                            ctx.constants),
    'two_sided_rates': lambda ctx: rates.check_two_sided_rates(ctx.mean_profile, rate_for(ctx.spec)),
    'talagrand': lambda ctx: one_dimensional.check_talagrand(ctx.spec, ctx.engine, ctx.count, ctx.seed),
    'bobkov_houdre': lambda ctx: one_dimensional.check_bobkov_houdre(ctx.spec, ctx.engine, ctx.count, ctx.seed),
    'lemma_key': _lemma_key,
    'chi2_concavity': _chi2,
    'rearrangement': lambda ctx: rearrangement_verdict(ctx.rearrangement),
}


class InequalitySuite(BaseLab):
    """
    Runs named checks on one function. A check that does not apply to the function (no Lipschitz constant, not
    convex, no known rate ...) is reported as hypothesis_not_met rather than raised.
    """

    def __init__(self, engine: MonteCarloEngine | None = None, threads: int | None = None) -> None:
        super().__init__(name='inequality_suite', threads=threads)
        self.engine = engine or MonteCarloEngine(threads=self.threads)

    @staticmethod
    def names() -> list[str]:
        return list(CHECKS)

    @staticmethod
    def resolve(names: Sequence[str]) -> list[str]:
        """Validates check names; 'all' expands to every registered check."""
        if list(names) == ['all']:
            return list(CHECKS)
        for name in names:
            if name not in CHECKS:
                raise UnknownCheckError(f'Unknown check "{name}". Known checks: {", ".join(CHECKS)}')
        return list(names)

    def context(self, spec: FunctionSpec, count: int, seed: int, **options) -> CheckContext:
        return CheckContext(spec, self.engine, count, seed, **options)

    def run_check(self, name: str, ctx: CheckContext) -> InequalityVerdict:
        self.resolve([name])
        runner = CHECKS[name]
        self._log.info(f'🔎 Running {name} on {ctx.spec.key}')
        try:
            verdict = runner(ctx)
        except DomainError as e:
            self._log.warning(f'⚠️ {name} does not apply to {ctx.spec.key}: {e}')
            return hypothesis_not_met(name, ctx.spec.key, str(e))

        match verdict.status:
            case VerdictStatus.PASSED:
                self._log.info(f'✅ {verdict.summary()}')
            case VerdictStatus.FAILED:
                self._log.warning(f'❌ {verdict.summary()}')
            case VerdictStatus.HYPOTHESIS_NOT_MET:
                self._log.info(f'➖ {verdict.summary()}')
        return verdict

    def run(self,
            spec: FunctionSpec,
            names: Sequence[str],
            count: int,
            seed: int,
            **options) -> list[InequalityVerdict]:
        ctx = self.context(spec, count, seed, **options)
        return [self.run_check(name, ctx) for name in self.resolve(names)]
