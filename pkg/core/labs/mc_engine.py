import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from core.errors import DomainError, NonFiniteEvaluationError
from core.labs.base import BaseLab
from core.models.distributions import (
    ConcConstants, ConcentrationProfile, EmpiricalDistribution, Estimate, MedianMeanChain, MomentEstimate,
    SummaryStats
)
from core.models.functions import FunctionSpec
from core.models.streams import RngStream
from core.settings import GaussianMethod, get_settings
from core.tools.catalog import evaluate_batch, subgradient_batch
from core.tools.gaussian import sample_gaussian_matrix
from core.tools.intervals import (
    block_jackknife, jackknife_mean, jackknife_variance, median_interval, wilson_interval
)
from core.utils import is_ascending

CHUNK_SIZE = 2 ** 14
# Upper bound on entries of one Gaussian batch, keeps memory flat for large n
BATCH_ENTRIES = 2 ** 22
MIN_SAMPLES = 100
MIN_RESOLVED_COUNT = 10
DEFAULT_MOMENTS = (1.0, 2.0, 4.0, 8.0, 16.0)

ChunkTransform = Callable[[np.ndarray], tuple[np.ndarray, ...]]


class MonteCarloEngine(BaseLab):
    """
    Samples f(Z) and ∇f(Z) for Z standard Gaussian in ℝⁿ.

    Draws are split into chunks of `CHUNK_SIZE`; chunk i always reads stream (seed, i), and results are merged in
    chunk order, so the output does not depend on the number of threads.
    """

    def __init__(self, threads: int | None = None, method: GaussianMethod | None = None) -> None:
        super().__init__(name='mc_engine', threads=threads)
        self.method = method or get_settings().gaussian_method

    def map_chunks(self, dimension: int, count: int, seed: int, transform: ChunkTransform) -> list[np.ndarray]:
        """
        Applies `transform` to consecutive batches of Gaussian rows and concatenates each returned component.
        """
        if count < 1:
            raise DomainError(f'Sample count must be positive, got {count}')

        chunks = math.ceil(count / CHUNK_SIZE)
        rows_per_batch = max(1, BATCH_ENTRIES // dimension)

        def run(index: int) -> list[tuple[np.ndarray, ...]]:
            rows = min(CHUNK_SIZE, count - index * CHUNK_SIZE)
            stream = RngStream(master_seed=seed, stream_id=index)
            parts: list[tuple[np.ndarray, ...]] = []
            done = 0
            while done < rows:
                batch = min(rows_per_batch, rows - done)
                Z, stream = sample_gaussian_matrix(stream, batch, dimension, self.method)
                parts.append(transform(Z))
                done += batch
            return parts

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = [part for chunk in pool.map(run, range(chunks)) for part in chunk]

        return [np.concatenate([part[i] for part in results]) for i in range(len(results[0]))]

    def _values_transform(self, spec: FunctionSpec) -> ChunkTransform:
        def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
            values = evaluate_batch(spec, Z)
            self._ensure_finite(spec, Z, values)
            return (values,)

        return transform

    @staticmethod
    def _ensure_finite(spec: FunctionSpec, Z: np.ndarray, values: np.ndarray) -> None:
        bad = ~np.isfinite(values)
        if np.any(bad):
            row = int(np.argmax(bad))
            raise NonFiniteEvaluationError(spec.key, Z[row].copy(), float(values[row]))

    def sample_values(self, spec: FunctionSpec, count: int, seed: int) -> EmpiricalDistribution:
        """N evaluations of f on independent Gaussian vectors, sorted."""
        if count < MIN_SAMPLES:
            raise DomainError(f'At least {MIN_SAMPLES} samples are needed, got {count}')

        self._log.info(f'🎲 Sampling {count} values of {spec.key} (seed {seed})')
        try:
            (draws,) = self.map_chunks(spec.dimension, count, seed, self._values_transform(spec))
        except NonFiniteEvaluationError as e:
            self._log.error(f'❌ {e} Offending input starts with {e.offending_input[:8]}')
            raise

        return EmpiricalDistribution(
            values=np.sort(draws),
            draws=draws,
            master_seed=seed,
            streams=(0, math.ceil(count / CHUNK_SIZE) - 1),
            function_key=spec.key
        )

    def sample_grad_sq(self, spec: FunctionSpec, count: int, seed: int) -> np.ndarray:
        """‖∇f(Z)‖₂² in draw order, on the same Gaussian vectors `sample_values` uses for this seed."""
        def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
            return (np.sum(subgradient_batch(spec, Z) ** 2, axis=1),)

        (grad_sq,) = self.map_chunks(spec.dimension, count, seed, transform)
        return grad_sq

    def estimate_grad_sq(self, spec: FunctionSpec, count: int, seed: int) -> Estimate:
        """Monte Carlo mean of ‖∇f(Z)‖₂² with a jackknife interval."""
        self._log.info(f'📐 Estimating 𝔼‖∇f‖² for {spec.key}')
        return jackknife_mean(self.sample_grad_sq(spec, count, seed))

    def concentration_constants(self, spec: FunctionSpec, count: int, seed: int) -> ConcConstants:
        """Var, 𝔼‖∇f‖₂², ov and s from one joint sample, all intervals by the same jackknife blocks."""
        if spec.lipschitz is None or spec.lipschitz <= 0:
            raise DomainError(f'"{spec.key}" has no Lipschitz constant, so ov(f) is undefined')
        if count < MIN_SAMPLES:
            raise DomainError(f'At least {MIN_SAMPLES} samples are needed, got {count}')

        self._log.info(f'📊 Estimating concentration constants of {spec.key} from {count} samples')
        evaluate_values = self._values_transform(spec)

        def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
            (values,) = evaluate_values(Z)
            return values, np.sum(subgradient_batch(spec, Z) ** 2, axis=1)

        values, grad_sq = self.map_chunks(spec.dimension, count, seed, transform)
        lipschitz = float(spec.lipschitz)
        centered = values - np.mean(values)
        columns = {'x': centered, 'xx': centered ** 2, 'g': grad_sq}

        def variance(m) -> float:
            return max((m['xx'] - m['x'] ** 2) * count / (count - 1), 0.0)

        def ov(m) -> float:
            return math.sqrt(variance(m)) / lipschitz

        def s(m) -> float:
            return math.sqrt(variance(m) / m['g']) if m['g'] > 0 else 0.0

        constants = ConcConstants(
            function_key=spec.key,
            sample_count=count,
            variance=block_jackknife(columns, variance),
            grad_sq_mean=block_jackknife(columns, lambda m: m['g']),
            lipschitz=lipschitz,
            ov=block_jackknife(columns, ov),
            s=block_jackknife(columns, s)
        )
        self._log.info(f'✅ {spec.key}: Var={constants.variance.value:.4g}, ov={constants.ov.value:.4g}, '
                       f's={constants.s.value:.4g}')
        return constants


def estimate_stats(emp: EmpiricalDistribution, ps: Sequence[float] = DEFAULT_MOMENTS) -> SummaryStats:
    """Mean, median, variance and the centered moments 𝔼|f - M|^p about the median, each with an interval."""
    if emp.count < MIN_SAMPLES:
        raise DomainError(f'At least {MIN_SAMPLES} samples are needed, got {emp.count}')

    median = median_interval(emp.values)
    deviations = np.abs(emp.draws - median.value)

    moments = []
    for p in ps:
        if p <= 0:
            raise DomainError(f'Moment orders must be positive, got {p}')
        moment = jackknife_mean(deviations ** p)
        moments.append(MomentEstimate(
            p=float(p),
            moment=moment,
            norm=Estimate(
                value=moment.value ** (1.0 / p),
                lo=max(moment.lo, 0.0) ** (1.0 / p),
                hi=max(moment.hi, 0.0) ** (1.0 / p)
            )
        ))

    return SummaryStats(
        function_key=emp.function_key,
        count=emp.count,
        mean=jackknife_mean(emp.draws),
        median=median,
        variance=jackknife_variance(emp.draws),
        moments=moments
    )


def tail_curve(emp: EmpiricalDistribution,
               center: float,
               scale: float,
               t_grid: Sequence[float],
               center_label: str = 'median',
               scale_label: str = 'one',
               min_count: int = MIN_RESOLVED_COUNT) -> ConcentrationProfile:
    """
    P(f ≥ center + t·scale), P(f ≤ center - t·scale) and P(|f - center| ≥ t·scale) on the grid, each with a
    Wilson interval. Counts are exact, so the tails are non-increasing in t.
    """
    if not scale > 0:
        raise DomainError(f'The scale must be positive, got {scale}')
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0) or not is_ascending(grid):
        raise DomainError('The t-grid must be non-negative and strictly ascending')

    n = emp.count
    upper = np.asarray(emp.count_at_least(center + grid * scale))
    lower = np.asarray(emp.count_at_most(center - grid * scale))
    deviations = np.sort(np.abs(emp.values - center))
    two_sided = n - np.searchsorted(deviations, grid * scale, side='left')

    upper_lo, upper_hi = wilson_interval(upper, n)
    lower_lo, lower_hi = wilson_interval(lower, n)
    two_lo, two_hi = wilson_interval(two_sided, n)

    return ConcentrationProfile(
        function_key=emp.function_key,
        sample_count=n,
        center=center,
        center_label=center_label,
        scale=scale,
        scale_label=scale_label,
        t_grid=grid.tolist(),
        upper_tail=(upper / n).tolist(),
        upper_lo=upper_lo.tolist(),
        upper_hi=upper_hi.tolist(),
        upper_count=upper.astype(int).tolist(),
        lower_tail=(lower / n).tolist(),
        lower_lo=lower_lo.tolist(),
        lower_hi=lower_hi.tolist(),
        lower_count=lower.astype(int).tolist(),
        two_sided=(two_sided / n).tolist(),
        two_sided_lo=two_lo.tolist(),
        two_sided_hi=two_hi.tolist(),
        two_sided_count=two_sided.astype(int).tolist(),
        min_count=min_count
    )


def median_mean_chain(emp: EmpiricalDistribution, ps: Sequence[float] = (1.0, 2.0, 4.0)) -> list[MedianMeanChain]:
    """
    The L_p chain relating deviations about the median, the mean and an independent copy.

    The copy ξ′ is the draw sequence shifted by one place, a derangement that pairs independent draws.
    """
    draws = emp.draws
    partner = np.roll(draws, -1)
    median = float(np.median(draws))
    mean = float(np.mean(draws))

    chains = []
    for p in ps:
        def norm_of(deviation: np.ndarray, factor: float) -> Estimate:
            moment = jackknife_mean(np.abs(deviation) ** p)
            return Estimate(
                value=factor * moment.value ** (1.0 / p),
                lo=factor * max(moment.lo, 0.0) ** (1.0 / p),
                hi=factor * max(moment.hi, 0.0) ** (1.0 / p)
            )

        chains.append(MedianMeanChain(
            p=float(p),
            half_pair=norm_of(draws - partner, 0.5),
            about_median=norm_of(draws - median, 1.0),
            twice_about_mean=norm_of(draws - mean, 2.0),
            twice_pair=norm_of(draws - partner, 2.0)
        ))
    return chains
