"""
Concavity of t ↦ Φ⁻¹(P(f(W) ≤ t)) for W with independent χ²(k) coordinates.
"""
import math

import numpy as np

from core.errors import DomainError, NotConvexError
from core.labs.inequalities.fitting import make_records, make_verdict
from core.labs.mc_engine import CHUNK_SIZE, MIN_SAMPLES, MonteCarloEngine
from core.models.distributions import EmpiricalDistribution
from core.models.functions import FunctionSpec
from core.models.streams import RngStream
from core.models.verdicts import InequalityVerdict
from core.tools.catalog import evaluate_batch
from core.tools.gaussian import std_normal_quantile
from core.tools.intervals import bootstrap_cdf

CHI2_PROBABILITY_RANGE = (0.01, 0.99)
CHI2_GRID_POINTS = 40
CONCAVITY_SDS = 3.0
BOOTSTRAP_REPLICATES = 200
BOOTSTRAP_STREAM = 1 << 40


def sample_chi2_values(f: FunctionSpec,
                       k: int,
                       engine: MonteCarloEngine,
                       count: int,
                       seed: int) -> EmpiricalDistribution:
    """
    f(W) with Wⱼ = Σᵢ ζᵢⱼ², i ≤ k, built from k·n standard Gaussians per draw.
    """
    if k < 2:
        raise DomainError(f'The χ² degrees of freedom must be at least 2, got {k}')
    if count < MIN_SAMPLES:
        raise DomainError(f'At least {MIN_SAMPLES} samples are needed, got {count}')
    n = f.dimension

    def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
        W = np.sum(Z.reshape(Z.shape[0], k, n) ** 2, axis=1)
        return (evaluate_batch(f, W),)

    (draws,) = engine.map_chunks(k * n, count, seed, transform)
    return EmpiricalDistribution(
        values=np.sort(draws),
        draws=draws,
        master_seed=seed,
        streams=(0, math.ceil(count / CHUNK_SIZE) - 1),
        function_key=f'{f.key}|chi2:k={k}'
    )


def _probit(cdf: np.ndarray, count: int) -> np.ndarray:
    floor = 0.5 / count
    return np.asarray(std_normal_quantile(np.clip(cdf, floor, 1.0 - floor)), dtype=float)


def check_chi2_concavity(f: FunctionSpec,
                         k: int,
                         engine: MonteCarloEngine,
                         count: int,
                         seed: int,
                         points: int = CHI2_GRID_POINTS,
                         replicates: int = BOOTSTRAP_REPLICATES) -> InequalityVerdict:
    """
    Second differences of Φ⁻¹∘F on an equispaced t-grid spanning the 1% to 99% quantiles stay below three bootstrap
    standard deviations.
    """
    if not f.convex:
        raise NotConvexError(f'χ² concavity needs a coordinatewise nondecreasing convex function, "{f.key}" is not')
    if points < 3:
        raise DomainError('The concavity grid needs at least three points')

    emp = sample_chi2_values(f, k, engine, count, seed)
    low, high = emp.quantile(np.array(CHI2_PROBABILITY_RANGE))
    t = np.linspace(low, high, points)

    y = _probit(np.asarray(emp.cdf(t)), emp.count)
    stream = RngStream(master_seed=seed, stream_id=BOOTSTRAP_STREAM)
    resampled = _probit(bootstrap_cdf(emp.values, t, replicates, stream, engine.threads), emp.count)

    second = np.diff(y, 2)
    sd = np.std(np.diff(resampled, 2, axis=1), axis=0, ddof=1)
    allowance = CONCAVITY_SDS * sd
    margins = (allowance - second) / np.maximum(allowance, 1e-300)

    records = make_records(t[1:-1], second, second - allowance, second + allowance, allowance, margins,
                           label='second difference <= 3 sd')
    return make_verdict('chi2_concavity', emp.function_key, records, notes=[f'k = {k}', f'{points} grid points'])
