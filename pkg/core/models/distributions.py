from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field


class Estimate(BaseModel):
    """A point estimate with a two-sided 95% confidence interval."""
    value: float = Field(description='The point estimate')
    lo: float = Field(description='Lower end of the confidence interval')
    hi: float = Field(description='Upper end of the confidence interval')

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def scaled(self, factor: float) -> 'Estimate':
        bounds = sorted((self.lo * factor, self.hi * factor))
        return Estimate(value=self.value * factor, lo=bounds[0], hi=bounds[1])


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """
    The sampled law of f(Z): values sorted ascending, plus the same values in draw order for resampling.

    `streams` is the inclusive range of stream ids under `master_seed` the draws came from.
    """
    values: np.ndarray
    draws: np.ndarray
    master_seed: int
    streams: tuple[int, int]
    function_key: str

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.shape != self.draws.shape:
            raise ValueError('Sorted values and draws must be flat arrays of the same length.')
        if self.values.size == 0:
            raise ValueError('An empirical distribution needs at least one value.')
        if self.values.size > 1 and np.any(np.diff(self.values) < 0):
            raise ValueError('Empirical values must be sorted ascending.')

    @property
    def count(self) -> int:
        return int(self.values.size)

    def quantile(self, p: float | np.ndarray) -> float | np.ndarray:
        """The generalized inverse of the empirical CDF."""
        q = np.quantile(self.values, p, method='inverted_cdf')
        return float(q) if np.ndim(q) == 0 else q

    def median(self) -> float:
        return float(np.median(self.values))

    def mean(self) -> float:
        return float(np.mean(self.draws))

    def cdf(self, x: float | np.ndarray) -> float | np.ndarray:
        """P(f ≤ x) under the empirical law."""
        fraction = np.searchsorted(self.values, x, side='right') / self.count
        return float(fraction) if np.ndim(fraction) == 0 else fraction

    def count_at_least(self, x: float | np.ndarray) -> np.ndarray:
        return self.count - np.searchsorted(self.values, x, side='left')

    def count_at_most(self, x: float | np.ndarray) -> np.ndarray:
        return np.searchsorted(self.values, x, side='right')

    def count_below(self, x: float | np.ndarray) -> np.ndarray:
        return np.searchsorted(self.values, x, side='left')

    def count_above(self, x: float | np.ndarray) -> np.ndarray:
        return self.count - np.searchsorted(self.values, x, side='right')


class MomentEstimate(BaseModel):
    p: float = Field(description='Order of the centered absolute moment')
    moment: Estimate = Field(description='𝔼|f - M|^p about the median M')
    norm: Estimate = Field(description='(𝔼|f - M|^p)^{1/p}')


class SummaryStats(BaseModel):
    function_key: str
    count: int = Field(ge=1)
    mean: Estimate
    median: Estimate = Field(description='Mid order statistic with a distribution-free order-statistic interval')
    variance: Estimate = Field(description='Sample variance with a delete-block jackknife interval')
    moments: list[MomentEstimate] = Field(default_factory=list)

    def moment_norm(self, p: float) -> Estimate:
        for entry in self.moments:
            if entry.p == p:
                return entry.norm
        raise KeyError(f'No centered moment of order {p} was estimated')


class ConcentrationProfile(BaseModel):
    """
    Empirical tails of (f - center) / scale on a grid, each with a Wilson 95% interval.

    A tail is unresolved at a grid point when fewer than the resolution threshold of samples fall in it; such
    points carry their counts but are excluded from every verdict.
    """
    function_key: str
    sample_count: int = Field(ge=1)
    center: float
    center_label: str = Field(description='median, mean or another labeled center')
    scale: float = Field(gt=0)
    scale_label: str = Field(description='lipschitz, sd, one or another labeled scale')
    t_grid: list[float]
    upper_tail: list[float] = Field(description='P(f ≥ center + t·scale)')
    upper_lo: list[float]
    upper_hi: list[float]
    upper_count: list[int]
    lower_tail: list[float] = Field(description='P(f ≤ center - t·scale)')
    lower_lo: list[float]
    lower_hi: list[float]
    lower_count: list[int]
    two_sided: list[float] = Field(description='P(|f - center| ≥ t·scale)')
    two_sided_lo: list[float]
    two_sided_hi: list[float]
    two_sided_count: list[int]
    min_count: int = Field(description='Counts below this mark a tail as unresolved', default=10)

    def upper_resolved(self) -> np.ndarray:
        return np.asarray(self.upper_count) >= self.min_count

    def lower_resolved(self) -> np.ndarray:
        return np.asarray(self.lower_count) >= self.min_count

    def two_sided_resolved(self) -> np.ndarray:
        return np.asarray(self.two_sided_count) >= self.min_count

    def arrays(self, *names: str) -> list[np.ndarray]:
        return [np.asarray(getattr(self, name), dtype=float) for name in names]


class ConcConstants(BaseModel):
    """Variance, 𝔼‖∇f‖₂² and the over/super-concentration constants derived from them."""
    function_key: str
    sample_count: int = Field(ge=1)
    variance: Estimate
    grad_sq_mean: Estimate
    lipschitz: float = Field(gt=0)
    ov: Estimate = Field(description='√Var / Lip')
    s: Estimate = Field(description='√(Var / 𝔼‖∇f‖₂²)')

    @property
    def tau(self) -> float:
        return self.ov.value * self.s.value


class MedianMeanChain(BaseModel):
    """
    The four L_p distances ½‖ξ - ξ′‖, ‖ξ - med‖, 2‖ξ - 𝔼ξ‖ and 2‖ξ - ξ′‖ for one p, which should be non-decreasing
    in that order. ξ′ is an independent copy.
    """
    p: float
    half_pair: Estimate
    about_median: Estimate
    twice_about_mean: Estimate
    twice_pair: Estimate

    def links(self) -> list[tuple[str, Estimate, Estimate]]:
        return [
            ('half_pair <= about_median', self.half_pair, self.about_median),
            ('about_median <= twice_about_mean', self.about_median, self.twice_about_mean),
            ('twice_about_mean <= twice_pair', self.twice_about_mean, self.twice_pair),
        ]
