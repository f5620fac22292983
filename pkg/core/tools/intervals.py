from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Mapping

import numpy as np
from scipy import stats

from core.errors import DomainError
from core.models.distributions import Estimate
from core.models.streams import RngStream

CONFIDENCE = 0.95
JACKKNIFE_BLOCKS = 100


def z_value(confidence: float = CONFIDENCE) -> float:
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def wilson_interval(successes: int | np.ndarray,
                    trials: int | np.ndarray,
                    confidence: float = CONFIDENCE) -> tuple[np.ndarray, np.ndarray]:
    """Wilson score interval for a binomial proportion. Works elementwise on arrays of counts."""
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    if np.any(n <= 0):
        raise DomainError('Wilson intervals need at least one trial')

    z = z_value(confidence)
    phat = k / n
    denominator = 1.0 + z ** 2 / n
    center = (phat + z ** 2 / (2.0 * n)) / denominator
    spread = z * np.sqrt(phat * (1.0 - phat) / n + z ** 2 / (4.0 * n ** 2)) / denominator
    return np.clip(center - spread, 0.0, 1.0), np.clip(center + spread, 0.0, 1.0)


def median_interval(sorted_values: np.ndarray, confidence: float = CONFIDENCE) -> Estimate:
    """Distribution-free interval for the median from binomial order statistics."""
    n = sorted_values.size
    alpha = 1.0 - confidence
    lower = int(stats.binom.ppf(alpha / 2.0, n, 0.5))
    upper = int(stats.binom.ppf(1.0 - alpha / 2.0, n, 0.5))
    lower = min(max(lower - 1, 0), n - 1)
    upper = min(max(upper, 0), n - 1)
    return Estimate(
        value=float(np.median(sorted_values)),
        lo=float(sorted_values[lower]),
        hi=float(sorted_values[upper])
    )


def block_jackknife(columns: Mapping[str, np.ndarray],
                    statistic: Callable[[Mapping[str, float]], float],
                    blocks: int = JACKKNIFE_BLOCKS,
                    confidence: float = CONFIDENCE) -> Estimate:
    """
    Delete-block jackknife for a smooth function of sample means.

    `columns` maps names to per-sample arrays in draw order; `statistic` receives the mean of each column and
    returns the estimate. Leave-one-block-out means come from block sums, so the cost is linear in the sample size.
    """
    names = list(columns)
    size = columns[names[0]].size
    blocks = min(blocks, size)
    if blocks < 2:
        raise DomainError('The jackknife needs at least two blocks')

    edges = np.linspace(0, size, blocks + 1).astype(int)
    counts = np.diff(edges).astype(float)

    totals: dict[str, float] = {}
    block_sums: dict[str, np.ndarray] = {}
    for name in names:
        data = np.asarray(columns[name], dtype=float)
        block_sums[name] = np.add.reduceat(data, edges[:-1])
        totals[name] = float(block_sums[name].sum())

    value = statistic({name: totals[name] / size for name in names})
    replicates = np.array([
        statistic({name: (totals[name] - block_sums[name][b]) / (size - counts[b]) for name in names})
        for b in range(blocks)
    ])

    spread = np.sqrt((blocks - 1) / blocks * np.sum((replicates - replicates.mean()) ** 2))
    z = z_value(confidence)
    return Estimate(value=value, lo=value - z * spread, hi=value + z * spread)


def jackknife_mean(samples: np.ndarray, confidence: float = CONFIDENCE) -> Estimate:
    return block_jackknife({'x': samples}, lambda m: m['x'], confidence=confidence)


def jackknife_variance(samples: np.ndarray, confidence: float = CONFIDENCE) -> Estimate:
    """Unbiased sample variance with a jackknife interval. Samples are centered first to avoid cancellation."""
    size = samples.size
    centered = samples - np.mean(samples)
    return block_jackknife(
        {'x': centered, 'xx': centered ** 2},
        lambda m: (m['xx'] - m['x'] ** 2) * size / (size - 1),
        confidence=confidence
    )


def _bootstrap(sorted_values: np.ndarray,
               replicates: int,
               stream: RngStream,
               threads: int,
               read: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """
    Runs `read` on the cumulative multiplicities of each bootstrap resample, one row per replicate.

    A resample is represented by multiplicities over the sorted sample, so no resample is ever sorted. Replicate r
    draws from `stream.spawn(stream.stream_id + r)`.
    """
    n = sorted_values.size

    def replicate(r: int) -> np.ndarray:
        generator = stream.spawn(stream.stream_id + r).generator()
        multiplicities = np.bincount(generator.integers(0, n, size=n), minlength=n)
        return read(np.cumsum(multiplicities))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(replicate, range(replicates)))
    return np.vstack(rows)


def bootstrap_quantiles(sorted_values: np.ndarray,
                        probabilities: np.ndarray,
                        replicates: int,
                        stream: RngStream,
                        threads: int = 1) -> np.ndarray:
    """Empirical quantiles (inverted CDF) of `replicates` bootstrap resamples, shape (replicates, len(probabilities))."""
    n = sorted_values.size
    targets = np.clip(np.ceil(np.asarray(probabilities, dtype=float) * n).astype(np.int64), 1, n)
    return _bootstrap(sorted_values, replicates, stream, threads,
                      lambda cumulative: sorted_values[np.searchsorted(cumulative, targets, side='left')])


def bootstrap_cdf(sorted_values: np.ndarray,
                  points: np.ndarray,
                  replicates: int,
                  stream: RngStream,
                  threads: int = 1) -> np.ndarray:
    """Empirical CDFs P(X ≤ x) of bootstrap resamples at `points`, shape (replicates, len(points))."""
    n = sorted_values.size
    positions = np.searchsorted(sorted_values, np.asarray(points, dtype=float), side='right')

    def read(cumulative: np.ndarray) -> np.ndarray:
        padded = np.concatenate(([0], cumulative))
        return padded[positions] / n

    return _bootstrap(sorted_values, replicates, stream, threads, read)


def ks_distance_to_cdf(sorted_values: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    return float(stats.kstest(sorted_values, cdf).statistic)


def ks_distance_two_samples(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(a, b).statistic)
