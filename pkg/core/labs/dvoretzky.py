import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
from scipy import optimize, special

from core.errors import DomainError
from core.labs.base import BaseLab
from core.labs.inequalities.fitting import above_margin, below_margin, box, fit_sandwich, make_records, make_verdict
from core.labs.mc_engine import MIN_RESOLVED_COUNT, MonteCarloEngine
from core.models.distributions import Estimate
from core.models.dvoretzky import (
    DvoretzkyEstimate, InstabilityReport, RatioTailReport, SectionStats, SubspaceSample, SuccessRecord
)
from core.models.functions import FunctionSpec
from core.models.streams import RngStream
from core.tools.catalog import evaluate_batch, make_tilted, tilted_closed_form_k
from core.tools.gaussian import sample_gaussian_matrix
from core.tools.grassmann import sample_subspace
from core.tools.intervals import jackknife_mean, wilson_interval

MIN_DIRECTIONS = 1000
MIN_TRIALS = 40
DEFAULT_TRIALS = 60
SUCCESS_PROBABILITY = 2.0 / 3.0
# The search starts between k = 1 and this multiple of k(X)
UPPER_SEED_FACTOR = 8.0
MIN_TILT = 4.0
INSTABILITY_BAND = 4.0
DESK_MAX_DIMENSION = 512
DESK_MAX_K = 64
DEFAULT_EPSILON_GRID = (0.08, 0.12, 0.2, 0.3)
DEFAULT_DELTA_GRID = (0.02, 0.05, 0.08, 0.11, 0.14, 0.17, 0.2, 0.25, 0.3)
SANDWICH_BOX = (2.0 ** -8, 2.0 ** 8)
POLISH_SWEEPS = 2
SUBSPACE_STREAM = 1 << 41
DIRECTION_STREAM = 1 << 42


def default_direction_count(k: int) -> int:
    return max(10_000, 200 * k)


def tally_successes(epsilon: float, k: int, successes: int, trials: int) -> SuccessRecord:
    """Accepts k only when the Wilson lower bound of the success rate reaches 2/3."""
    lo, hi = wilson_interval(successes, trials)
    return SuccessRecord(epsilon=epsilon, k=k, successes=successes, trials=trials,
                         wilson_lo=float(lo), wilson_hi=float(hi), accepted=bool(lo >= SUCCESS_PROBABILITY))


def critical_dimension(spec: FunctionSpec, engine: MonteCarloEngine, count: int, seed: int) -> Estimate:
    """k(X) = (𝔼‖Z‖/b)², the interval carried over from the jackknife interval of the mean."""
    if not spec.is_norm or spec.lipschitz is None or spec.lipschitz <= 0:
        raise DomainError(f'The critical dimension needs a norm with known b(X), got "{spec.key}"')

    b = float(spec.lipschitz)
    (values,) = engine.map_chunks(spec.dimension, count, seed, lambda Z: (evaluate_batch(spec, Z),))
    mean = jackknife_mean(values)
    return Estimate(value=(mean.value / b) ** 2, lo=(max(mean.lo, 0.0) / b) ** 2, hi=(mean.hi / b) ** 2)


def _polish(spec: FunctionSpec, basis: np.ndarray, start: np.ndarray, sign: float) -> float:
    """
    Pushes sign·‖·‖ up from `start` on the section sphere, one coordinate of the direction at a time, by bounded
    scalar searches. Returns the best norm reached.
    """
    k = basis.shape[0]
    direction = start / np.linalg.norm(start)
    best = float(evaluate_batch(spec, (direction @ basis)[None, :])[0])
    width = 0.5 / math.sqrt(k)

    def along(step: float, i: int) -> float:
        moved = direction.copy()
        moved[i] += step
        moved /= np.linalg.norm(moved)
        return -sign * float(evaluate_batch(spec, (moved @ basis)[None, :])[0])

    for _ in range(POLISH_SWEEPS):
        for i in range(k):
            result = optimize.minimize_scalar(along, bounds=(-width, width), args=(i,), method='bounded',
                                              options={'xatol': 1e-4 * width})
            if -result.fun > sign * best:
                direction[i] += result.x
                direction /= np.linalg.norm(direction)
                best = -sign * float(result.fun)
        width /= 2.0
    return best


def section_sphericity(spec: FunctionSpec,
                       subspace: SubspaceSample,
                       directions: int,
                       stream: RngStream,
                       polish: bool = True) -> SectionStats:
    """
    max/min of the norm over the unit sphere of the section, from `directions` normalized Gaussian combinations of
    the basis, then polished locally around the running max and min.
    """
    if subspace.n != spec.dimension:
        raise DomainError(f'Subspace of ℝ^{subspace.n} given for "{spec.key}" on ℝ^{spec.dimension}')
    if directions < MIN_DIRECTIONS:
        raise DomainError(f'At least {MIN_DIRECTIONS} directions are needed, got {directions}')

    if subspace.k == 1:
        points = np.vstack([subspace.basis[0], -subspace.basis[0]])
        values = evaluate_batch(spec, points)
        top, bottom = float(np.max(values)), float(np.min(values))
        return SectionStats(max_ratio=top, min_ratio=bottom, mean=float(np.mean(values)),
                            sphericity=max(top / bottom, 1.0), direction_count=2)

    coefficients, _ = sample_gaussian_matrix(stream, directions, subspace.k)
    coefficients /= np.linalg.norm(coefficients, axis=1, keepdims=True)
    values = evaluate_batch(spec, coefficients @ subspace.basis)
    top, bottom = float(np.max(values)), float(np.min(values))

    if polish:
        top = max(top, _polish(spec, subspace.basis, coefficients[np.argmax(values)], 1.0))
        bottom = min(bottom, _polish(spec, subspace.basis, coefficients[np.argmin(values)], -1.0))

    if not bottom > 0:
        raise DomainError(f'"{spec.key}" vanishes on the section sphere, so it is not a norm')
    return SectionStats(max_ratio=top, min_ratio=bottom, mean=float(np.mean(values)),
                        sphericity=max(top / bottom, 1.0), direction_count=directions)


class DvoretzkyLab(BaseLab):
    """
    Random almost-spherical sections of a normed space.

    Sphericity is cached per (function, k, trial), so sweeping ε re-reads the same sections and the success events
    are nested in ε.
    """

    def __init__(self,
                 engine: MonteCarloEngine | None = None,
                 trials: int = DEFAULT_TRIALS,
                 directions: int | None = None,
                 polish: bool = True,
                 threads: int | None = None) -> None:
        super().__init__(name='dvoretzky_lab', threads=threads)
        if trials < MIN_TRIALS:
            raise DomainError(f'At least {MIN_TRIALS} trials are needed, got {trials}')
        self.engine = engine or MonteCarloEngine(threads=self.threads)
        self.trials = trials
        self.directions = directions
        self.polish = polish
        self._cache: dict[tuple[str, int, int, int], float] = {}

    def _sphericity(self, spec: FunctionSpec, k: int, trial: int, seed: int) -> float:
        key = (spec.key, seed, k, trial)
        if key not in self._cache:
            stream_id = SUBSPACE_STREAM + (k << 20) + trial
            subspace, _ = sample_subspace(spec.dimension, k, RngStream(master_seed=seed, stream_id=stream_id))
            directions = self.directions or default_direction_count(k)
            stats = section_sphericity(spec, subspace, directions,
                                       RngStream(master_seed=seed, stream_id=DIRECTION_STREAM + (k << 20) + trial),
                                       polish=self.polish)
            self._cache[key] = stats.sphericity
        return self._cache[key]

    def success_record(self, spec: FunctionSpec, k: int, epsilon: float, seed: int) -> SuccessRecord:
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            ratios = list(pool.map(lambda trial: self._sphericity(spec, k, trial, seed), range(self.trials)))

        successes = sum(ratio < 1.0 + epsilon for ratio in ratios)
        return tally_successes(epsilon, k, successes, self.trials)

    def estimate_k_eps(self,
                       spec: FunctionSpec,
                       epsilon: float,
                       seed: int,
                       k_critical: float | None = None,
                       k_cap: int | None = None,
                       count: int = 20_000) -> DvoretzkyEstimate:
        """
        The largest k whose success rate has a Wilson lower bound of at least 2/3, bisecting between k = 1 and
        min(n, ⌈8·k(X)⌉). Returns 0 when even lines fail.
        """
        if not 0 < epsilon < 1:
            raise DomainError(f'ε must lie in (0, 1), got {epsilon}')
        if k_critical is None:
            k_critical = critical_dimension(spec, self.engine, count, seed).value

        self._log.info(f'🌐 Estimating k({spec.key}, {epsilon:g}) with k(X) ≈ {k_critical:.4g}')
        records: list[SuccessRecord] = []

        def accepted(k: int) -> bool:
            record = self.success_record(spec, k, epsilon, seed)
            records.append(record)
            return record.accepted

        upper = min(spec.dimension, max(2, math.ceil(UPPER_SEED_FACTOR * k_critical)))
        if k_cap is not None:
            upper = min(upper, k_cap)

        if not accepted(1):
            estimate = 0
        elif upper == 1 or accepted(upper):
            estimate = upper
        else:
            lo, hi = 1, upper
            while hi - lo > 1:
                middle = (lo + hi) // 2
                if accepted(middle):
                    lo = middle
                else:
                    hi = middle
            estimate = lo

        self._log.info(f'✅ k({spec.key}, {epsilon:g}) = {estimate} after {len(records)} probes')
        return DvoretzkyEstimate(function_key=spec.key, epsilon=epsilon, k_estimate=estimate,
                                 k_critical=k_critical, records=records)

    def instability_experiment(self,
                               spec: FunctionSpec,
                               seed: int,
                               epsilon_grid: Sequence[float] = DEFAULT_EPSILON_GRID,
                               count: int = 100_000,
                               t: float | None = None,
                               k_closed_form: float | None = None) -> InstabilityReport:
        """k(X, ε)/(ε²·k(X)) across ε; a band of at most 4 means the ε-dependence is ε²."""
        if spec.dimension > DESK_MAX_DIMENSION:
            raise DomainError(f'Instability experiments are capped at n = {DESK_MAX_DIMENSION}')

        k_critical = critical_dimension(spec, self.engine, count, seed)
        estimates = [self.estimate_k_eps(spec, epsilon, seed, k_critical.value, k_cap=DESK_MAX_K)
                     for epsilon in sorted(epsilon_grid)]

        ratios = [estimate.k_estimate / (estimate.epsilon ** 2 * k_critical.value) for estimate in estimates]
        positive = [ratio for ratio in ratios if ratio > 0]
        band = max(positive) / min(positive) if len(positive) == len(ratios) else math.inf
        sandwich_ok = all(1 <= estimate.k_estimate <= spec.dimension for estimate in estimates)

        report = InstabilityReport(function_key=spec.key, t=t, k_critical=k_critical, k_closed_form=k_closed_form,
                                   estimates=estimates, ratios=ratios, band=band, band_limit=INSTABILITY_BAND,
                                   sandwich_ok=sandwich_ok)
        self._log.info(f'{"✅" if report.passed else "❌"} {spec.key}: ratio band {band:.3g}')
        return report

    def tilted_instability_experiment(self,
                                      base: FunctionSpec,
                                      seed: int,
                                      t: float = MIN_TILT,
                                      epsilon_grid: Sequence[float] = DEFAULT_EPSILON_GRID,
                                      count: int = 100_000) -> InstabilityReport:
        """The instability experiment on the tilted norm f_t of `base`, t ≥ 4."""
        if t < MIN_TILT:
            raise DomainError(f'The tilt must be at least {MIN_TILT:g}, got {t}')

        k_base = critical_dimension(base, self.engine, count, seed)
        if t > math.sqrt(k_base.value):
            self._log.warning(f'⚠️ t = {t:g} exceeds √k(X) ≈ {math.sqrt(k_base.value):.3g}')

        tilted = make_tilted(base, t)
        return self.instability_experiment(tilted, seed, epsilon_grid, count, t=t,
                                           k_closed_form=tilted_closed_form_k(k_base.value, t))

    def tilted_ratio_tail_experiment(self,
                                     base: FunctionSpec,
                                     seed: int,
                                     t: float = MIN_TILT,
                                     delta_grid: Sequence[float] = DEFAULT_DELTA_GRID,
                                     count: int = 200_000) -> RatioTailReport:
        """
        P(f_t(Z) ≤ (1-δ)·m·‖Z‖₂ or f_t(Z) ≥ (1+δ)·m·‖Z‖₂) with m = 𝔼f_t/𝔼‖Z‖₂, sandwiched between c·e^{-Cδ²k_t} and
        C·e^{-cδ²k_t}.
        """
        if t < MIN_TILT:
            raise DomainError(f'The tilt must be at least {MIN_TILT:g}, got {t}')
        delta = np.asarray(sorted(delta_grid), dtype=float)
        if delta.size == 0 or delta[0] <= 0 or delta[-1] >= 1.0 / 3.0:
            raise DomainError('δ must lie in (0, 1/3)')

        tilted = make_tilted(base, t)
        n = tilted.dimension

        def transform(Z: np.ndarray) -> tuple[np.ndarray, ...]:
            return evaluate_batch(tilted, Z), np.linalg.norm(Z, axis=1)

        values, lengths = self.engine.map_chunks(n, count, seed, transform)
        mean = jackknife_mean(values)
        b = float(tilted.lipschitz or 1.0)
        k_t = Estimate(value=(mean.value / b) ** 2, lo=(mean.lo / b) ** 2, hi=(mean.hi / b) ** 2)
        # 𝔼‖Z‖₂ = √2·Γ((n+1)/2)/Γ(n/2)
        expected_length = math.sqrt(2.0) * math.exp(special.gammaln((n + 1) / 2.0) - special.gammaln(n / 2.0))
        ratio = values * expected_length / (lengths * mean.value)

        deviation = np.sort(np.abs(ratio - 1.0))
        counts = count - np.searchsorted(deviation, delta, side='left')
        lo, hi = wilson_interval(counts, count)
        resolved = counts >= MIN_RESOLVED_COUNT
        exponent = delta ** 2 * k_t.value

        sandwich = fit_sandwich(exponent, lo, hi, resolved, box(*SANDWICH_BOX))
        records = make_records(delta, counts / count, lo, hi, sandwich.lower, above_margin(hi, sandwich.lower),
                               resolved, label='lower')
        records += make_records(delta, counts / count, lo, hi, sandwich.upper, below_margin(lo, sandwich.upper),
                                resolved, label='upper')
        verdict = make_verdict('tilted_ratio_tail', tilted.key, records, sandwich.fit.constants,
                               notes=[f'k_t = {k_t.value:.6g}'], feasible=sandwich.fit.feasible)

        return RatioTailReport(function_key=tilted.key, t=t, k_t=k_t, delta_grid=delta.tolist(),
                               probabilities=(counts / count).tolist(), counts=counts.astype(int).tolist(),
                               verdict=verdict)
