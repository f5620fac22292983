import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from core.models.verdicts import (
    ConstantBox, FittedConstant, GridRecord, InequalityVerdict, Preference, VerdictStatus
)

# Fitted constants are searched on powers of this step, so different boxes share grid points
GRID_STEP = 2.0 ** 0.25
_TINY = 1e-300


@dataclass(frozen=True)
class ConstantSpec:
    name: str
    box: ConstantBox
    preference: Preference

    @property
    def easiest(self) -> float:
        """The end of the box where the inequality is weakest."""
        return self.box.lower if self.preference == Preference.MAXIMIZE else self.box.upper


def box(lower: float, upper: float) -> ConstantBox:
    return ConstantBox(lower=lower, upper=upper)


def universal_grid(constant_box: ConstantBox) -> np.ndarray:
    """Powers of 2^(1/4) inside the box, plus both endpoints."""
    lo = math.ceil(math.log(constant_box.lower, GRID_STEP) - 1e-9)
    hi = math.floor(math.log(constant_box.upper, GRID_STEP) + 1e-9)
    # 2^(k/4) keeps exact powers of two exact
    points = [2.0 ** (k / 4) for k in range(lo, hi + 1)]
    points = [p for p in points
              if constant_box.lower <= p <= constant_box.upper
              and not math.isclose(p, constant_box.lower, rel_tol=1e-9)
              and not math.isclose(p, constant_box.upper, rel_tol=1e-9)]
    return np.unique(np.array(points + [constant_box.lower, constant_box.upper]))


def below_margin(empirical_lo: np.ndarray | float, bound: np.ndarray | float) -> np.ndarray:
    """
    Margin of `empirical ≤ bound` under the CI rule (the lower end of the empirical interval is compared). Relative
    to the larger side, so margins of different checks live on one scale; positive when satisfied.
    """
    a = np.asarray(empirical_lo, dtype=float)
    b = np.asarray(bound, dtype=float)
    return (b - a) / np.maximum(np.maximum(np.abs(a), np.abs(b)), _TINY)


def above_margin(empirical_hi: np.ndarray | float, bound: np.ndarray | float) -> np.ndarray:
    """Margin of `empirical ≥ bound`, comparing the upper end of the empirical interval."""
    a = np.asarray(empirical_hi, dtype=float)
    b = np.asarray(bound, dtype=float)
    return (a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), _TINY)


@dataclass(frozen=True)
class FitResult:
    values: dict[str, float]
    feasible: bool
    margins: np.ndarray
    constants: list[FittedConstant]


def fit_constants(specs: Sequence[ConstantSpec], margins: Callable[[dict[str, float]], np.ndarray]) -> FitResult:
    """
    Searches the product of the constants' universal grids.

    `margins` returns the per-point margins for a choice of constants; a choice is feasible when none is negative.
    Among feasible choices the one pushing the constants hardest towards their preferred ends (in log scale)
    is reported. When nothing is feasible, the choice with the largest worst margin is reported instead.
    """
    grids = [universal_grid(spec.box) for spec in specs]

    best: tuple[float, dict[str, float], np.ndarray] | None = None
    closest: tuple[float, dict[str, float], np.ndarray] | None = None

    for combination in itertools.product(*grids):
        values = {spec.name: float(value) for spec, value in zip(specs, combination)}
        current = np.asarray(margins(values), dtype=float)
        worst = float(np.min(current)) if current.size else math.inf

        if worst >= 0:
            score = sum(math.log(v) if spec.preference == Preference.MAXIMIZE else -math.log(v)
                        for spec, v in zip(specs, values.values()))
            if best is None or score > best[0]:
                best = (score, values, current)
        elif closest is None or worst > closest[0]:
            closest = (worst, values, current)

    feasible = best is not None
    _, values, current = best if best is not None else closest  # type: ignore[misc]
    constants = [FittedConstant(name=spec.name, value=values[spec.name], box=spec.box, preference=spec.preference)
                 for spec in specs]
    return FitResult(values=values, feasible=feasible, margins=current, constants=constants)


def make_records(t: Sequence[float],
                 empirical: Sequence[float],
                 empirical_lo: Sequence[float],
                 empirical_hi: Sequence[float],
                 bound: Sequence[float],
                 margins: Sequence[float],
                 resolved: Sequence[bool] | None = None,
                 label: str = '') -> list[GridRecord]:
    flags = [True] * len(t) if resolved is None else list(resolved)
    return [
        GridRecord(
            t=float(t[i]),
            label=label,
            empirical=float(empirical[i]),
            empirical_lo=float(empirical_lo[i]),
            empirical_hi=float(empirical_hi[i]),
            bound=float(bound[i]),
            resolved=bool(flags[i]),
            satisfied=bool(margins[i] >= 0) if flags[i] else True,
            margin=float(margins[i])
        )
        for i in range(len(t))
    ]


def make_verdict(name: str,
                 function_key: str,
                 records: list[GridRecord],
                 constants: list[FittedConstant] | None = None,
                 notes: list[str] | None = None,
                 feasible: bool = True) -> InequalityVerdict:
    """
    A verdict that passes when every resolved record is satisfied and the constant fit (if any) is feasible.
    """
    resolved = [record for record in records if record.resolved]
    notes = list(notes or [])
    if not resolved:
        notes.append('no resolved grid points')

    worst = min((record.margin for record in resolved), default=0.0)
    satisfied = all(record.satisfied for record in resolved) and feasible
    return InequalityVerdict(
        name=name,
        function_key=function_key,
        status=VerdictStatus.PASSED if satisfied else VerdictStatus.FAILED,
        constants=constants or [],
        worst_margin=worst,
        grid=records,
        notes=notes
    )


def hypothesis_not_met(name: str, function_key: str, reason: str) -> InequalityVerdict:
    return InequalityVerdict(
        name=name,
        function_key=function_key,
        status=VerdictStatus.HYPOTHESIS_NOT_MET,
        notes=[reason]
    )


@dataclass(frozen=True)
class SandwichFit:
    fit: FitResult
    lower: np.ndarray
    upper: np.ndarray


def fit_sandwich(exponent: np.ndarray,
                 empirical_lo: np.ndarray,
                 empirical_hi: np.ndarray,
                 resolved: np.ndarray,
                 constant_box: ConstantBox) -> SandwichFit:
    """
    One pair (c, C) with c·e^{-C·x} ≤ P ≤ C·e^{-c·x} at every resolved point, both constants in `constant_box`.
    """
    x = np.asarray(exponent, dtype=float)
    mask = np.asarray(resolved, dtype=bool)

    def lower(values: dict[str, float]) -> np.ndarray:
        return values['c'] * np.exp(-values['C'] * x)

    def upper(values: dict[str, float]) -> np.ndarray:
        return values['C'] * np.exp(-values['c'] * x)

    def margins(values: dict[str, float]) -> np.ndarray:
        return np.concatenate([above_margin(empirical_hi[mask], lower(values)[mask]),
                               below_margin(empirical_lo[mask], upper(values)[mask])])

    fit = fit_constants(
        [ConstantSpec('c', constant_box, Preference.MAXIMIZE),
         ConstantSpec('C', constant_box, Preference.MINIMIZE)],
        margins
    )
    return SandwichFit(fit=fit, lower=lower(fit.values), upper=upper(fit.values))
