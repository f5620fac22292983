import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize

from core.errors import DomainError

ORLICZ_RTOL = 1e-8


class YoungKind(str, Enum):
    TALAGRAND_PHI = 'talagrand_phi'
    POWER_P = 'power_p'
    CUSTOM = 'custom'


@dataclass(frozen=True, eq=False)
class YoungFunction:
    """
    A convex increasing ψ on [0, ∞) with ψ(0) = 0.

    `custom` functions are given by a table of (point, value) pairs starting at (0, 0), interpolated linearly and
    extended beyond the last point with the last slope.
    """
    kind: YoungKind
    p: float = 2.0
    points: np.ndarray = field(default_factory=lambda: np.array([]))
    values: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        match self.kind:
            case YoungKind.POWER_P if self.p < 1:
                raise DomainError(f't^p is a Young function only for p ≥ 1, got {self.p}')
            case YoungKind.CUSTOM:
                points = np.asarray(self.points, dtype=float)
                values = np.asarray(self.values, dtype=float)
                if points.size < 2 or points.shape != values.shape:
                    raise DomainError('A custom Young function needs at least two (point, value) pairs')
                if points[0] != 0.0 or values[0] != 0.0:
                    raise DomainError('A custom Young function must start at ψ(0) = 0')
                object.__setattr__(self, 'points', points)
                object.__setattr__(self, 'values', values)

        grid = np.linspace(0.0, 10.0, 101)
        psi = self(grid)
        if psi[0] != 0.0 or np.any(np.diff(psi) <= 0) or np.any(np.diff(psi, 2) < -1e-12 * np.max(psi)):
            raise DomainError(f'{self.kind.value} is not convex and increasing with ψ(0) = 0')

    @classmethod
    def talagrand(cls) -> 'YoungFunction':
        """φ(t) = t²/log(e + t)."""
        return cls(kind=YoungKind.TALAGRAND_PHI)

    @classmethod
    def power(cls, p: float) -> 'YoungFunction':
        return cls(kind=YoungKind.POWER_P, p=p)

    @classmethod
    def table(cls, points: np.ndarray, values: np.ndarray) -> 'YoungFunction':
        return cls(kind=YoungKind.CUSTOM, points=np.asarray(points), values=np.asarray(values))

    def __call__(self, t: np.ndarray) -> np.ndarray:
        x = np.asarray(t, dtype=float)
        match self.kind:
            case YoungKind.TALAGRAND_PHI:
                return x ** 2 / np.log(math.e + x)
            case YoungKind.POWER_P:
                return x ** self.p
            case YoungKind.CUSTOM:
                last_slope = (self.values[-1] - self.values[-2]) / (self.points[-1] - self.points[-2])
                inside = np.interp(x, self.points, self.values)
                return np.where(x > self.points[-1], self.values[-1] + last_slope * (x - self.points[-1]), inside)


def orlicz_norm(samples: np.ndarray, psi: YoungFunction, rtol: float = ORLICZ_RTOL) -> float:
    """
    ‖h‖_ψ = inf{λ > 0 : 𝔼ψ(|h|/λ) ≤ 1} under the empirical law of `samples`.

    λ ↦ 𝔼ψ(|h|/λ) is decreasing, so the root is bracketed by doubling and then bisected.
    """
    h = np.abs(np.asarray(samples, dtype=float)).ravel()
    if h.size == 0 or not np.all(np.isfinite(h)):
        raise DomainError('The Orlicz norm needs a non-empty sample of finite values')
    if not np.any(h > 0):
        return 0.0

    def excess(lam: float) -> float:
        return float(np.mean(psi(h / lam))) - 1.0

    lo = hi = float(np.max(h))
    while excess(lo) <= 0:
        lo /= 2.0
    while excess(hi) > 0:
        hi *= 2.0

    return float(optimize.bisect(excess, lo, hi, rtol=rtol, xtol=1e-300 + rtol * lo))
