from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field


@dataclass(frozen=True, eq=False)
class RearrangementCurve:
    """
    The Gaussian rearrangement f* of a sampled function on a grid of s values: f*(s) is the empirical quantile of
    f(Z) at level Φ(s), so pushing the standard Gaussian through f* reproduces the sampled law.
    """
    s_grid: np.ndarray
    probabilities: np.ndarray
    values: np.ndarray
    source: str

    def __post_init__(self):
        if not (self.s_grid.shape == self.probabilities.shape == self.values.shape) or self.s_grid.ndim != 1:
            raise ValueError('A rearrangement curve needs flat grids of matching length.')
        if self.s_grid.size < 2 or np.any(np.diff(self.s_grid) <= 0):
            raise ValueError('The s-grid of a rearrangement curve must be strictly ascending.')
        if np.any(np.diff(self.values) < 0):
            raise ValueError('A rearrangement curve is nondecreasing.')

    def __len__(self) -> int:
        return int(self.s_grid.size)

    def at(self, s: float | np.ndarray) -> float | np.ndarray:
        """f*(s) by linear interpolation between grid points."""
        value = np.interp(s, self.s_grid, self.values)
        return float(value) if np.ndim(value) == 0 else value


class RearrangementReport(BaseModel):
    function_key: str
    monotone_ok: bool
    convexity_margin: float = Field(description='Smallest discrete second difference (slope increment) of f*')
    convexity_sd_margin: float = Field(description='Smallest second difference in units of its bootstrap SD')
    convexity_ok: bool
    lip_estimate: float = Field(description='Largest one-sided slope of f* on the thinned grid')
    lip_bound: float
    lip_ok: bool
    ks_distance: float = Field(description='KS distance between the Φ-pushforward of f* and the source law')
    ks_ok: bool
    dirichlet_energy: float = Field(description='∫ |(f*)′|² dγ from the one-sided slopes')
    grad_sq_bound: float | None = Field(default=None, description='1.05 · 𝔼‖∇f‖² (upper CI end), when known')
    dirichlet_ok: bool
    s_thinned: list[float]
    derivative_curve: list[float] = Field(description='One-sided slopes of f* between thinned grid points')

    @property
    def passed(self) -> bool:
        return self.monotone_ok and self.convexity_ok and self.lip_ok and self.ks_ok and self.dirichlet_ok
