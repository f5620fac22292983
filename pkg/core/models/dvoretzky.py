from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from core.models.distributions import Estimate
from core.models.verdicts import InequalityVerdict

ORTHONORMALITY_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class SubspaceSample:
    """A k-dimensional subspace of ℝⁿ given by an orthonormal basis in the rows of a k×n matrix."""
    basis: np.ndarray
    provenance: str

    def __post_init__(self):
        if self.basis.ndim != 2 or self.basis.shape[0] > self.basis.shape[1]:
            raise ValueError(f'A subspace basis must be k×n with k ≤ n, got shape {self.basis.shape}')
        gram = self.basis @ self.basis.T
        if not np.allclose(gram, np.eye(self.basis.shape[0]), rtol=0.0, atol=ORTHONORMALITY_TOLERANCE):
            raise ValueError('Subspace basis rows are not orthonormal')

    @property
    def k(self) -> int:
        return int(self.basis.shape[0])

    @property
    def n(self) -> int:
        return int(self.basis.shape[1])


class SectionStats(BaseModel):
    """The norm on the unit sphere of a section, seen through finitely many directions."""
    max_ratio: float = Field(description='Largest norm found on the section sphere')
    min_ratio: float = Field(description='Smallest norm found on the section sphere')
    mean: float = Field(description='M_F, the spherical mean of the norm over the sampled directions')
    sphericity: float = Field(description='max_ratio / min_ratio, a lower estimate of the true ratio', ge=1.0)
    direction_count: int = Field(ge=1)


class SuccessRecord(BaseModel):
    epsilon: float
    k: int = Field(ge=1)
    successes: int = Field(ge=0)
    trials: int = Field(ge=1)
    wilson_lo: float
    wilson_hi: float
    accepted: bool = Field(description='True when the Wilson lower bound of the success rate is at least 2/3')


class DvoretzkyEstimate(BaseModel):
    function_key: str
    epsilon: float = Field(gt=0, lt=1)
    k_estimate: int = Field(ge=0, description='Largest k at which random sections are (1+ε)-spherical')
    k_critical: float = Field(description='k(X) used to seed the search')
    records: list[SuccessRecord] = Field(default_factory=list, description='Success tables in search order')

    @property
    def trace(self) -> list[int]:
        return [record.k for record in self.records]

    def monotone_within_ci(self) -> bool:
        """Success probability does not increase with k beyond what the Wilson intervals allow."""
        ordered = sorted(self.records, key=lambda record: record.k)
        return all(later.wilson_lo <= earlier.wilson_hi for earlier, later in zip(ordered, ordered[1:]))


class InstabilityReport(BaseModel):
    function_key: str
    t: float | None = Field(default=None, description='Tilt, or None for an untilted norm')
    k_critical: Estimate
    k_closed_form: float | None = Field(default=None, description='Closed-form k(X_t) from the base k(X)')
    estimates: list[DvoretzkyEstimate]
    ratios: list[float] = Field(description='k(X, ε) / (ε²·k(X)) per ε')
    band: float = Field(description='max / min of the ratios')
    band_limit: float
    sandwich_ok: bool = Field(description='1 ≤ k(X, ε) ≤ n for every ε')

    @property
    def passed(self) -> bool:
        return self.sandwich_ok and self.band <= self.band_limit


class RatioTailReport(BaseModel):
    """Deviations of f_t(Z)/‖Z‖₂ from its typical value, against e^{-δ²k_t}."""
    function_key: str
    t: float
    k_t: Estimate
    delta_grid: list[float]
    probabilities: list[float]
    counts: list[int]
    verdict: InequalityVerdict
