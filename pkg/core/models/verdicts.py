from enum import Enum
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from pydantic import BaseModel, Field, computed_field, model_validator


class VerdictStatus(Enum):
    PASSED = 'passed'
    FAILED = 'failed'
    HYPOTHESIS_NOT_MET = 'hypothesis_not_met'


class Preference(Enum):
    """Which end of its box a fitted constant is pushed towards when several fits are feasible."""
    MAXIMIZE = 'maximize'
    MINIMIZE = 'minimize'


class ConstantBox(BaseModel):
    lower: float = Field(description='Smallest admissible value', gt=0)
    upper: float = Field(description='Largest admissible value', gt=0)

    @model_validator(mode='after')
    def verify_order(self) -> Self:
        if self.lower > self.upper:
            raise ValueError('The lower end of a constant box cannot exceed its upper end')
        return self

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


class FittedConstant(BaseModel):
    name: str
    value: float
    box: ConstantBox
    preference: Preference


class GridRecord(BaseModel):
    """One point of a verdict: the empirical side, the bound it is compared with, and the outcome."""
    t: float = Field(description='Grid coordinate (t, p, δ, α ... depending on the check)')
    label: str = Field(default='')
    empirical: float
    empirical_lo: float
    empirical_hi: float
    bound: float
    resolved: bool = Field(default=True, description='False when the point is below the Monte Carlo floor')
    satisfied: bool
    margin: float = Field(description='Signed slack of the CI-adjusted comparison, positive when satisfied')


class InequalityVerdict(BaseModel):
    """
    The outcome of one inequality check on one function. `passed` is derived from the status.
    """
    name: str
    function_key: str
    status: VerdictStatus
    constants: list[FittedConstant] = Field(default_factory=list)
    worst_margin: float = Field(default=0.0, description='Smallest margin over resolved grid points')
    grid: list[GridRecord] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return self.status == VerdictStatus.PASSED

    def constant(self, name: str) -> float:
        for fitted in self.constants:
            if fitted.name == name:
                return fitted.value
        raise KeyError(f'Verdict "{self.name}" has no fitted constant "{name}"')

    def constant_map(self) -> dict[str, float]:
        return {fitted.name: fitted.value for fitted in self.constants}

    def summary(self) -> str:
        constants = ', '.join(f'{c.name}={c.value:.4g}' for c in self.constants)
        suffix = f' [{constants}]' if constants else ''
        return f'{self.name} on {self.function_key}: {self.status.value} (margin {self.worst_margin:.3g}){suffix}'
