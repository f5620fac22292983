try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from pydantic import BaseModel, Field, ValidationError, computed_field, model_validator

from core.errors import ConfigError
from core.models.distributions import ConcConstants, SummaryStats
from core.models.dvoretzky import InstabilityReport
from core.models.verdicts import InequalityVerdict, VerdictStatus
from core.utils import is_ascending

MIN_SAMPLE_COUNT = 1_000
MAX_SAMPLE_COUNT = 100_000_000

# TOML tables folded into the flat config
_SECTIONS = ('grids', 'dvoretzky')


class ExperimentConfig(BaseModel):
    keys: list[str] = Field(
        description='Catalog keys of the functions to study',
        min_length=1
    )
    n: int | None = Field(
        description='Overrides the n= field of every key',
        default=None,
        ge=1
    )
    samples: int = Field(
        description='Monte Carlo sample count N per function',
        ge=MIN_SAMPLE_COUNT,
        le=MAX_SAMPLE_COUNT,
        default=200_000
    )
    seed: int = Field(
        description='Master seed; every random stream of the run derives from it',
        ge=0,
        default=1
    )
    t_grid: list[float] | None = Field(
        description='Deviation grid for tail profiles; each check uses its own default when omitted',
        default=None
    )
    p_list: list[float] = Field(
        description='Orders of the centered moments reported per function',
        default_factory=lambda: [1.0, 2.0, 4.0, 8.0, 16.0]
    )
    epsilon_grid: list[float] = Field(
        description='ε values for the Dvoretzky instability experiment; empty skips it',
        default_factory=list
    )
    checks: list[str] = Field(
        description='Verdict names to run, or ["all"]',
        default_factory=lambda: ['all']
    )
    alpha: float = Field(description='Over-concentration threshold of the reversal theorem', gt=0, le=1,
                         default=0.125)
    chi2_k: int = Field(description='Degrees of freedom of the χ² concavity check', ge=2, default=2)
    trials: int = Field(description='Random subspaces per Dvoretzky success table', ge=40, default=60)
    directions: int | None = Field(description='Directions per section; scales with k when omitted', default=None,
                                   ge=1000)
    polish: bool = Field(description='Refine section extremes by local search', default=True)
    plots: bool = Field(description='Write plot-data CSVs next to the report', default=True)
    keep_samples: bool = Field(description='Persist raw draws of every function', default=False)
    output_dir: Path = Field(description='Directory for report.json and the CSV side files',
                             default=Path('conclab-out'))

    @model_validator(mode='after')
    def verify_grids(self) -> Self:
        if self.t_grid is not None:
            if not self.t_grid or min(self.t_grid) < 0 or not is_ascending(self.t_grid):
                raise ValueError('t_grid must be non-empty, non-negative and strictly ascending')
        if not self.p_list or min(self.p_list) < 1 or not is_ascending(self.p_list):
            raise ValueError('p_list must be non-empty, at least 1 and strictly ascending')
        if self.epsilon_grid:
            if not is_ascending(self.epsilon_grid) or not 0 < self.epsilon_grid[0] <= self.epsilon_grid[-1] < 1:
                raise ValueError('epsilon_grid must be strictly ascending inside (0, 1)')
        return self

    @model_validator(mode='after')
    def verify_references(self) -> Self:
        """Unknown keys and check names surface as their own errors, not as validation errors."""
        from core.labs.inequalities.suite import InequalitySuite
        from core.tools.catalog import parse_key

        for key in self.keys:
            parse_key(key, self.n)
        InequalitySuite.resolve(self.checks)
        return self

    @classmethod
    def from_toml(cls, path: str | Path) -> Self:
        """
        Reads a TOML config. Top-level keys map onto fields; the [grids] and [dvoretzky] tables are folded in.
        """
        source = Path(path)
        try:
            with source.open('rb') as f:
                raw = tomllib.load(f)
        except OSError as e:
            raise ConfigError(f'Cannot read config {source}: {e}') from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f'{source} is not valid TOML: {e}') from e

        values = {key: value for key, value in raw.items() if key not in _SECTIONS}
        for section in _SECTIONS:
            table = raw.get(section, {})
            if not isinstance(table, dict):
                raise ConfigError(f'[{section}] in {source} must be a table')
            for key, value in table.items():
                if key in values:
                    raise ConfigError(f'"{key}" is set twice in {source}')
                values[key] = value

        return cls.validated(values)

    @classmethod
    def validated(cls, values: dict) -> Self:
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            raise ConfigError(f'Invalid experiment config: {e}') from e


class FunctionSummary(BaseModel):
    """Everything estimated about one function before any check runs."""
    function_key: str
    stats: SummaryStats
    constants: ConcConstants | None = Field(
        description='Var, ov and s; absent for functions without a Lipschitz constant',
        default=None
    )


class RunReport(BaseModel):
    """
    The deterministic body of a run: config echo, seed, code versions and results. Wall-clock timings are kept
    apart so that replays produce the same bytes.
    """
    config: ExperimentConfig
    seed: int
    versions: dict[str, str]
    summaries: list[FunctionSummary] = Field(default_factory=list)
    verdicts: list[InequalityVerdict] = Field(default_factory=list)
    dvoretzky: list[InstabilityReport] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """No requested verdict failed and every instability band held. Unmet hypotheses do not count as failures."""
        return (all(verdict.status != VerdictStatus.FAILED for verdict in self.verdicts)
                and all(report.passed for report in self.dvoretzky))

    def failed(self) -> list[InequalityVerdict]:
        return [verdict for verdict in self.verdicts if verdict.status == VerdictStatus.FAILED]


class RunTiming(BaseModel):
    seconds: dict[str, float] = Field(description='Wall-clock seconds per workflow stage', default_factory=dict)


class ErrorReport(BaseModel):
    """What the CLI prints instead of a report when a run cannot finish."""
    error: str = Field(description='Name of the exception class')
    message: str
    exit_code: int
    function_key: str | None = Field(description='The function being evaluated, when known', default=None)
