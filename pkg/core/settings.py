import os
from enum import Enum
from functools import lru_cache
from pathlib import Path
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

from pydantic import BaseModel, Field


class GaussianMethod(str, Enum):
    ZIGGURAT = 'ziggurat'
    INVERSION = 'inversion'


class LabSettings(BaseModel):
    """
    Process-wide settings read from the environment (a `.env` file is honoured by the runner setup).
    """
    log_level: str = Field(description='Root logging level', default='INFO')
    threads: int = Field(description='Default number of Monte Carlo worker threads', ge=1, default=1)
    gaussian_method: GaussianMethod = Field(
        description='How standard normal variates are produced from the random stream',
        default=GaussianMethod.ZIGGURAT
    )
    output_dir: Path = Field(description='Default directory for reports', default=Path('conclab-out'))

    @classmethod
    def from_env(cls) -> Self:
        values: dict[str, str] = {}
        for field, variable in (('log_level', 'CONCLAB_LOG_LEVEL'),
                                ('threads', 'CONCLAB_THREADS'),
                                ('gaussian_method', 'CONCLAB_GAUSSIAN_METHOD'),
                                ('output_dir', 'CONCLAB_OUTPUT_DIR')):
            value = os.environ.get(variable)
            if value:
                values[field] = value.strip()

        return cls.model_validate(values)


@lru_cache(maxsize=1)
def get_settings() -> LabSettings:
    """Settings are read once; call after `load_dotenv()` so a `.env` file is taken into account."""
    return LabSettings.from_env()
